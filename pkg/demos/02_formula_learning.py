"""Recover a multi-input benchmark formula and compare against baselines.

Trains on the F-1 task
    y = (sin(pi*x1) + sin(2*pi*x2 + pi/8) + x2 - x3*x4) / 3
and contrasts the learned model's extrapolation error with the "predict the
training mean" and "predict zero" baselines, which is how you can tell a
model that merely interpolates from one that found the right structure.
"""

import numpy as np

from eqldiv import datasets, expressions, selection, training
from eqldiv.extract import extract

data = datasets.generate("F1", n_train=5000, sigma=0.01, seed=1)
print(f"task: y = {expressions.render(data.exprs[0])}")

candidates = training.run_grid(data, [1e-5, 1e-4], depths=[2], n_seeds=2,
                               master_seed=1, total_epochs=4000)
chosen = selection.select(candidates, selection.VINT_EX)
print(f"selected: lambda={chosen.lam:.3g} seed={chosen.seed} "
      f"({chosen.sparsity:.0f} active weights)")

rms_int = training.evaluate(chosen.network, data.x_test, data.y_test)
rms_ex = training.evaluate(chosen.network, data.x_extra, data.y_extra)

mean_pred = data.y_train.mean(axis=0)
rms_mean = float(np.sqrt(np.mean((data.y_extra - mean_pred) ** 2)))
rms_zero = datasets.const_zero_rms(data.y_extra)

print(f"\n{'model':>16}  interpolation  extrapolation")
print(f"{'EQL (learned)':>16}  {rms_int:>13.4f}  {rms_ex:>13.4f}")
print(f"{'constant mean':>16}  {'-':>13}  {rms_mean:>13.4f}")
print(f"{'constant zero':>16}  {'-':>13}  {rms_zero:>13.4f}")

print(f"\nextracted: y = {expressions.render(extract(chosen.network)[0])}")
