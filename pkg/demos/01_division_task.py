"""Learn sin(pi*x1) / (x2^2 + 1) from noisy samples.

The network only sees 1000 noisy input/output pairs from [-1, 1]^2, yet the
trained and pruned model extrapolates to [-2, 2]^2 and the extracted formula
matches the generating equation. Runs in about a minute.
"""

import numpy as np

from eqldiv import datasets, expressions, selection, training
from eqldiv.extract import extract

data = datasets.generate("division", n_train=1000, sigma=0.01, seed=0)
print(f"task: y = {expressions.render(data.exprs[0])}")
print(f"training points: {len(data.x_train)} (noise sigma 0.01)")

# A small grid over the regularization strength; each candidate is a
# two-layer network trained for 4000 epochs with the division curriculum.
lambdas = [1e-5, 10 ** -4.5, 1e-4]
candidates = training.run_grid(data, lambdas, depths=[2], n_seeds=2,
                               master_seed=0, total_epochs=4000)
for c in candidates:
    print(f"  lambda={c.lam:.3g} seed={c.seed}: v_int={c.v_int:.4f} "
          f"v_ex={c.v_ex:.4f} active weights={c.sparsity:.0f}")

chosen = selection.select(candidates, selection.VINT_EX)
print(f"\nselected (interpolation + extrapolation score): "
      f"lambda={chosen.lam:.3g} seed={chosen.seed}")

rms = training.evaluate(chosen.network, data.x_extra, data.y_extra)
print(f"extrapolation RMS on [-2,2]^2 \\ [-1,1]^2: {rms:.4f}")

expr = extract(chosen.network)[0]
print(f"extracted formula: y = {expressions.render(expr)}")
