"""Why model selection needs more than validation error.

Trains a lambda grid on the division task and scores every candidate under
the two selection criteria:

  * interpolation + sparsity      (usable without extrapolation data)
  * interpolation + extrapolation (when a held-out extrapolation set exists)

The instance with the lowest validation error is often a dense network that
overfits the training region; both criteria are designed to avoid it.
"""

from eqldiv import datasets, selection, training

data = datasets.generate("division", n_train=1000, sigma=0.01, seed=3)
candidates = training.run_grid(data, [1e-6, 1e-4, 10 ** -3.5], depths=[2],
                               n_seeds=2, master_seed=3, total_epochs=4000)

for weights, label in ((selection.VINT_S, "interpolation + sparsity"),
                       (selection.VINT_EX, "interpolation + extrapolation")):
    scores = selection.scores(candidates, weights)
    chosen = selection.select(candidates, weights)
    print(f"\ncriterion: {label}")
    print(f"{'lambda':>10} {'seed':>4} {'v_int':>8} {'v_ex':>8} "
          f"{'weights':>7} {'score':>7}")
    for c, s in sorted(zip(candidates, scores), key=lambda p: p[1]):
        mark = " <- selected" if c is chosen else ""
        print(f"{c.lam:>10.3g} {c.seed:>4} {c.v_int:>8.4f} {c.v_ex:>8.4f} "
              f"{c.sparsity:>7.0f} {s:>7.4f}{mark}")

dense = max(candidates, key=lambda c: c.sparsity)
print(f"\nweakest regularization (lambda={dense.lam:.3g}) interpolates "
      f"almost as well (v_int={dense.v_int:.4f}) but carries "
      f"{dense.sparsity:.0f} weights and extrapolates poorly "
      f"(v_ex={dense.v_ex:.4f}) -- sparsity is what buys extrapolation")
