"""Cart-pole swing-up with a learned dynamics model.

Pipeline: drive the cart with random actions to collect transitions, fit an
equation-learner to the state derivatives, then hand the learned model to a
random-shooting MPC controller. The pole starts hanging down; the reward
counts sum(cos(theta)) over the episode, so an episode that swings up and
balances scores close to the step count.

The full pipeline takes a few minutes; pass --quick for a short episode
with the ground-truth model only.
"""

import sys

import numpy as np

from eqldiv import cartpole, selection, training

STEPS = 300 if "--quick" in sys.argv else 1000
cfg = cartpole.MpcConfig()

print(f"MPC: {cfg.n_rollouts} random action sequences, "
      f"horizon {cfg.horizon} steps ({cfg.horizon * cfg.dt:.1f}s lookahead)")

print("\n-- ground-truth dynamics --")
R = cartpole.run_episode(cartpole.ground_truth_model(), steps=STEPS,
                         cfg=cfg, seed=0)
print(f"episode reward: {R:.0f} / {STEPS}")

if "--quick" in sys.argv:
    sys.exit(0)

print("\n-- learned dynamics --")
print("collecting 2 random-action rollouts (1000 steps each)...")
tx, ty, vx, vy = cartpole.collect_rollouts(2, steps=1000, seed=0)
data = cartpole.rollouts_to_dataset(tx, ty, vx, vy, seed=0)

print("fitting state derivatives (3-layer grid, 10000 epochs each)...")
candidates = training.run_grid(data, [1e-5, 10 ** -4.5, 1e-4], depths=[3],
                               n_seeds=2, master_seed=0, total_epochs=10000)
ok = [c for c in candidates if not c.failed]
chosen = selection.select(ok, selection.VINT_EX)
print(f"selected: lambda={chosen.lam:.3g} seed={chosen.seed} "
      f"v_int={chosen.v_int:.4f} v_ex={chosen.v_ex:.4f}")

R = cartpole.run_episode(cartpole.network_model(chosen.network),
                         steps=STEPS, cfg=cfg, seed=0)
print(f"episode reward with the learned model: {R:.0f} / {STEPS}")
