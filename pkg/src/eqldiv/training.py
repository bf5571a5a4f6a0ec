"""Training procedure: minibatch Adam with three regularization phases,
the division-threshold curriculum, periodic penalty epochs, and grid
search over regularization strength, depth and seeds.
"""

import csv
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _fastpath
from .kernels import EVAL_THRESHOLD
from .network import (
    Architecture,
    Network,
    build,
    forward,
    loss as network_loss,
    save_network,
    sparsity,
)

DEFAULT_BATCH = 20
PENALTY_EVERY = 50
DESK_EPOCHS_PER_LAYER = 2000


@dataclass(frozen=True)
class Schedule:
    """Epoch-indexed training plan.

    Phases: [0, t1) unregularized, [t1, t2) L1-regularized, [t2, T) L1 off
    with small weights frozen at zero. The division threshold follows
    theta(t) = 1/sqrt(t+1); every PENALTY_EVERY-th epoch is replaced by a
    penalty epoch on unlabeled inputs from the full test range.
    """

    total_epochs: int
    t1: int
    t2: int
    penalty_every: int = PENALTY_EVERY
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if not (0 < self.t1 < self.t2 < self.total_epochs):
            raise ValueError(
                f"need 0 < t1 < t2 < T, got t1={self.t1} t2={self.t2} "
                f"T={self.total_epochs}")

    def theta(self, t: int) -> float:
        return 1.0 / math.sqrt(t + 1.0)

    def lam(self, t: int, lam: float) -> float:
        return lam if self.t1 <= t < self.t2 else 0.0

    def is_penalty_epoch(self, t: int) -> bool:
        return t > 0 and t % self.penalty_every == 0


def make_schedule(depth: int, total_epochs=None, batch_size=DEFAULT_BATCH) -> Schedule:
    """Default plan for a depth-L network: T = (L-1)*10000, t1 = T/4,
    t2 = 19T/20; total_epochs overrides T with phase fractions preserved."""
    if depth < 2:
        raise ValueError("depth must be at least 2")
    T = total_epochs if total_epochs is not None else (depth - 1) * 10000
    return Schedule(total_epochs=T, t1=T // 4, t2=(19 * T) // 20,
                    batch_size=batch_size)


@dataclass
class Candidate:
    """A trained network instance plus its selection metrics."""

    lam: float
    depth: int
    seed: int
    v_int: float
    v_ex: float | None
    sparsity: float
    final_loss: float
    wall_time: float
    network: Network | None = None
    path: str = ""
    failed: bool = False


def evaluate(net: Network, X, Y, theta=EVAL_THRESHOLD) -> float:
    """Per-component root mean squared error on a test set."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty test set")
    pred, _ = forward(net, X, theta)
    return float(np.sqrt(np.mean((pred - Y.reshape(pred.shape)) ** 2)))


def output_bound(y_train, minimum=10.0) -> float:
    """Bound B for penalty epochs, estimated from observed outputs."""
    return float(max(minimum, 1.5 * np.max(np.abs(y_train))))


def train(net: Network, data, lam: float, schedule: Schedule, seed=0,
          bound=None) -> Candidate:
    """Run the full training procedure on a privately owned network copy.

    data is a datasets.Dataset (train/validation splits required). Returns
    a Candidate; a diverged run is flagged failed with infinite metrics so
    grid search can continue.
    """
    start = time.perf_counter()
    net = net.copy()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE71]))
    X, Y = data.x_train, data.y_train
    n_total = X.shape[0]
    if bound is None:
        bound = output_bound(Y)
    lo = data.extra_bounds[:, 0]
    hi = data.extra_bounds[:, 1]

    W, B, MK, out_w, in_w = _fastpath.pack(net)
    mW = np.zeros_like(W)
    vW = np.zeros_like(W)
    mB = np.zeros_like(B)
    vB = np.zeros_like(B)
    t_adam = 0
    arch = net.arch
    status = 0
    epoch_loss = math.inf

    for t in range(schedule.total_epochs):
        theta = schedule.theta(t)
        if t == schedule.t2:
            small = (np.abs(W) < 0.001) & ~MK
            W[small] = 0.0
            MK |= small
        if schedule.is_penalty_epoch(t):
            Xp = rng.uniform(lo, hi, size=(n_total, arch.n_in))
            perm = np.arange(n_total)
            epoch_loss, t_adam, status = _fastpath.run_epoch(
                W, B, MK, mW, vW, mB, vB, t_adam, out_w, in_w,
                arch.u, arch.v, Xp, Y, perm, schedule.batch_size,
                theta, 0.0, float(n_total),
                0.001, 0.0001, 0.9, 0.999, _fastpath.PENALTY_EPOCH, bound)
        else:
            perm = rng.permutation(n_total)
            epoch_loss, t_adam, status = _fastpath.run_epoch(
                W, B, MK, mW, vW, mB, vB, t_adam, out_w, in_w,
                arch.u, arch.v, X, Y, perm, schedule.batch_size,
                theta, schedule.lam(t, lam), float(n_total),
                0.001, 0.0001, 0.9, 0.999, _fastpath.REGRESSION_EPOCH, bound)
        if status != 0:
            break

    elapsed = time.perf_counter() - start
    if status != 0 or not np.isfinite(W).all() or not np.isfinite(B).all():
        return Candidate(lam=lam, depth=arch.depth, seed=seed,
                         v_int=math.inf, v_ex=math.inf, sparsity=math.inf,
                         final_loss=math.inf, wall_time=elapsed,
                         network=None, failed=True)

    _fastpath.unpack(net, W, B, MK, out_w, in_w)
    try:
        v_int = evaluate(net, data.x_val, data.y_val)
        v_ex = None
        if data.x_extra_val is not None:
            v_ex = evaluate(net, data.x_extra_val, data.y_extra_val)
        final_loss = network_loss(net, X, Y, lam=0.0, theta=EVAL_THRESHOLD,
                                  penalty_scale=1.0)
    except FloatingPointError:
        # Parameters stayed finite but activations overflow at evaluation:
        # the run still counts as diverged.
        return Candidate(lam=lam, depth=arch.depth, seed=seed,
                         v_int=math.inf, v_ex=math.inf, sparsity=math.inf,
                         final_loss=math.inf, wall_time=elapsed,
                         network=None, failed=True)
    return Candidate(lam=lam, depth=arch.depth, seed=seed,
                     v_int=v_int, v_ex=v_ex, sparsity=float(sparsity(net)),
                     final_loss=final_loss, wall_time=elapsed, network=net)


def run_grid(data, lambdas, depths, n_seeds, master_seed=0, total_epochs=None,
             u=30, v=10, bound=None, progress=None) -> list:
    """Train one candidate per (lambda, depth, seed) triple.

    Candidate initialization seeds derive from (master_seed, lambda index,
    depth index, seed index), so results do not depend on execution order.
    Individual failures are recorded, never raised.
    """
    lambdas = list(lambdas)
    depths = list(depths)
    if not lambdas or not depths or n_seeds < 1:
        raise ValueError("lambda grid, depth grid and seed count must be nonempty")
    out = []
    for li, lam in enumerate(lambdas):
        for di, depth in enumerate(depths):
            schedule = make_schedule(depth, total_epochs)
            for si in range(n_seeds):
                entropy = np.random.SeedSequence([master_seed, li, di, si])
                init_seed, train_seed = [int(s) for s in entropy.generate_state(2)]
                arch = Architecture(n_in=data.n_in, n_out=data.n_out,
                                    depth=depth, u=u, v=v)
                net = build(arch, seed=init_seed)
                cand = train(net, data, lam, schedule, seed=train_seed,
                             bound=bound)
                cand.seed = si
                out.append(cand)
                if progress is not None:
                    progress(cand)
    return out


# -- candidate ledger ---------------------------------------------------------

LEDGER_VERSION = 1
_LEDGER_MAGIC = f"# eqldiv-ledger {LEDGER_VERSION}"
_LEDGER_FIELDS = ["lambda", "depth", "seed", "v_int", "v_ex", "sparsity",
                  "final_loss", "wall_time", "failed", "network_path"]


class LedgerError(ValueError):
    pass


def write_ledger(candidates, path, networks_dir=None):
    """Persist candidates as CSV; networks are saved next to it if a
    directory is given."""
    if networks_dir is not None:
        os.makedirs(networks_dir, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(_LEDGER_MAGIC + "\n")
        w = csv.DictWriter(fh, fieldnames=_LEDGER_FIELDS)
        w.writeheader()
        for i, c in enumerate(candidates):
            net_path = ""
            if networks_dir is not None and c.network is not None:
                net_path = os.path.join(networks_dir, f"candidate_{i:04d}.eql")
                save_network(c.network, net_path)
                c.path = net_path
            w.writerow({
                "lambda": repr(c.lam), "depth": c.depth, "seed": c.seed,
                "v_int": repr(c.v_int),
                "v_ex": "" if c.v_ex is None else repr(c.v_ex),
                "sparsity": repr(c.sparsity), "final_loss": repr(c.final_loss),
                "wall_time": repr(c.wall_time),
                "failed": int(c.failed), "network_path": net_path,
            })


def read_ledger(path) -> list:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != _LEDGER_MAGIC:
            raise LedgerError(
                f"{path}: unsupported ledger version (expected "
                f"{_LEDGER_MAGIC!r}, got {first!r})")
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(Candidate(
            lam=float(r["lambda"]), depth=int(r["depth"]), seed=int(r["seed"]),
            v_int=float(r["v_int"]),
            v_ex=None if r["v_ex"] == "" else float(r["v_ex"]),
            sparsity=float(r["sparsity"]), final_loss=float(r["final_loss"]),
            wall_time=float(r["wall_time"]), failed=bool(int(r["failed"])),
            path=r["network_path"],
        ))
    return out


def default_lambda_grid():
    """The 26-value regularization grid 10^{-6, -5.9, ..., -3.5}."""
    return [10 ** (-6 + 0.1 * i) for i in range(26)]
