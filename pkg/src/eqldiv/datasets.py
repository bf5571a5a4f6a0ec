"""Benchmark dataset generators: the division task, four hand-crafted
formulas, random sparse expressions, and the cart-pendulum dynamics
regression problem.

Every dataset carries a 90/10 train/validation split inside the training
hypercube, noiseless interpolation and extrapolation test sets, a small
noisy extrapolation-validation set, and the generating expression trees.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex
from .expressions import Const, Cos, Div, Pow, Prod, Sin, Sum, Var

PI = math.pi


@dataclass
class Dataset:
    name: str
    exprs: list  # one expression tree per output
    train_bounds: np.ndarray  # (n, 2)
    extra_bounds: np.ndarray  # (n, 2)
    sigma: float
    seed: int
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    x_extra: np.ndarray
    y_extra: np.ndarray
    x_extra_val: np.ndarray | None = None
    y_extra_val: np.ndarray | None = None

    @property
    def n_in(self) -> int:
        return self.x_train.shape[1]

    @property
    def n_out(self) -> int:
        return self.y_train.shape[1]


def _eval_outputs(exprs, X):
    return np.stack([ex.evaluate(e, X) for e in exprs], axis=1)


def _sample_cube(rng, bounds, n):
    lo = bounds[:, 0]
    hi = bounds[:, 1]
    return rng.uniform(lo, hi, size=(n, len(lo)))


def _inside(X, bounds):
    return np.all((X >= bounds[:, 0]) & (X <= bounds[:, 1]), axis=1)


def _sample_shell(rng, extra_bounds, train_bounds, n):
    """Uniform points inside extra_bounds but outside the training cube."""
    out = []
    total = 0
    while total < n:
        cand = _sample_cube(rng, extra_bounds, max(2 * n, 64))
        keep = cand[~_inside(cand, train_bounds)]
        out.append(keep)
        total += len(keep)
    return np.concatenate(out)[:n]


def _safe_targets(exprs, X, rng, bounds):
    """Evaluate targets; points hitting a division pole are resampled."""
    try:
        return _eval_outputs(exprs, X), X
    except ex.DivisionByZero:
        pass
    X = X.copy()
    Y = np.empty((X.shape[0], len(exprs)))
    for i in range(X.shape[0]):
        while True:
            try:
                Y[i] = [ex.evaluate(e, X[i]) for e in exprs]
                break
            except ex.DivisionByZero:
                X[i] = _sample_cube(rng, bounds, 1)[0]
    return Y, X


def sample_from_expr(exprs, train_bounds, extra_bounds, n_train=10000,
                     n_test=5000, n_extra=5000, sigma=0.01, seed=0,
                     n_extra_val=40, name="custom") -> Dataset:
    """Build a full dataset from expression trees.

    n_train points are drawn in the training cube and split 90/10 into
    train/validation (both noisy). Test sets are noiseless; the
    extrapolation sets are rejection-sampled outside the training cube. The
    n_extra_val extrapolation-validation points are noisy, mirroring how
    few labeled extrapolation measurements would be obtained in practice.
    """
    if isinstance(exprs, (list, tuple)):
        exprs = list(exprs)
    else:
        exprs = [exprs]
    train_bounds = np.asarray(train_bounds, dtype=np.float64)
    extra_bounds = np.asarray(extra_bounds, dtype=np.float64)
    if np.any(extra_bounds[:, 0] > train_bounds[:, 0]) or np.any(
            extra_bounds[:, 1] < train_bounds[:, 1]):
        raise ValueError("training bounds must nest inside extrapolation bounds")
    rng = np.random.default_rng(seed)

    X = _sample_cube(rng, train_bounds, n_train)
    Y, X = _safe_targets(exprs, X, rng, train_bounds)
    Y = Y + rng.normal(0.0, sigma, size=Y.shape)
    n_val = n_train // 10
    x_val, y_val = X[:n_val], Y[:n_val]
    x_train, y_train = X[n_val:], Y[n_val:]

    x_test = _sample_cube(rng, train_bounds, n_test)
    y_test, x_test = _safe_targets(exprs, x_test, rng, train_bounds)

    x_extra = _sample_shell(rng, extra_bounds, train_bounds, n_extra)
    y_extra, x_extra = _safe_targets(exprs, x_extra, rng, extra_bounds)

    x_extra_val = y_extra_val = None
    if n_extra_val:
        x_extra_val = _sample_shell(rng, extra_bounds, train_bounds, n_extra_val)
        y_extra_val, x_extra_val = _safe_targets(exprs, x_extra_val, rng,
                                                 extra_bounds)
        y_extra_val = y_extra_val + rng.normal(0.0, sigma, size=y_extra_val.shape)

    return Dataset(
        name=name, exprs=exprs, train_bounds=train_bounds,
        extra_bounds=extra_bounds, sigma=sigma, seed=seed,
        x_train=x_train, y_train=y_train, x_val=x_val, y_val=y_val,
        x_test=x_test, y_test=y_test, x_extra=x_extra, y_extra=y_extra,
        x_extra_val=x_extra_val, y_extra_val=y_extra_val,
    )


def _cube(n, half):
    return np.array([[-half, half]] * n, dtype=np.float64)


# -- concrete benchmarks ------------------------------------------------------

def division_expr():
    """sin(pi*x1) / (x2^2 + 1)"""
    return Div(Sin(Prod((Const(PI), Var(0)))),
               Sum((Pow(Var(1), 2), Const(1.0))))


def gen_division_task(n_train=10000, sigma=0.01, seed=0) -> Dataset:
    return sample_from_expr(division_expr(), _cube(2, 1.0), _cube(2, 2.0),
                            n_train=n_train, sigma=sigma, seed=seed,
                            name="division")


def formula_expr(name):
    x1, x2, x3, x4 = Var(0), Var(1), Var(2), Var(3)
    third = Const(1.0 / 3.0)
    sin_pix1 = Sin(Prod((Const(PI), x1)))
    if name == "F1":
        inner = Sum((sin_pix1,
                     Sin(Sum((Prod((Const(2 * PI), x2)), Const(PI / 8)))),
                     x2,
                     Prod((Const(-1.0), x3, x4))))
        return Prod((third, inner))
    if name == "F2":
        inner = Sum((sin_pix1,
                     Prod((x2, Cos(Sum((Prod((Const(2 * PI), x1)), Const(PI / 4)))))),
                     x3,
                     Prod((Const(-1.0), Pow(x4, 2)))))
        return Prod((third, inner))
    if name == "F3":
        inner = Sum((Prod((Sum((Const(1.0), x2)), sin_pix1)),
                     Prod((x2, x3, x4))))
        return Prod((third, inner))
    if name == "F4":
        inner = Sum((sin_pix1,
                     Cos(Prod((Const(2.0), x2, sin_pix1))),
                     Prod((x2, x3, x4))))
        return Prod((Const(0.5), inner))
    raise ValueError(f"unknown formula: {name!r} (expected F1..F4)")


def gen_formula(name, n_train=10000, sigma=0.01, seed=0) -> Dataset:
    return sample_from_expr(formula_expr(name), _cube(4, 1.0), _cube(4, 2.0),
                            n_train=n_train, sigma=sigma, seed=seed, name=name)


def cartpend_exprs():
    """The four outputs of the cart-pendulum ODE right-hand side."""
    x1, x2, x3, x4 = Var(0), Var(1), Var(2), Var(3)
    den = Sum((Pow(Sin(x2), 2), Const(1.0)))
    num3 = Sum((
        Prod((Const(-1.0), x1)),
        Prod((Const(-0.01), x3)),
        Prod((Pow(x4, 2), Sin(x2))),
        Prod((Const(0.1), x4, Cos(x2))),
        Prod((Const(9.81), Sin(x2), Cos(x2))),
    ))
    num4 = Sum((
        Prod((Const(-0.2), x4)),
        Prod((Const(-19.62), Sin(x2))),
        Prod((x1, Cos(x2))),
        Prod((Const(0.01), x3, Cos(x2))),
        Prod((Const(-1.0), Pow(x4, 2), Sin(x2), Cos(x2))),
    ))
    return [x3, x4, Div(num3, den), Div(num4, den)]


def gen_cartpend(n_train=10000, sigma=0.01, seed=0) -> Dataset:
    return sample_from_expr(cartpend_exprs(), _cube(4, 1.0), _cube(4, 2.0),
                            n_train=n_train, sigma=sigma, seed=seed,
                            name="cartpend")


# -- random expressions -------------------------------------------------------

RE_NAMES = [f"RE{h}-{i}" for h in (2, 3) for i in (1, 2, 3, 4)]

_RE_U = 6  # unary units per hidden layer (2 each of id/sin/cos)
_RE_V = 2  # product units per hidden layer
_RE_IN_DEGREE = 2


def _sample_weights(rng, size):
    """Magnitudes uniform in [0.5, 2], sign flipped with probability 1/2."""
    mag = rng.uniform(0.5, 2.0, size=size)
    sign = rng.choice([-1.0, 1.0], size=size)
    return mag * sign


def gen_random_expression(hidden_layers=2, seed=0, n_in=4):
    """A random sparse expression shaped like the learning network.

    Each preactivation keeps exactly two nonzero input weights plus a bias;
    weights into sin/cos units are additionally scaled by pi so the units
    leave their linear regime. Constant (degenerate) expressions are
    resampled with the next seed.
    """
    if hidden_layers not in (2, 3):
        raise ValueError("hidden_layers must be 2 or 3")
    rng = np.random.default_rng(seed)
    u, v = _RE_U, _RE_V
    u3 = u // 3
    exprs = [Var(i) for i in range(n_in)]
    for _ in range(hidden_layers):
        width = len(exprs)
        zs = []
        for row in range(u + 2 * v):
            cols = rng.choice(width, size=min(_RE_IN_DEGREE, width), replace=False)
            ws = _sample_weights(rng, len(cols))
            if u3 <= row < u:  # feeds a sin or cos unit
                ws = ws * PI
            bias = float(_sample_weights(rng, 1)[0])
            terms = tuple(Prod((Const(float(w)), exprs[c]))
                          for w, c in zip(ws, cols)) + (Const(bias),)
            zs.append(Sum(terms))
        ys = list(zs[:u3])
        ys += [Sin(z) for z in zs[u3:2 * u3]]
        ys += [Cos(z) for z in zs[2 * u3:u]]
        ys += [Prod((zs[u + 2 * j], zs[u + 2 * j + 1])) for j in range(v)]
        exprs = ys
    cols = rng.choice(len(exprs), size=2, replace=False)
    ws = _sample_weights(rng, 2)
    bias = float(_sample_weights(rng, 1)[0])
    out = Sum(tuple(Prod((Const(float(w)), exprs[c]))
                    for w, c in zip(ws, cols)) + (Const(bias),))
    out = ex.simplify(out)

    probe = np.random.default_rng(12345).uniform(-1, 1, size=(1000, n_in))
    if float(np.var(ex.evaluate(out, probe))) < 1e-6:
        return gen_random_expression(hidden_layers, seed + 1, n_in)
    return out


def gen_re_task(name, n_train=10000, sigma=0.01, seed=0) -> Dataset:
    """Dataset for a named random-expression task, e.g. 'RE3-2'."""
    if name not in RE_NAMES:
        raise ValueError(f"unknown RE task {name!r} (expected one of {RE_NAMES})")
    hidden = int(name[2])
    instance = int(name[4])
    expr_seed = int(np.random.SeedSequence([seed, hidden, instance])
                    .generate_state(1)[0])
    expr = gen_random_expression(hidden, expr_seed)
    return sample_from_expr(expr, _cube(4, 1.0), _cube(4, 2.0),
                            n_train=n_train, sigma=sigma, seed=seed, name=name)


def generate(task, n_train=10000, sigma=0.01, seed=0) -> Dataset:
    """Dispatch on a task name: division, F1..F4, RE2-1..RE3-4, cartpend."""
    if task == "division":
        return gen_division_task(n_train, sigma, seed)
    if task in ("F1", "F2", "F3", "F4"):
        return gen_formula(task, n_train, sigma, seed)
    if task in RE_NAMES:
        return gen_re_task(task, n_train, sigma, seed)
    if task == "cartpend":
        return gen_cartpend(n_train, sigma, seed)
    raise ValueError(f"unknown task {task!r}")


TASK_NAMES = ["division", "F1", "F2", "F3", "F4", *RE_NAMES, "cartpend"]


def const_zero_rms(Y) -> float:
    """Per-component RMS of the all-zero predictor on a target array."""
    Y = np.asarray(Y, dtype=np.float64)
    return float(np.sqrt(np.mean(Y ** 2)))


# -- persistence --------------------------------------------------------------

_SPLITS = {
    "train": ("x_train", "y_train"),
    "validation": ("x_val", "y_val"),
    "interpolation_test": ("x_test", "y_test"),
    "extrapolation_test": ("x_extra", "y_extra"),
    "extrapolation_validation": ("x_extra_val", "y_extra_val"),
}


def save_dataset(ds: Dataset, directory):
    os.makedirs(directory, exist_ok=True)
    n, m = ds.n_in, ds.n_out
    header = [f"x{i + 1}" for i in range(n)] + [f"y{j + 1}" for j in range(m)]
    for split, (xf, yf) in _SPLITS.items():
        X = getattr(ds, xf)
        Y = getattr(ds, yf)
        if X is None:
            continue
        with open(os.path.join(directory, f"{split}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for xi, yi in zip(X, Y):
                w.writerow([repr(float(v)) for v in xi] +
                           [repr(float(v)) for v in yi])
    manifest = {
        "name": ds.name,
        "n_in": n,
        "n_out": m,
        "sigma": ds.sigma,
        "seed": ds.seed,
        "train_bounds": ds.train_bounds.tolist(),
        "extra_bounds": ds.extra_bounds.tolist(),
        "expressions": [ex.render(e) for e in ds.exprs],
        "expression_trees": [json.loads(ex.to_json(e)) for e in ds.exprs],
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_dataset(directory) -> Dataset:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    n = manifest["n_in"]

    def read(split):
        path = os.path.join(directory, f"{split}.csv")
        if not os.path.exists(path):
            return None, None
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        if data.size == 0:
            return None, None
        return data[:, :n], data[:, n:]

    arrays = {}
    for split, (xf, yf) in _SPLITS.items():
        X, Y = read(split)
        arrays[xf] = X
        arrays[yf] = Y
    exprs = [ex._from_obj(obj) for obj in manifest["expression_trees"]]
    return Dataset(
        name=manifest["name"], exprs=exprs,
        train_bounds=np.array(manifest["train_bounds"]),
        extra_bounds=np.array(manifest["extra_bounds"]),
        sigma=manifest["sigma"], seed=manifest["seed"], **arrays,
    )
