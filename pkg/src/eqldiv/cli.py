"""Command-line pipeline: dataset generation, grid training, model
selection, expression extraction, evaluation, and cart-pole control.

All randomness flows from named --seed flags, so any command rerun with
identical arguments reproduces its outputs byte for byte. Exit codes:
0 success, 2 usage error, 3 missing/corrupt file, 4 bad configuration,
5 runtime failure.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import cartpole, datasets, selection, training
from . import expressions as ex
from .extract import extract
from .network import NetworkFormatError, forward, load_network, save_network
from .training import LedgerError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_CONFIG = 4
EXIT_RUNTIME = 5


class ConfigError(ValueError):
    pass


def _out_dir(path):
    base = os.environ.get("EQLDIV_OUTPUT_DIR", "")
    return os.path.join(base, path) if base else path


_CONFIG_KEYS = {
    "epochs": int, "seeds": int, "master_seed": int, "batch_size": int,
    "lambda_grid": str, "depths": str, "alpha": float, "beta": float,
    "gamma": float, "sigma": float, "n_train": int, "bound": float,
    "horizon": int, "n_rollouts": int, "action_sigma": float,
}


def load_config(path):
    """Flat key=value file; unknown keys are rejected by name."""
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{ln}: unknown config key {key!r}")
            try:
                out[key] = _CONFIG_KEYS[key](value.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{ln}: bad value for {key!r}: {exc}")
    return out


def _parse_floats(text):
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_ints(text):
    return [int(tok) for tok in text.replace(",", " ").split()]


# -- subcommands --------------------------------------------------------------

def cmd_gen_data(args):
    if args.task not in datasets.TASK_NAMES:
        print(f"unknown task {args.task!r}; choose from {datasets.TASK_NAMES}",
              file=sys.stderr)
        return EXIT_USAGE
    ds = datasets.generate(args.task, n_train=args.n_train, sigma=args.sigma,
                           seed=args.seed)
    out = _out_dir(args.out or f"data/{args.task}")
    datasets.save_dataset(ds, out)
    print(f"wrote dataset {args.task!r} to {out}")
    for e in ds.exprs:
        print(f"  expression: {ex.render(e)}")
    return EXIT_OK


def cmd_grid(args):
    cfg = load_config(args.config) if args.config else {}
    ds = datasets.load_dataset(args.dataset)
    lambdas = (_parse_floats(args.lambda_grid) if args.lambda_grid
               else _parse_floats(cfg["lambda_grid"]) if "lambda_grid" in cfg
               else training.default_lambda_grid())
    depths = (_parse_ints(args.depths) if args.depths
              else _parse_ints(cfg["depths"]) if "depths" in cfg else [2, 3, 4])
    seeds = args.seeds if args.seeds is not None else cfg.get("seeds", 10)
    epochs = args.epochs if args.epochs is not None else cfg.get("epochs")
    master = (args.master_seed if args.master_seed is not None
              else cfg.get("master_seed", 0))
    bound = cfg.get("bound")
    done = []

    def progress(c):
        done.append(c)
        status = "FAILED" if c.failed else f"v_int={c.v_int:.4g}"
        print(f"[{len(done)}] lambda={c.lam:.4g} L={c.depth} seed={c.seed} "
              f"{status} s={c.sparsity:.0f} ({c.wall_time:.1f}s)", flush=True)

    candidates = training.run_grid(ds, lambdas, depths, seeds,
                                   master_seed=master, total_epochs=epochs,
                                   bound=bound, progress=progress)
    ledger = _out_dir(args.out)
    os.makedirs(os.path.dirname(ledger) or ".", exist_ok=True)
    networks_dir = args.networks_dir or ledger + ".networks"
    training.write_ledger(candidates, ledger, networks_dir=networks_dir)
    print(f"wrote {len(candidates)} candidates to {ledger}")
    return EXIT_OK


_MODES = {
    "vint-s": selection.VINT_S,
    "vint-ex": selection.VINT_EX,
}


def cmd_select(args):
    candidates = training.read_ledger(args.ledger)
    if not candidates:
        print("ledger is empty", file=sys.stderr)
        return EXIT_USAGE
    preset = _MODES[args.mode]
    alpha = preset.alpha if args.alpha is None else args.alpha
    beta = preset.beta if args.beta is None else args.beta
    gamma = preset.gamma if args.gamma is None else args.gamma
    weights = selection.SelectionWeights(alpha=alpha, beta=beta, gamma=gamma)
    if weights.gamma > 0 and any(c.v_ex is None for c in candidates):
        print("vint-ex selection needs the v_ex column populated",
              file=sys.stderr)
        return EXIT_USAGE
    chosen = selection.select(candidates, weights)
    if args.report:
        selection.write_report(candidates, weights, chosen, _out_dir(args.report))
    print(f"selected: lambda={chosen.lam:.4g} L={chosen.depth} "
          f"seed={chosen.seed} v_int={chosen.v_int:.4g} "
          f"v_ex={'-' if chosen.v_ex is None else format(chosen.v_ex, '.4g')} "
          f"s={chosen.sparsity:.0f}")
    if chosen.path:
        print(f"network: {chosen.path}")
    return EXIT_OK


def cmd_extract(args):
    net = load_network(args.network)
    exprs = extract(net, weight_tolerance=args.tolerance)
    for i, e in enumerate(exprs):
        print(f"y{i + 1} = {ex.render(e)}" if len(exprs) > 1 else ex.render(e))
    if args.json:
        import json as _json
        trees = [_json.loads(ex.to_json(e)) for e in exprs]
        with open(_out_dir(args.json), "w") as fh:
            _json.dump(trees[0] if len(trees) == 1 else trees, fh, indent=1)
    return EXIT_OK


def _write_slice(path, ds, net):
    """Gnuplot-style data: output along the diagonal x1=...=xn=x."""
    span = 2.0 * float(np.max(np.abs(ds.extra_bounds)))
    xs = np.linspace(-span, span, 401)
    X = np.tile(xs[:, None], (1, ds.n_in))
    with np.errstate(all="ignore"):
        pred, _ = forward(net, X, check=False)
    with open(path, "w") as fh:
        fh.write("# x " + " ".join(f"y{j+1}_true y{j+1}_pred"
                                   for j in range(ds.n_out)) + "\n")
        truth = []
        for e in ds.exprs:
            try:
                truth.append(ex.evaluate(e, X))
            except ex.ExpressionError:
                truth.append(np.full(len(xs), np.nan))
        for i, x in enumerate(xs):
            cols = [f"{x:.6g}"]
            for j in range(ds.n_out):
                cols.append(f"{truth[j][i]:.6g}")
                cols.append(f"{pred[i, j]:.6g}")
            fh.write(" ".join(cols) + "\n")


def cmd_eval(args):
    net = load_network(args.network)
    ds = datasets.load_dataset(args.dataset)
    rms_int = training.evaluate(net, ds.x_test, ds.y_test)
    rms_ex = training.evaluate(net, ds.x_extra, ds.y_extra)
    print(f"interpolation RMS: {rms_int:.6g}")
    print(f"extrapolation RMS: {rms_ex:.6g}")
    if args.plot_file:
        _write_slice(_out_dir(args.plot_file), ds, net)
    return EXIT_OK


def cmd_control_collect(args):
    tx, ty, vx, vy = cartpole.collect_rollouts(args.rollouts, steps=args.steps,
                                               seed=args.seed)
    out = _out_dir(args.out)
    os.makedirs(out, exist_ok=True)
    header = [f"s{i+1}" for i in range(4)] + ["a"] + [f"sd{i+1}" for i in range(4)]
    for name, X, Y in [("train_transitions", tx, ty),
                       ("validation_transitions", vx, vy)]:
        with open(os.path.join(out, f"{name}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for xi, yi in zip(X, Y):
                w.writerow([repr(float(v)) for v in xi] +
                           [repr(float(v)) for v in yi])
    print(f"wrote {len(tx)} training and {len(vx)} validation transitions to {out}")
    return EXIT_OK


def _read_transitions(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return data[:, :5], data[:, 5:]


def cmd_control_train(args):
    cfg = load_config(args.config) if args.config else {}
    tx, ty = _read_transitions(os.path.join(args.data, "train_transitions.csv"))
    vx, vy = _read_transitions(os.path.join(args.data,
                                            "validation_transitions.csv"))
    ds = cartpole.rollouts_to_dataset(tx, ty, vx, vy, seed=args.seed)
    lambdas = (_parse_floats(args.lambda_grid) if args.lambda_grid
               else [1e-5, 10 ** -4.5, 1e-4])
    epochs = args.epochs if args.epochs is not None else cfg.get("epochs", 4000)
    candidates = training.run_grid(ds, lambdas, [args.depth],
                                   args.seeds, master_seed=args.seed,
                                   total_epochs=epochs)
    chosen = selection.select([c for c in candidates], selection.VINT_EX)
    if chosen.network is None:
        print("all candidates diverged", file=sys.stderr)
        return EXIT_RUNTIME
    save_network(chosen.network, _out_dir(args.out))
    print(f"forward model: lambda={chosen.lam:.4g} v_int={chosen.v_int:.4g} "
          f"v_ex={chosen.v_ex:.4g} -> {args.out}")
    return EXIT_OK


def cmd_control_run(args):
    if args.model == "ground-truth":
        model = cartpole.ground_truth_model()
    else:
        model = cartpole.network_model(load_network(args.model))
    cfg = cartpole.MpcConfig(horizon=args.horizon,
                             n_rollouts=args.n_rollouts,
                             action_sigma=args.action_sigma)
    rows = []

    def log(t, state, action, cost, reward):
        rows.append([t, *state, action, cost, reward])

    reward = cartpole.run_episode(model, steps=args.steps, cfg=cfg,
                                  seed=args.seed,
                                  state_noise=args.state_noise,
                                  action_noise=args.action_noise,
                                  log=log if args.log else None)
    if args.log:
        with open(_out_dir(args.log), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "x_dot", "theta", "theta_dot", "action",
                        "cost", "reward_so_far"])
            w.writerows(rows)
    print(f"R = {reward:.3f} over {args.steps} steps")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="eqldiv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a benchmark dataset")
    g.add_argument("task")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sigma", type=float, default=0.01)
    g.add_argument("--n-train", type=int, default=10000)
    g.add_argument("--out", default=None)
    g.set_defaults(fn=cmd_gen_data)

    g = sub.add_parser("grid", help="train a hyperparameter grid")
    g.add_argument("dataset")
    g.add_argument("--lambda-grid", default=None)
    g.add_argument("--depths", default=None)
    g.add_argument("--seeds", type=int, default=None)
    g.add_argument("--epochs", type=int, default=None)
    g.add_argument("--master-seed", type=int, default=None)
    g.add_argument("--config", default=None)
    g.add_argument("--out", default="ledger.csv")
    g.add_argument("--networks-dir", default=None)
    g.set_defaults(fn=cmd_grid)

    g = sub.add_parser("select", help="pick the best candidate from a ledger")
    g.add_argument("ledger")
    g.add_argument("mode", choices=sorted(_MODES))
    g.add_argument("--alpha", type=float, default=None)
    g.add_argument("--beta", type=float, default=None)
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument("--report", default=None)
    g.set_defaults(fn=cmd_select)

    g = sub.add_parser("extract", help="render a network as an equation")
    g.add_argument("network")
    g.add_argument("--tolerance", type=float, default=1e-3)
    g.add_argument("--json", default=None)
    g.set_defaults(fn=cmd_extract)

    g = sub.add_parser("eval", help="evaluate a network on a dataset")
    g.add_argument("network")
    g.add_argument("dataset")
    g.add_argument("--plot-file", default=None)
    g.set_defaults(fn=cmd_eval)

    g = sub.add_parser("control", help="cart-pole swing-up pipeline")
    csub = g.add_subparsers(dest="subcommand", required=True)

    c = csub.add_parser("collect", help="record random rollouts")
    c.add_argument("--out", default="control-data")
    c.add_argument("--rollouts", type=int, default=2)
    c.add_argument("--steps", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(fn=cmd_control_collect)

    c = csub.add_parser("train", help="fit a forward model to rollouts")
    c.add_argument("data")
    c.add_argument("--out", default="model.eql")
    c.add_argument("--lambda-grid", default=None)
    c.add_argument("--depth", type=int, default=3)
    c.add_argument("--seeds", type=int, default=3)
    c.add_argument("--epochs", type=int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--config", default=None)
    c.set_defaults(fn=cmd_control_train)

    c = csub.add_parser("run", help="run MPC with a forward model")
    c.add_argument("model", help="network file or 'ground-truth'")
    c.add_argument("--steps", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--horizon", type=int, default=60)
    c.add_argument("--n-rollouts", type=int, default=1000)
    c.add_argument("--action-sigma", type=float, default=1.0)
    c.add_argument("--state-noise", type=float, default=0.0)
    c.add_argument("--action-noise", type=float, default=0.0)
    c.add_argument("--log", default=None)
    c.set_defaults(fn=cmd_control_run)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (NetworkFormatError, LedgerError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
