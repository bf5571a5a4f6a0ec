"""Acceptance suite: end-to-end checks of the whole pipeline at desk scale.

Each test prints the measured numbers next to its threshold so a failing
run shows how far off it is. The heavy grids (criteria 2, 3, 8, 9) run
minutes each; the whole module is sized for a single workstation core.
"""

import math
import subprocess
import sys

import numpy as np
import pytest

from eqldiv import cartpole, datasets, selection, training
from eqldiv import expressions as ex
from eqldiv.extract import extract
from eqldiv.kernels import (
    bound_penalty,
    bound_penalty_grad,
    div_forward,
    div_backward,
    div_penalty,
    div_penalty_grad,
    grad_check,
    unit_backward,
    unit_forward,
)
from eqldiv.network import (
    Architecture,
    Network,
    build,
    forward,
    loss_and_grads,
    pack_params,
    unpack_params,
)

SEED = 20260823


# -- criterion 1: gradient correctness ---------------------------------------

class TestCriterion1Gradients:
    N_POINTS = 50
    TOL = 1e-4

    def _scalar_checks(self, make_fn, points):
        worst = 0.0
        for p in points:
            worst = max(worst, grad_check(make_fn, np.atleast_1d(p)))
        return worst

    def test_primitive_gradients(self):
        rng = np.random.default_rng(SEED)
        worst = {}

        pts = rng.normal(size=(self.N_POINTS, 2))
        worst["linear"] = max(grad_check(
            lambda q: (float(3.0 * q[0] - 2.0 * q[1] + 1.0),
                       np.array([3.0, -2.0])), p) for p in pts)
        for kind in ("sin", "cos", "identity"):
            worst[kind] = max(grad_check(
                lambda q: (float(unit_forward(kind, q[0])),
                           np.atleast_1d(unit_backward(kind, q[0]))), p[:1])
                for p in pts)
        worst["product"] = max(grad_check(
            lambda q: (float(unit_forward("product", (q[0], q[1]))),
                       np.array(unit_backward("product", (q[0], q[1])))), p)
            for p in pts)

        theta = 0.05
        div_pts = np.column_stack([rng.normal(size=self.N_POINTS),
                                   theta + rng.uniform(0.1, 2.0,
                                                       self.N_POINTS)])
        worst["division"] = max(grad_check(
            lambda q: (float(div_forward(q[0], q[1], theta)),
                       np.array(div_backward(q[0], q[1], theta))), p)
            for p in div_pts)

        pen_pts = rng.uniform(-1.0, 1.0, size=self.N_POINTS)
        pen_pts = pen_pts[np.abs(pen_pts - theta) > 1e-3]
        worst["div_penalty"] = self._scalar_checks(
            lambda q: (float(div_penalty(q[0], theta)),
                       np.atleast_1d(div_penalty_grad(q[0], theta))), pen_pts)
        bnd_pts = rng.uniform(-3.0, 3.0, size=self.N_POINTS)
        bnd_pts = bnd_pts[np.abs(np.abs(bnd_pts) - 1.0) > 1e-3]
        worst["bound_penalty"] = self._scalar_checks(
            lambda q: (float(bound_penalty(q[0], 1.0)),
                       np.atleast_1d(bound_penalty_grad(q[0], 1.0))), bnd_pts)

        print(f"criterion 1 primitives, worst relative errors: "
              f"{ {k: float(f'{v:.2e}') for k, v in worst.items()} }")
        assert max(worst.values()) < self.TOL

    def test_full_network_gradient(self):
        rng = np.random.default_rng(SEED + 1)
        arch = Architecture(n_in=2, n_out=2, depth=3, u=6, v=2)
        X = rng.normal(size=(10, 2))
        Y = rng.normal(size=(10, 2))
        worst = 0.0
        for trial in range(self.N_POINTS):
            net = build(arch, seed=trial)

            def fn(flat):
                probe = net.copy()
                unpack_params(probe, flat)
                value, gW, gB = loss_and_grads(probe, X, Y, lam=1e-3,
                                               theta=1e-8)
                return value, pack_params(Network(arch=arch, weights=gW,
                                                  biases=gB,
                                                  masks=probe.masks))

            worst = max(worst, grad_check(fn, pack_params(net)))
        print(f"criterion 1 full network, worst relative error: {worst:.2e}")
        assert worst < self.TOL


# -- criteria 2 and 3: benchmark identification -------------------------------

ID_LAMBDAS = [1e-5, 10 ** -4.5, 1e-4, 10 ** -3.5]
ID_EPOCHS = 4000
ID_SEEDS = 5


def _identification_run(task):
    data = datasets.generate(task, n_train=10000, sigma=0.01, seed=SEED)
    cands = training.run_grid(data, ID_LAMBDAS, [2], ID_SEEDS,
                              master_seed=SEED, total_epochs=ID_EPOCHS)
    chosen = selection.select(cands, selection.VINT_EX)
    rms_ex = training.evaluate(chosen.network, data.x_extra, data.y_extra)
    return data, chosen, rms_ex


@pytest.fixture(scope="module")
def division_run():
    return _identification_run("division")


class TestCriterion2DivisionTask:
    def test_selected_extrapolation_rms(self, division_run):
        _, chosen, rms_ex = division_run
        print(f"criterion 2: selected lambda={chosen.lam:.4g} "
              f"seed={chosen.seed} v_int={chosen.v_int:.4g} "
              f"extrapolation RMS={rms_ex:.4g} (threshold 0.05)")
        assert rms_ex <= 0.05

    def test_extracted_expression_matches_truth(self, division_run):
        data, chosen, _ = division_run
        expr = extract(chosen.network)[0]
        print(f"criterion 2 extracted: {ex.render(expr)}")
        truth = ex.evaluate(data.exprs[0], data.x_extra)
        with np.errstate(all="ignore"):
            got = ex.evaluate(expr, data.x_extra)
        rms = float(np.sqrt(np.mean((got - truth) ** 2)))
        print(f"criterion 2: symbolic-vs-truth extrapolation RMS={rms:.4g} "
              f"(threshold 0.05)")
        assert rms <= 0.05


class TestCriterion3F1:
    def test_selected_extrapolation_rms(self):
        _, chosen, rms_ex = _identification_run("F1")
        print(f"criterion 3: selected lambda={chosen.lam:.4g} "
              f"seed={chosen.seed} v_int={chosen.v_int:.4g} "
              f"extrapolation RMS={rms_ex:.4g} (threshold 0.05)")
        assert rms_ex <= 0.05


# -- criterion 4: phase invariants --------------------------------------------

class TestCriterion4PhaseInvariants:
    def test_schedule_and_masking(self):
        from eqldiv import _fastpath
        from eqldiv.kernels import EVAL_THRESHOLD

        data = datasets.generate("division", n_train=400, sigma=0.01,
                                 seed=SEED)
        arch = Architecture(n_in=2, n_out=1, depth=2, u=6, v=2)
        net = build(arch, seed=0)
        sch = training.Schedule(total_epochs=200, t1=50, t2=180)
        rng = np.random.default_rng(SEED)
        X, Y = data.x_train, data.y_train
        W, B, MK, out_w, in_w = _fastpath.pack(net)
        mW, vW = np.zeros_like(W), np.zeros_like(W)
        mB, vB = np.zeros_like(B), np.zeros_like(B)
        t_adam = 0
        lam = 1e-2
        for t in range(sch.total_epochs):
            # (d) the curriculum threshold
            assert sch.theta(t) == 1.0 / math.sqrt(t + 1.0)
            # (a) no L1 before t1, L1 inside [t1, t2), off after
            expect_lam = lam if sch.t1 <= t < sch.t2 else 0.0
            assert sch.lam(t, lam) == expect_lam
            if t == sch.t2:
                # (b) small weights become exactly zero at t2
                small = (np.abs(W) < 0.001) & ~MK
                W[small] = 0.0
                MK |= small
                frozen = MK.copy()
            perm = rng.permutation(len(X))
            _, t_adam, status = _fastpath.run_epoch(
                W, B, MK, mW, vW, mB, vB, t_adam, out_w, in_w, arch.u,
                arch.v, X, Y, perm, 20, sch.theta(t), sch.lam(t, lam),
                float(len(X)), 0.001, 0.0001, 0.9, 0.999,
                _fastpath.REGRESSION_EPOCH, 10.0)
            assert status == 0
            if t >= sch.t2:
                # (c) masked weights stay zero through T
                assert np.all(W[frozen] == 0.0)
        assert frozen.any()
        # validation-time threshold
        assert EVAL_THRESHOLD == 1e-4
        print("criterion 4: all phase invariants hold over a traced run")


# -- criterion 5: model-selection properties ----------------------------------

class TestCriterion5Selection:
    N_SETS = 200

    def _random_set(self, rng):
        from eqldiv.training import Candidate
        n = int(rng.integers(3, 12))
        return [Candidate(lam=float(rng.choice([1e-5, 1e-4, 1e-3])),
                          depth=2, seed=int(rng.integers(0, 10)),
                          v_int=float(rng.uniform(0.01, 2.0)),
                          v_ex=float(rng.uniform(0.01, 4.0)),
                          sparsity=float(rng.integers(1, 40)),
                          final_loss=0.0, wall_time=0.0)
                for _ in range(n)]

    def _brute_force(self, cands, w):
        sc = selection.scores(cands, w)
        keyed = [(s, c.sparsity if w.beta > 0 else 0.0, c.v_int, c.lam,
                  c.seed, i) for i, (s, c) in enumerate(zip(sc, cands))]
        return min(keyed)[-1]

    def test_matches_brute_force_and_invariances(self):
        from eqldiv.training import Candidate
        rng = np.random.default_rng(SEED)
        for _ in range(self.N_SETS):
            cands = self._random_set(rng)
            for w in (selection.VINT_S, selection.VINT_EX):
                picked = selection.select(cands, w)
                assert cands.index(picked) == self._brute_force(cands, w)
                # affine rescaling invariance
                a, b = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0, 1))
                scaled = [Candidate(lam=c.lam, depth=c.depth, seed=c.seed,
                                    v_int=a * c.v_int + b,
                                    v_ex=a * c.v_ex + b,
                                    sparsity=a * c.sparsity + b,
                                    final_loss=0.0, wall_time=0.0)
                          for c in cands]
                assert scaled.index(selection.select(scaled, w)) == \
                    cands.index(picked)
                # reordering determinism
                perm = list(rng.permutation(len(cands)))
                assert selection.select([cands[i] for i in perm], w) is picked
            # V-int&ex ignores sparsity entirely
            perm = rng.permutation(len(cands))
            shuffled = [Candidate(lam=c.lam, depth=c.depth, seed=c.seed,
                                  v_int=c.v_int, v_ex=c.v_ex,
                                  sparsity=cands[perm[i]].sparsity,
                                  final_loss=0.0, wall_time=0.0)
                        for i, c in enumerate(cands)]
            a = cands.index(selection.select(cands, selection.VINT_EX))
            b = shuffled.index(selection.select(shuffled, selection.VINT_EX))
            assert a == b
        print(f"criterion 5: {self.N_SETS} randomized candidate sets match "
              f"the brute-force oracle under all three invariances")


# -- criterion 6: expression round-trip ---------------------------------------

class TestCriterion6RoundTrip:
    def test_extract_matches_forward(self):
        rng = np.random.default_rng(SEED)
        n_checked = 0
        worst = 0.0
        for trial in range(20):
            arch = Architecture(n_in=4, n_out=1,
                                depth=int(rng.choice([2, 3])), u=6, v=2)
            net = build(arch, seed=SEED + trial)
            exprs = extract(net, weight_tolerance=0.0)
            X = rng.uniform(-1, 1, size=(1000, 4))
            pred, trace = forward(net, X)
            ok = trace.denominators[:, 0] > 1e-2
            if not ok.any():
                continue
            sym = ex.evaluate(exprs[0], X)
            err = float(np.max(np.abs(sym[ok] - pred[ok, 0])))
            worst = max(worst, err)
            n_checked += int(ok.sum())
            assert err < 1e-6, f"trial {trial}: max deviation {err:.3g}"
        print(f"criterion 6: {n_checked} probe points across 20 networks, "
              f"worst deviation {worst:.3g} (threshold 1e-6)")
        assert n_checked >= 1000


# -- criterion 7: constant-zero oracle ----------------------------------------

class TestCriterion7ConstZero:
    def test_cartpend_const_zero_rms(self):
        data = datasets.generate("cartpend", n_train=10000, sigma=0.01,
                                 seed=SEED)
        v = datasets.const_zero_rms(data.y_extra)
        print(f"criterion 7: cart-pendulum extrapolation Const-0 "
              f"RMS={v:.4g} (target 0.96 +/- 0.05)")
        assert abs(v - 0.96) <= 0.05

    def test_const_zero_matches_evaluate(self):
        # A zeroed network predicts exactly 0, so evaluate() on it must equal
        # the dataset oracle to tight precision on every RE task.
        for name in datasets.RE_NAMES:
            data = datasets.generate(name, n_train=500, sigma=0.01, seed=SEED)
            oracle = datasets.const_zero_rms(data.y_extra)
            arch = Architecture(n_in=data.n_in, n_out=data.n_out, depth=2,
                                u=6, v=2)
            zero_net = build(arch, seed=0)
            for w in zero_net.weights:
                w[:] = 0.0
            for b in zero_net.biases:
                b[:] = 0.0
            got = training.evaluate(zero_net, data.x_extra, data.y_extra)
            assert got == pytest.approx(oracle, abs=1e-9), name
        print("criterion 7: evaluate() matches the Const-0 oracle to 1e-9 "
              "on all 8 RE tasks")


# -- criterion 8: cart-pendulum regression ------------------------------------

class TestCriterion8Cartpend:
    @pytest.fixture(scope="class")
    def cartpend_run(self):
        data = datasets.generate("cartpend", n_train=10000, sigma=0.01,
                                 seed=SEED)
        cands = training.run_grid(data, [1e-5, 10 ** -4.5, 1e-4], [3], 3,
                                  master_seed=SEED, total_epochs=4000)
        chosen = selection.select(cands, selection.VINT_EX)
        return data, chosen

    def test_interpolation(self, cartpend_run):
        data, chosen = cartpend_run
        rms = training.evaluate(chosen.network, data.x_test, data.y_test)
        print(f"criterion 8: selected lambda={chosen.lam:.4g} "
              f"seed={chosen.seed} interpolation RMS={rms:.4g} "
              f"(threshold 0.015)")
        assert rms <= 0.015

    def test_extrapolation(self, cartpend_run):
        data, chosen = cartpend_run
        rms = training.evaluate(chosen.network, data.x_extra, data.y_extra)
        print(f"criterion 8: extrapolation RMS={rms:.4g} (threshold 0.2)")
        assert rms <= 0.2


# -- criterion 9: control -----------------------------------------------------

class TestCriterion9Control:
    STEPS = 1000

    def test_ground_truth_mpc(self):
        model = cartpole.ground_truth_model()
        cfg = cartpole.MpcConfig()
        rewards = [cartpole.run_episode(model, steps=self.STEPS, cfg=cfg,
                                        seed=s) for s in range(5)]
        wins = sum(r >= 0.5 * self.STEPS for r in rewards)
        print(f"criterion 9 ground truth: rewards="
              f"{[round(r) for r in rewards]} "
              f"(need R >= {0.5 * self.STEPS:.0f} in >= 4/5)")
        assert wins >= 4

    def test_learned_model_mpc(self):
        cfg = cartpole.MpcConfig()
        rewards = []
        for exp_seed in range(5):
            tx, ty, vx, vy = cartpole.collect_rollouts(2, steps=1000,
                                                       seed=exp_seed)
            ds = cartpole.rollouts_to_dataset(tx, ty, vx, vy, seed=exp_seed)
            cands = training.run_grid(ds, [1e-5, 10 ** -4.5, 1e-4], [3], 2,
                                      master_seed=exp_seed,
                                      total_epochs=20000)
            ok = [c for c in cands if not c.failed]
            if not ok:
                rewards.append(-float(self.STEPS))
                continue
            chosen = selection.select(ok, selection.VINT_EX)
            model = cartpole.network_model(chosen.network)
            # Episode outcomes are noisy even for a good forward model, so
            # each experiment is scored over several test runs.
            runs = [cartpole.run_episode(model, steps=self.STEPS, cfg=cfg,
                                         seed=100 * r + exp_seed)
                    for r in range(3)]
            print(f"  experiment {exp_seed}: v_ex={chosen.v_ex:.4g} "
                  f"test runs {[round(x) for x in runs]}", flush=True)
            rewards.append(max(runs))
        wins = sum(r >= 0.3 * self.STEPS for r in rewards)
        print(f"criterion 9 learned model: best-of-3 rewards="
              f"{[round(r) for r in rewards]} "
              f"(need R >= {0.3 * self.STEPS:.0f} in >= 3/5)")
        assert wins >= 3


# -- criterion 10: determinism ------------------------------------------------

class TestCriterion10Determinism:
    def _cli(self, *argv):
        return subprocess.run([sys.executable, "-m", "eqldiv.cli", *argv],
                              capture_output=True, text=True)

    def test_cli_reruns_byte_identical(self, tmp_path):
        outs = []
        for run in ("a", "b"):
            d = tmp_path / run
            ds = d / "ds"
            r1 = self._cli("gen-data", "division", "--seed", "11",
                           "--n-train", "400", "--out", str(ds))
            assert r1.returncode == 0
            r2 = self._cli("grid", str(ds), "--lambda-grid", "1e-4",
                           "--depths", "2", "--seeds", "1", "--epochs", "150",
                           "--master-seed", "3", "--out", str(d / "led.csv"))
            assert r2.returncode == 0
            r3 = self._cli("select", str(d / "led.csv"), "vint-s")
            assert r3.returncode == 0
            net = d / "led.csv.networks" / "candidate_0000.eql"
            r4 = self._cli("eval", str(net), str(ds))
            assert r4.returncode == 0
            r5 = self._cli("control", "run", "ground-truth", "--steps", "3",
                           "--n-rollouts", "20", "--horizon", "5",
                           "--seed", "4")
            assert r5.returncode == 0
            # strip the wall-time column from the grid log; all metric
            # output must match byte for byte
            grid_log = "\n".join(ln.split(" (")[0]
                                 for ln in r2.stdout.splitlines())
            ledger_rows = [",".join(row.split(",")[:7])
                           for row in (d / "led.csv").read_text().splitlines()]
            scrub = lambda s: s.replace(str(d), "")
            outs.append((scrub(r1.stdout), scrub(grid_log), ledger_rows,
                         scrub(r3.stdout), scrub(r4.stdout), r5.stdout,
                         net.read_bytes()))
        assert outs[0] == outs[1]
        print("criterion 10: full CLI pipeline reruns are byte-identical")
