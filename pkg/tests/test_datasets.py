import math

import numpy as np
import pytest

from eqldiv import datasets
from eqldiv.datasets import (
    TASK_NAMES,
    Dataset,
    const_zero_rms,
    division_expr,
    formula_expr,
    gen_random_expression,
    generate,
    load_dataset,
    save_dataset,
)
from eqldiv.expressions import evaluate, render, variables


class TestSampling:
    def test_split_sizes(self):
        ds = generate("division", n_train=1000, seed=0)
        assert len(ds.x_train) == 900
        assert len(ds.x_val) == 100
        assert len(ds.x_extra_val) == 40
        assert len(ds.x_test) > 0 and len(ds.x_extra) > 0

    def test_train_points_inside_cube(self):
        ds = generate("division", n_train=500, seed=1)
        assert np.all(ds.x_train >= -1.0) and np.all(ds.x_train <= 1.0)

    def test_extrapolation_points_outside_training_cube(self):
        ds = generate("division", n_train=500, seed=1)
        outside = np.any(np.abs(ds.x_extra) > 1.0, axis=1)
        assert outside.all()
        assert np.all(np.abs(ds.x_extra) <= 2.0)

    def test_noise_on_train_but_not_test(self):
        ds = generate("division", n_train=2000, sigma=0.05, seed=2)
        clean_train = evaluate(ds.exprs[0], ds.x_train)
        clean_test = evaluate(ds.exprs[0], ds.x_test)
        resid = ds.y_train[:, 0] - clean_train
        assert np.allclose(ds.y_test[:, 0], clean_test)
        assert resid.std() == pytest.approx(0.05, rel=0.15)
        assert abs(resid.mean()) < 0.01

    def test_sigma_zero_is_noiseless(self):
        ds = generate("division", n_train=500, sigma=0.0, seed=3)
        clean = evaluate(ds.exprs[0], ds.x_train)
        assert np.allclose(ds.y_train[:, 0], clean)

    def test_deterministic_under_seed(self):
        a = generate("F1", n_train=300, seed=9)
        b = generate("F1", n_train=300, seed=9)
        assert np.array_equal(a.x_train, b.x_train)
        assert np.array_equal(a.y_train, b.y_train)
        c = generate("F1", n_train=300, seed=10)
        assert not np.array_equal(a.x_train, c.x_train)


class TestTaskDefinitions:
    def test_division_expr(self):
        e = division_expr()
        assert render(e) == "sin(3.1416*x1)/(x2^2 + 1)"
        x = np.array([[0.25, 1.0]])
        assert evaluate(e, x)[0] == pytest.approx(math.sin(math.pi / 4) / 2,
                                                  abs=1e-4)

    @pytest.mark.parametrize("name,n_in,probe,value", [
        # Hand-computed oracle values at a fixed input point.
        ("F1", 4, [0.1, 0.2, 0.3, 0.4],
         (math.sin(math.pi * 0.1) + math.sin(2 * math.pi * 0.2 + math.pi / 8)
          + 0.2 - 0.3 * 0.4) / 3),
        ("F2", 4, [0.1, 0.2, 0.3, 0.4],
         (math.sin(math.pi * 0.1) + 0.2 * math.cos(2 * math.pi * 0.1 + math.pi / 4)
          + 0.3 - 0.4 ** 2) / 3),
        ("F3", 4, [0.1, 0.2, 0.3, 0.4],
         ((1 + 0.2) * math.sin(math.pi * 0.1) + 0.2 * 0.3 * 0.4) / 3),
    ])
    def test_formula_oracles(self, name, n_in, probe, value):
        expr = formula_expr(name)
        x = np.array([probe])
        assert evaluate(expr, x)[0] == pytest.approx(value, abs=1e-4)

    def test_f4_oracle(self):
        expr = formula_expr("F4")
        x = np.array([[0.5, 0.3, -0.2, 0.1]])
        got = evaluate(expr, x)[0]
        s = math.sin(math.pi * 0.5)
        expect = 0.5 * (s + math.cos(2 * 0.3 * s) + 0.3 * -0.2 * 0.1)
        assert got == pytest.approx(expect, abs=1e-4)

    def test_cartpend_outputs(self):
        ds = generate("cartpend", n_train=200, seed=0)
        assert ds.n_in == 4 and ds.n_out == 4
        # y1 = x3 and y2 = x4 exactly.
        assert np.allclose(ds.y_test[:, 0], ds.x_test[:, 2])
        assert np.allclose(ds.y_test[:, 1], ds.x_test[:, 3])
        # y3 matches the closed form at a probe point.
        x = np.array([[0.3, 0.7, -0.4, 0.2]])
        y3 = evaluate(ds.exprs[2], x)[0]
        x1, x2, x3, x4 = x[0]
        num = (-x1 - 0.01 * x3 + x4 ** 2 * math.sin(x2)
               + 0.1 * x4 * math.cos(x2)
               + 9.81 * math.sin(x2) * math.cos(x2))
        assert y3 == pytest.approx(num / (math.sin(x2) ** 2 + 1), abs=1e-3)

    def test_all_task_names_generate(self):
        for name in TASK_NAMES:
            ds = generate(name, n_train=100, seed=0)
            assert len(ds.x_train) == 90
            assert np.isfinite(ds.y_train).all()

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError, match="unknown task"):
            generate("F9")


class TestRandomExpressions:
    def test_uses_multiple_inputs(self):
        expr = gen_random_expression(hidden_layers=2, seed=0)
        assert len(variables(expr)) >= 2

    def test_deterministic(self):
        a = gen_random_expression(hidden_layers=2, seed=5)
        b = gen_random_expression(hidden_layers=2, seed=5)
        assert render(a) == render(b)

    def test_distinct_across_seeds(self):
        a = gen_random_expression(hidden_layers=2, seed=1)
        b = gen_random_expression(hidden_layers=2, seed=2)
        assert render(a) != render(b)

    def test_not_degenerate(self, rng):
        X = rng.uniform(-1, 1, size=(500, 4))
        for seed in range(8):
            for hidden in (2, 3):
                e = gen_random_expression(hidden_layers=hidden, seed=seed)
                with np.errstate(all="ignore"):
                    y = evaluate(e, X)
                y = y[np.isfinite(y)]
                assert y.var() > 1e-6

    def test_re_task_names(self):
        ds = generate("RE2-1", n_train=100, seed=0)
        assert ds.n_in == 4 and ds.n_out == 1


class TestConstZeroRms:
    def test_matches_definition(self, rng):
        Y = rng.normal(size=(100, 4))
        assert const_zero_rms(Y) == pytest.approx(
            float(np.sqrt(np.mean(Y ** 2))), abs=1e-12)

    def test_single_output(self):
        assert const_zero_rms(np.array([[3.0], [4.0]])) == pytest.approx(
            math.sqrt(12.5))


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        ds = generate("F2", n_train=200, sigma=0.02, seed=4)
        save_dataset(ds, tmp_path / "ds")
        back = load_dataset(tmp_path / "ds")
        assert back.name == ds.name
        assert back.sigma == ds.sigma and back.seed == ds.seed
        for split in ("x_train", "y_train", "x_val", "y_val", "x_test",
                      "y_test", "x_extra", "y_extra", "x_extra_val",
                      "y_extra_val"):
            assert np.allclose(getattr(back, split), getattr(ds, split),
                               rtol=0, atol=1e-15), split
        assert np.allclose(back.train_bounds, ds.train_bounds)
        assert np.allclose(back.extra_bounds, ds.extra_bounds)
        assert render(back.exprs[0]) == render(ds.exprs[0])

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope")
