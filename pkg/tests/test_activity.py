import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbload.activity import (
    ActivityType,
    DegenerateFit,
    ExerciseRecord,
    RankDeficient,
    TrainingConfig,
    build_dataset,
    deep_sizes,
    dynamic_features,
    evaluate,
    fit_linear,
    fit_network,
    heart_derived,
    mlp_forward,
    mlp_gradient,
    mlp_init,
    read_exercises,
    residual_diagnostics,
    round_class,
    shallow_sizes,
    synthetic_exercises,
    train_rprop,
)
from hbload.activity.evaluate import ArtifactError, dumps_model, model_from_dict, model_to_dict
from hbload.activity.features import SchemaError, format_exercises
from hbload.activity.network import MlpModel, param_count, with_standardization


def ld_sse(layer_sizes, params, Z, y):
    """Independent long-double forward pass and SSE for finite differences."""
    p = np.asarray(params, dtype=np.longdouble)
    a = np.asarray(Z, dtype=np.longdouble)
    pos = 0
    n_layers = len(layer_sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = layer_sizes[i], layer_sizes[i + 1]
        W = p[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = p[pos : pos + fan_out]
        pos += fan_out
        z = a @ W + b
        a = z if i == n_layers - 1 else 1 / (1 + np.exp(-z))
    r = a[:, 0] - np.asarray(y, dtype=np.longdouble)
    return (r * r).sum()


def fd_gradient(model, Z, y, h=1e-5):
    g = np.empty(model.params.size)
    base = model.params.astype(np.longdouble)
    for k in range(base.size):
        up = base.copy()
        dn = base.copy()
        up[k] += h
        dn[k] -= h
        g[k] = float((ld_sse(model.layer_sizes, up, Z, y) - ld_sse(model.layer_sizes, dn, Z, y)) / (2 * h))
    return g


def record(activity=1, distance=5000.0, duration=1500.0, rest=55, lo=60, hi=180, avg=150, after=65):
    return ExerciseRecord(activity, distance, duration, rest, lo, hi, avg, after)


@pytest.fixture(scope="module")
def fixture_records():
    return synthetic_exercises(60, seed=0)


class TestFeatures:
    def test_dynamic_examples(self):
        f = dynamic_features(5000, 1500)
        assert (f.pace, f.velocity, f.metric_d) == pytest.approx((5.0, 200.0, 25.0))
        f = dynamic_features(1000, 60)
        assert (f.pace, f.velocity, f.metric_d) == pytest.approx((1.0, 1000.0, 1.0))

    @given(st.floats(1, 1e6), st.floats(1, 1e6))
    def test_pace_times_velocity(self, d, t):
        f = dynamic_features(d, t)
        assert f.pace * f.velocity == pytest.approx(1000.0, rel=1e-12)

    @pytest.mark.parametrize("d,t", [(0, 10), (10, 0), (-1, 5)])
    def test_dynamic_errors(self, d, t):
        with pytest.raises(ValueError):
            dynamic_features(d, t)

    def test_heart_examples(self):
        h = heart_derived(55, 180, 60, 65)
        assert (h.working_range, h.reserve, h.recovery) == (120, 125, 115)
        h = heart_derived(70, 70, 70, 70)
        assert (h.working_range, h.reserve, h.recovery) == (0, 0, 0)
        with pytest.raises(ValueError):
            heart_derived(55, 180, 190, 65)

    def test_activity_codes(self):
        assert [int(a) for a in ActivityType] == [1, 2, 3]
        assert ActivityType.parse("walking") is ActivityType.WALKING
        assert ActivityType.parse("2") is ActivityType.SKIING
        with pytest.raises(ValueError):
            ActivityType.parse(4)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            record(avg=200)
        with pytest.raises(ValueError):
            record(distance=0)

    def test_build_dataset(self):
        recs = [record(1), record(3, 3000, 2100, hi=130, avg=110), record(2, 10000, 3600, hi=160, avg=140)]
        ds1 = build_dataset(recs, 1)
        assert ds1.feature_names == ("distance", "duration") and ds1.X.shape == (3, 2)
        ds4 = build_dataset(recs, 4)
        assert ds4.X.shape == (3, 7)
        assert ds4.feature_names == ("distance", "duration", "pace", "velocity", "metricD", "MHR", "AHR")
        assert ds4.y[1] == 3.0
        np.testing.assert_allclose(ds4.X[0, 2:5], [5.0, 200.0, 25.0])
        np.testing.assert_allclose(ds4.x_mean, ds4.X.mean(axis=0))

    def test_constant_column_reported(self):
        recs = [record(1, avg=150), record(2, avg=140), record(3, avg=100)]
        with pytest.warns(UserWarning, match="distance"):
            ds = build_dataset(recs, 1)
        assert "distance" in ds.constant_columns and "duration" in ds.constant_columns
        assert np.all(ds.x_std == 1.0)

    def test_build_errors(self):
        with pytest.raises(ValueError):
            build_dataset([record()], 1)
        with pytest.raises(ValueError):
            build_dataset([record(), record()], 5)

    def test_file_round_trip(self, fixture_records):
        text = format_exercises(fixture_records)
        assert read_exercises(text) == fixture_records
        assert read_exercises("# comment\n" + text)[0] == fixture_records[0]

    @pytest.mark.parametrize("text", [
        "",
        "activity,distance_m\n1,5\n",
        "activity,distance_m,duration_s,hr_rest,hr_min,hr_max,hr_avg,hr_rest_after\n",
        "activity,distance_m,duration_s,hr_rest,hr_min,hr_max,hr_avg,hr_rest_after\n9,1,1,50,60,180,150,60\n",
        "activity,distance_m,duration_s,hr_rest,hr_min,hr_max,hr_avg,hr_rest_after\n1,x,1,50,60,180,150,60\n",
    ])
    def test_schema_errors(self, text):
        with pytest.raises(SchemaError):
            read_exercises(text)

    def test_synthetic_fixture(self, fixture_records):
        ds = build_dataset(fixture_records, 4)
        counts = np.bincount(ds.y.astype(int))[1:]
        assert list(counts) == [20, 20, 20]
        # separable by average heart rate alone
        ahr = ds.X[:, 6]
        for lo, hi in ((1, 2), (2, 3)):
            assert ahr[ds.y == lo].min() > ahr[ds.y == hi].max()


class TestLinear:
    def test_exact_line(self):
        m = fit_linear(np.array([[1.0], [2.0], [3.0]]), [2.0, 4.0, 6.0])
        assert m.coef[0] == pytest.approx(2.0) and m.intercept == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(m.residuals, 0.0, atol=1e-12)
        with pytest.raises(DegenerateFit):
            residual_diagnostics(m)

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            fit_linear(np.array([[1.0], [2.0]]), [2.0, 4.0])

    def test_duplicate_column(self, rng):
        x = rng.normal(size=20)
        with pytest.raises(RankDeficient):
            fit_linear(np.column_stack([x, x]), rng.normal(size=20))
        with pytest.raises(RankDeficient):
            fit_linear(np.column_stack([x, np.ones(20)]), rng.normal(size=20))

    @pytest.mark.parametrize("seed", range(10))
    def test_normal_equations_oracle(self, seed):
        r = np.random.default_rng(seed)
        n, p = r.integers(10, 60), r.integers(1, 6)
        X = r.normal(size=(n, p)) * r.uniform(0.5, 5, p) + r.uniform(-3, 3, p)
        y = r.normal(size=n)
        m = fit_linear(X, y)
        A = np.column_stack([np.ones(n), X])
        beta = np.linalg.solve(A.T @ A, A.T @ y)
        np.testing.assert_allclose(np.r_[m.intercept, m.coef], beta, rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(A.T @ m.residuals, 0.0, atol=1e-8)
        H = A @ np.linalg.inv(A.T @ A) @ A.T
        np.testing.assert_allclose(m.leverage, np.diag(H), atol=1e-10)

    def test_affine_rescaling_keeps_predictions(self, rng):
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        a = fit_linear(X, y)
        X2 = X * [1000.0, 0.01, -3.0] + [5.0, -2.0, 100.0]
        b = fit_linear(X2, y)
        np.testing.assert_allclose(a.fitted, b.fitted, atol=1e-9)

    def test_diagnostics(self, rng):
        X = rng.normal(size=(40, 2))
        y = X @ [1.0, -2.0] + rng.normal(size=40)
        m = fit_linear(X, y)
        d = residual_diagnostics(m)
        assert abs(m.residuals.mean()) < 1e-12
        assert np.all(d.sqrt_abs_standardized >= 0)
        s = np.sqrt(m.sse / (40 - 3))
        np.testing.assert_allclose(d.standardized, m.residuals / (s * np.sqrt(1 - m.leverage)))

    def test_standardized_mean_zero_for_equal_leverage(self, rng):
        # full two-level factorial: every row has the same leverage
        grid = np.array([[a, b] for a in (-1, 1) for b in (-1, 1)] * 5, float)
        y = grid @ [0.5, 2.0] + rng.normal(size=len(grid))
        d = residual_diagnostics(fit_linear(grid, y))
        assert abs(d.standardized.mean()) < 1e-8


class TestNetwork:
    def test_shapes(self):
        m = mlp_init(shallow_sizes(2), seed=0)
        assert m.layer_sizes == (2, 6, 1) and m.params.size == 25 == param_count((2, 6, 1))
        d = mlp_init(deep_sizes(7), seed=0)
        assert d.layer_sizes == (7, 12, 8, 6, 3, 1)
        assert [W.shape for W, _ in d.layers] == [(7, 12), (12, 8), (8, 6), (6, 3), (3, 1)]

    def test_init(self):
        a = mlp_init((3, 6, 1), seed=5)
        b = mlp_init((3, 6, 1), seed=5)
        np.testing.assert_array_equal(a.params, b.params)
        for W, bias in a.layers:
            assert np.all(np.abs(W) <= 0.5) and np.all(bias == 0)
        with pytest.raises(ValueError):
            mlp_init((3, 6, 2), seed=0)
        with pytest.raises(ValueError):
            mlp_init((3,), seed=0)

    def test_zero_network(self):
        m = mlp_init((3, 6, 1), seed=0)
        m.params[:] = 0
        np.testing.assert_array_equal(mlp_forward(m, np.ones((4, 3))), 0.0)
        # hidden units all emit logistic(0) = 0.5, seen through a unit output weight
        m.layers[1][0][:] = 1.0
        np.testing.assert_allclose(mlp_forward(m, np.zeros((1, 3))), 3.0)

    def test_dead_input_ignored(self, rng):
        m = mlp_init((3, 6, 1), seed=1)
        m.layers[0][0][2, :] = 0.0
        X = rng.normal(size=(5, 3))
        X2 = X.copy()
        X2[:, 2] = rng.normal(size=5) * 100
        np.testing.assert_array_equal(mlp_forward(m, X), mlp_forward(m, X2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mlp_forward(mlp_init((3, 6, 1), 0), np.ones((2, 4)))

    def test_zero_residual_gradient(self, rng):
        m = mlp_init((2, 6, 1), seed=3)
        X = rng.normal(size=(6, 2))
        np.testing.assert_allclose(mlp_gradient(m, X, mlp_forward(m, X)), 0.0, atol=1e-15)

    def test_gradient_additive(self, rng):
        m = mlp_init((2, 6, 1), seed=3)
        X = rng.normal(size=(2, 2))
        y = rng.normal(size=2)
        g = mlp_gradient(m, X, y)
        np.testing.assert_allclose(g, mlp_gradient(m, X[:1], y[:1]) + mlp_gradient(m, X[1:], y[1:]),
                                   rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("sizes", [(2, 6, 1), (7, 12, 8, 6, 3, 1), (3, 4, 2, 1)])
    def test_finite_differences(self, sizes, rng):
        m = mlp_init(sizes, seed=int(rng.integers(1000)))
        m.params[:] += rng.uniform(-0.3, 0.3, m.params.size)
        X = rng.normal(size=(8, sizes[0]))
        y = rng.integers(1, 4, size=8).astype(float)
        g = mlp_gradient(m, X, y)
        fd = fd_gradient(m, X, y)
        big = np.maximum(np.abs(g), np.abs(fd)) >= 1e-8
        rel = np.abs(g - fd)[big] / np.maximum(np.abs(g), np.abs(fd))[big]
        assert rel.max() <= 1e-5

    def test_standardization_invariance(self, rng):
        X = rng.normal(size=(30, 3)) * [1000, 10, 0.1] + [5000, 100, 3]
        y = rng.integers(1, 4, 30).astype(float)
        cfg = TrainingConfig(seed=4, max_epochs=300)
        a = fit_network(X, y, (6,), cfg)
        # positive scales only: a negative one flips the sign of the z-score
        X2 = X * [0.001, 60.0, 2.0] + [1.0, -7.0, 40.0]
        b = fit_network(X2, y, (6,), cfg)
        np.testing.assert_allclose(a.history, b.history, rtol=1e-8)
        np.testing.assert_allclose(a.model.predict(X), b.model.predict(X2), rtol=1e-8, atol=1e-10)

    def test_with_standardization(self):
        m = mlp_init((2, 6, 1), seed=0)
        m2 = with_standardization(m, [1.0, 2.0], [3.0, 4.0])
        np.testing.assert_array_equal(m2.x_std, [3.0, 4.0])
        np.testing.assert_array_equal(m.x_std, [1.0, 1.0])


class TestTraining:
    def test_already_fit_stops_at_epoch_zero(self):
        m = mlp_init((2, 6, 1), seed=0)
        m.params[:] = 0
        res = train_rprop(m, np.ones((5, 2)), np.zeros(5))
        assert res.epochs == 0 and res.converged and res.history.tolist() == [0.0]

    def test_deterministic(self, fixture_records):
        ds = build_dataset(fixture_records, 2)
        cfg = TrainingConfig(seed=2, max_epochs=500)
        a = fit_network(ds.X, ds.y, (6,), cfg)
        b = fit_network(ds.X, ds.y, (6,), cfg)
        assert a.history.tobytes() == b.history.tobytes()
        assert a.model.params.tobytes() == b.model.params.tobytes()

    def test_input_model_untouched(self, fixture_records):
        ds = build_dataset(fixture_records, 1)
        m = mlp_init((2, 6, 1), seed=0, x_mean=ds.x_mean, x_std=ds.x_std)
        before = m.params.copy()
        train_rprop(m, ds.X, ds.y, TrainingConfig(max_epochs=20))
        np.testing.assert_array_equal(m.params, before)

    def test_exhaustion_flagged(self, fixture_records):
        ds = build_dataset(fixture_records, 4)
        res = fit_network(ds.X, ds.y, (6,), TrainingConfig(max_epochs=5))
        assert res.exhausted and res.epochs == 5 and res.history.size == 6

    def test_non_finite_error(self):
        from hbload.activity import TrainingError

        m = mlp_init((1, 6, 1), seed=0)
        with pytest.raises(TrainingError, match="epoch 0"):
            train_rprop(m, np.ones((3, 1)), np.array([1.0, np.inf, 2.0]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainingConfig(increase=0.9)
        with pytest.raises(ValueError):
            TrainingConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainingConfig(step_min=100)

    def test_shallow_fits_separable_fixture(self, fixture_records):
        ds = build_dataset(fixture_records, 4)
        good = 0
        for seed in range(10):
            res = fit_network(ds.X, ds.y, (6,), TrainingConfig(seed=seed, max_epochs=10_000))
            assert res.final_sse <= res.history[0]
            good += res.final_sse < 0.05 * ds.y.size
        assert good >= 8


class TestEvaluate:
    def test_perfect(self):
        class Echo:
            def predict(self, X):
                return np.asarray(X, float)[:, 0]

        y = np.array([1.0, 2.0, 3.0])
        rep = evaluate(Echo(), y[:, None], y)
        assert rep.sse == 0 and rep.accuracy == 1.0

    def test_rounding(self):
        np.testing.assert_array_equal(round_class([2.4, 0.3, 2.5, 3.7, 1.49]), [2, 1, 3, 3, 1])

    def test_artifact_round_trip(self, fixture_records):
        ds = build_dataset(fixture_records, 4)
        lm = fit_linear(ds.X, ds.y, ds.feature_names)
        nn = fit_network(ds.X, ds.y, (6,), TrainingConfig(max_epochs=50)).model
        for learner, model in (("lm", lm), ("nn", nn)):
            doc = json.loads(dumps_model(model_to_dict(model, learner, 4)))
            back = model_from_dict(doc)
            np.testing.assert_array_equal(back.predict(ds.X), model.predict(ds.X))

    def test_artifact_mismatch(self, fixture_records):
        ds = build_dataset(fixture_records, 4)
        doc = model_to_dict(fit_linear(ds.X, ds.y), "lm", 4)
        doc["coef"] = doc["coef"][:2]
        with pytest.raises(ArtifactError):
            model_from_dict(doc)
        doc = model_to_dict(fit_linear(ds.X, ds.y), "lm", 4)
        doc["model_id"] = 1
        with pytest.raises(ArtifactError):
            model_from_dict(doc)
        with pytest.raises(ArtifactError):
            model_from_dict({"learner": "svm"})
