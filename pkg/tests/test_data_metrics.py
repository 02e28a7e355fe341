import os
import warnings

import numpy as np
import pytest

from zo_minmax import (
    Box,
    DataLoadError,
    EstimatorMode,
    InvalidArgumentError,
    Schedule,
    SolverConfig,
    Variant,
    reference_saddle,
    run,
)
from zo_minmax.data import CsvSchema, SyntheticSpec, balance, generate_synthetic, load_csv, train_test_split, write_csv
from zo_minmax.metrics import accuracy, gap, gap_function, robustness_curve
from zo_minmax.toys import FunctionOracle, min_max_blocks
from zo_minmax.wdrsc import QuadraticCost, StrategicDataset, build_objective

FIXTURE = os.path.join(os.path.dirname(__file__), "data", "fixture_100.csv")


# -- synthetic data -----------------------------------------------------------------------


def test_noiseless_one_dimensional_data_is_separable():
    seed = next(s for s in range(100) if generate_synthetic(SyntheticSpec(1, 1, seed=s))[1][0] > 0)
    ds, theta_star = generate_synthetic(SyntheticSpec(200, 1, noise_std=0.0, seed=seed))
    assert theta_star[0] > 0
    np.testing.assert_array_equal(ds.labels, np.where(ds.features[:, 0] >= 0, 1.0, -1.0))


def test_synthetic_shape_and_labels():
    ds, theta_star = generate_synthetic(SyntheticSpec(500, 10))
    assert ds.features.shape == (500, 10)
    assert theta_star.shape == (10,)
    assert set(np.unique(ds.labels)) <= {-1.0, 1.0}
    assert ds.strategic_mask.tolist() == [True] * 5 + [False] * 5


def test_synthetic_is_seed_deterministic():
    a, ta = generate_synthetic(SyntheticSpec(50, 4, seed=3))
    b, tb = generate_synthetic(SyntheticSpec(50, 4, seed=3))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    assert ta.tobytes() == tb.tobytes()
    c, _ = generate_synthetic(SyntheticSpec(50, 4, seed=4))
    assert c.features.tobytes() != a.features.tobytes()


def test_labels_are_reproducible_from_stored_draws():
    ds, theta_star, noise = generate_synthetic(SyntheticSpec(300, 6, noise_std=0.5, seed=8), return_noise=True)
    np.testing.assert_array_equal(ds.labels, np.where(ds.features @ theta_star + noise >= 0, 1.0, -1.0))
    assert noise.std() == pytest.approx(0.5, rel=0.15)


@pytest.mark.parametrize("kw", [dict(n=0, d=2), dict(n=2, d=0), dict(n=2, d=2, strategic=3), dict(n=2, d=2, noise_std=-1.0)])
def test_invalid_synthetic_specs(kw):
    with pytest.raises(InvalidArgumentError):
        SyntheticSpec(**kw)


# -- CSV ----------------------------------------------------------------------------------


def test_label_mapping(tmp_path):
    path = tmp_path / "three.csv"
    path.write_text("a,b,label\n1,2,1\n3,4,0\n5,6,1\n")
    ds = load_csv(str(path))
    assert ds.labels.tolist() == [1.0, -1.0, 1.0]
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])
    assert ds.feature_names == ("a", "b")


def test_text_cell_names_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,label\n1,2,1\n3,oops,0\n")
    with pytest.raises(DataLoadError, match=r"row 2, column 'b'"):
        load_csv(str(path))


@pytest.mark.parametrize(
    "text, pattern",
    [("a,a,label\n1,2,1\n", "header"), ("a,b\n1,2\n", "label column"), ("a,label\n1,7\n", "not binary"), ("a,label\n", "no data")],
)
def test_malformed_files(tmp_path, text, pattern):
    path = tmp_path / "f.csv"
    path.write_text(text)
    with pytest.raises(DataLoadError, match=pattern):
        load_csv(str(path))


def test_missing_file():
    with pytest.raises(DataLoadError):
        load_csv("/nonexistent/data.csv")


def test_round_trip_is_bit_exact(tmp_path):
    ds, _ = generate_synthetic(SyntheticSpec(40, 3, seed=2))
    path = str(tmp_path / "rt.csv")
    write_csv(ds, path)
    back = load_csv(path, strategic=[0, 1])
    assert back.features.tobytes() == ds.features.tobytes()
    assert back.labels.tobytes() == ds.labels.tobytes()
    assert back.strategic_mask.tolist() == ds.strategic_mask.tolist()


def test_standardization(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("a,b,label\n1,10,1\n2,10,-1\n3,10,1\n")
    ds = load_csv(str(path), CsvSchema(standardize=True))
    np.testing.assert_allclose(ds.features.mean(axis=0), 0, atol=1e-15)
    np.testing.assert_allclose(ds.features[:, 0].std(), 1.0)
    assert np.all(ds.features[:, 1] == 0)


def test_shipped_fixture_loads():
    ds = load_csv(FIXTURE)
    assert ds.features.shape == (100, 4)
    assert 0 < ds.positives.size < 100


# -- balancing and splits --------------------------------------------------------------------


def _labelled(pos, neg):
    return StrategicDataset(np.arange(pos + neg, dtype=float)[:, None], np.array([1.0] * pos + [-1.0] * neg))


def test_balance_counts():
    out = balance(_labelled(10, 10), 4, 0)
    assert out.n == 4 and np.sum(out.labels > 0) == 2
    odd = balance(_labelled(10, 10), 5, 0)
    assert np.sum(odd.labels > 0) == 3 and np.sum(odd.labels < 0) == 2


def test_balance_names_the_short_class():
    with pytest.raises(InvalidArgumentError, match=r"class \+1 .*need 4"):
        balance(_labelled(3, 10), 8, 0)


def test_balance_is_seed_deterministic():
    a = balance(_labelled(20, 20), 10, 5)
    b = balance(_labelled(20, 20), 10, 5)
    np.testing.assert_array_equal(a.features, b.features)


def test_split_partitions_rows():
    ds = _labelled(10, 10)
    train, test = train_test_split(ds, 0.25, 1)
    assert test.n == 5 and train.n == 15
    assert sorted(np.concatenate([train.features[:, 0], test.features[:, 0]]).tolist()) == list(range(20))


# -- gap -------------------------------------------------------------------------------------


def quadratic_toy():
    f = lambda u: float(u[0] ** 2 - u[1] ** 2 + u[0] * u[1])
    return FunctionOracle([f], min_max_blocks(1, 1))


def test_gap_at_saddle_is_zero():
    report = gap(quadratic_toy(), np.zeros(2), np.zeros(2))
    assert abs(report.value) <= 1e-10


def test_gap_of_quadratic_toy_by_hand():
    box = Box(-np.ones(2), np.ones(2))
    assert gap(quadratic_toy(), np.zeros(2), np.array([1.0, 1.0]), box).value == pytest.approx(2.0)


def test_gap_rejects_infeasible_points():
    box = Box(-np.ones(2), np.ones(2))
    with pytest.raises(InvalidArgumentError):
        gap(quadratic_toy(), np.zeros(2), np.array([2.0, 0.0]), box)


def test_gap_warns_for_a_non_saddle_reference():
    with pytest.warns(UserWarning, match="negative gap"):
        gap(quadratic_toy(), np.array([1.0, 0.0]), np.zeros(2))


@pytest.fixture(scope="module")
def wdrsc_problem():
    ds, _ = generate_synthetic(SyntheticSpec(40, 3, seed=1))
    obj = build_objective(ds, QuadraticCost(ds, 0.05))
    ref = reference_saddle(obj, obj.feasible, tol=1e-10)
    return obj, ref


def test_gap_is_nonnegative_on_random_feasible_points(wdrsc_problem):
    obj, ref = wdrsc_problem
    assert abs(gap(obj, ref, ref, obj.feasible).value) <= 1e-10
    evaluate = gap_function(obj, ref)
    pts = obj.feasible.sample(np.random.default_rng(0), 1000)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        values = [evaluate(u) for u in pts]
    assert min(values) >= -1e-8


def test_gap_of_averaged_iterate_trends_down(wdrsc_problem):
    obj, ref = wdrsc_problem
    cfg = SolverConfig(
        variant=Variant.OGDA_RR,
        epochs=300,
        schedule=Schedule(0.05, 10.0, eta_exponent=0.4),
        feasible=obj.feasible,
        estimator_mode=EstimatorMode.HYBRID,
        seed=0,
    )
    cfg.eval_every = 15
    res = run(cfg, obj, evaluate=gap_function(obj, ref))
    seq = [r.suboptimality for r in res.trace]
    rises = sum(b > a for a, b in zip(seq, seq[1:]))
    assert rises <= 0.2 * (len(seq) - 1)
    assert seq[-1] < seq[0]


# -- accuracy --------------------------------------------------------------------------------


def test_accuracy_examples():
    pos = StrategicDataset(np.array([[1.0, 0.0]]), np.array([1.0]))
    for zeta in (0.0, 0.05, 3.0):
        rep = accuracy(pos, np.array([1.0, 0.0]), zeta)
        assert (rep.margin_accuracy, rep.sign_accuracy) == (1.0, 1.0)
    neg = StrategicDataset(np.array([[1.0, 0.0]]), np.array([-1.0]))
    assert accuracy(neg, np.array([1.0, 0.0]), 0.05).margin_accuracy == pytest.approx(-1.05, abs=1e-15)


def test_zero_classifier_predicts_positive():
    ds, _ = generate_synthetic(SyntheticSpec(60, 3, seed=4))
    rep = accuracy(ds, np.zeros(3), 0.1)
    assert rep.margin_accuracy == 0.0
    assert rep.sign_accuracy == np.mean(ds.labels > 0)


def test_accuracy_rejects_bad_inputs():
    ds, _ = generate_synthetic(SyntheticSpec(10, 3))
    with pytest.raises(InvalidArgumentError):
        accuracy(ds, np.zeros(2), 0.1)
    with pytest.raises(InvalidArgumentError):
        accuracy(ds, np.zeros(3), -0.1)


def test_curve_at_zero_uses_unmoved_features():
    ds, theta = generate_synthetic(SyntheticSpec(50, 4, seed=6))
    rows = robustness_curve(ds, {"truth": theta}, [0.0])
    margins = ds.features @ theta
    assert rows == [("truth", 0.0, float(np.mean(ds.labels * margins)), float(np.mean(np.where(margins >= 0, 1.0, -1.0) == ds.labels)))]


def test_curve_is_flat_without_strategic_agents():
    rng = np.random.default_rng(7)
    ds = StrategicDataset(rng.standard_normal((30, 3)), np.ones(30))
    rows = robustness_curve(ds, {"a": rng.standard_normal(3)}, [0.0, 0.1, 0.5, 2.0])
    assert len({(r[2], r[3]) for r in rows}) == 1


def test_curve_rows_are_classifier_major_and_need_a_grid():
    ds, theta = generate_synthetic(SyntheticSpec(20, 2))
    rows = robustness_curve(ds, {"a": theta, "b": -theta}, [0.1, 0.2])
    assert [(r[0], r[1]) for r in rows] == [("a", 0.1), ("a", 0.2), ("b", 0.1), ("b", 0.2)]
    with pytest.raises(InvalidArgumentError):
        robustness_curve(ds, {"a": theta}, [])
