"""Cost functions, the descent fitter, error metrics, the estimator face."""

import math

import numpy as np
import pytest
from sklearn.base import clone

from formopt.dataset import Dataset, Observation
from formopt.errors import (
    DimensionMismatch,
    EmptyDataset,
    NoRealData,
    ParseError,
)
from formopt.fitting import (
    FitConfig,
    QuboRegressor,
    _contour_weights,
    _descend,
    _design,
    _objective_terms,
    coarse_fine_fit,
    cost_contour_aware,
    cost_mse,
    error_report,
    fit,
)
from formopt.qubo import QuboModel, random_model


def make_dataset(rows):
    ds = Dataset()
    for bits, ain, *rest in rows:
        ds.record(bits, ain, kind=rest[0] if rest else "real")
    return ds


def random_dataset(n, count, seed, lo=50.0, hi=150.0):
    rng = np.random.default_rng(seed)
    ds = Dataset()
    seen = set()
    while len(ds) < count:
        bits = "".join(rng.choice(["0", "1"], n))
        if bits in seen:
            continue
        seen.add(bits)
        ds.record(bits, float(rng.uniform(lo, hi)))
    return ds


# -- dataset basics ------------------------------------------------------------


def test_dataset_stats_ignore_augmented():
    ds = make_dataset([("00", 10.0), ("01", 30.0), ("10", 99.0, "augmented")])
    assert ds.real_mean == 20.0
    assert ds.real_max == 30.0
    assert ds.real_std == 10.0


def test_dataset_csv_roundtrip():
    ds = make_dataset([("0011", 8481.0), ("1100", 9068.5, "augmented")])
    again = Dataset.from_csv(ds.to_csv())
    assert again.observations == ds.observations
    assert ds.to_csv().splitlines()[0] == "id,bits,ain,kind"


def test_dataset_csv_errors():
    with pytest.raises(ParseError):
        Dataset.from_csv("wrong,header\n1,2\n")
    with pytest.raises(ParseError):
        Dataset.from_csv("id,bits,ain,kind\n0,01,notanumber,real\n")
    with pytest.raises(ParseError):
        Dataset.from_csv("id,bits,ain,kind\n0,01,1.0,banana\n")


# -- cost functions ----------------------------------------------------------------


def test_cost_mse_examples():
    ds = make_dataset([("00", 10.0)])
    assert cost_mse(QuboModel(2, constant=10.0), ds) == 0.0
    assert cost_mse(QuboModel(2, constant=20.0), ds) == pytest.approx(100.0)


def test_cost_mse_matches_direct_loop():
    ds = random_dataset(5, 12, seed=3)
    m = random_model(5, seed=8, scale=20.0)
    expected = sum((m.evaluate(o.bits) - o.ain) ** 2 for o in ds) / len(ds)
    assert cost_mse(m, ds) == pytest.approx(expected, rel=1e-12)


def test_cost_contour_aware_examples():
    # single observation at the maximum: no attenuation
    ds = make_dataset([("00", 50.0)])
    m = QuboModel(2, constant=60.0)
    assert cost_contour_aware(m, ds, tau=100.0) == pytest.approx(100.0)
    # observation 100 below the max: attenuated by e
    ds = make_dataset([("00", 0.0), ("11", 100.0)])
    m_low = QuboModel(2, constant=10.0)  # E=10 on "00", E=10 on "11"
    expected = ((10.0 - 0.0) ** 2 * math.exp(-1.0) + (10.0 - 100.0) ** 2) / 2
    assert cost_contour_aware(m_low, ds, tau=100.0) == pytest.approx(expected)


def test_contour_equals_mse_when_all_at_max():
    ds = make_dataset([("00", 75.0), ("01", 75.0), ("11", 75.0)])
    m = random_model(2, seed=0, scale=5.0)
    assert cost_contour_aware(m, ds, 100.0) == pytest.approx(cost_mse(m, ds))


def test_contour_cost_is_weighted_mse_by_construction():
    ds = random_dataset(4, 10, seed=1)
    m = random_model(4, seed=2, scale=30.0)
    w = _contour_weights(np.array([o.ain for o in ds]), ds.real_max, 100.0)
    scaled = [
        math.sqrt(wi) * (m.evaluate(o.bits) - o.ain) for wi, o in zip(w, ds)
    ]
    expected = sum(s * s for s in scaled) / len(ds)
    assert cost_contour_aware(m, ds, 100.0) == pytest.approx(expected, rel=1e-12)


def test_costs_reject_empty_dataset():
    with pytest.raises(EmptyDataset):
        cost_mse(QuboModel(2), Dataset())
    with pytest.raises(EmptyDataset):
        cost_contour_aware(QuboModel(2), Dataset(), 100.0)


# -- error_report ----------------------------------------------------------------


def test_error_report_perfect_model():
    ds = make_dataset([("01", 100.0), ("10", 50.0)])
    m = fit(ds, FitConfig(cost="mse", ridge=0.0, max_iterations=5000,
                          gradient_tolerance=1e-12)).model
    mse_pct, cae_pct = error_report(m, ds)
    assert mse_pct == pytest.approx(0.0, abs=1e-6)
    assert cae_pct == pytest.approx(0.0, abs=1e-6)


def test_error_report_single_point():
    ds = make_dataset([("00", 100.0)])
    m = QuboModel(2, constant=110.0)
    assert error_report(m, ds) == (pytest.approx(10.0), pytest.approx(10.0))


def test_error_report_two_point_hand_value():
    # H=100 (the max, residual 0) and H=0 (residual 50, weight e^-1)
    ds = make_dataset([("00", 100.0), ("01", 0.0)])
    m = QuboModel(2, np.zeros((2, 2)), [0.0, -50.0], 100.0)
    assert m.evaluate("00") == 100.0 and m.evaluate("01") == 50.0
    mse_pct, cae_pct = error_report(m, ds, tau=100.0)
    # hand-computed: sqrt((0 + 50^2)/2) = sqrt(1250); weighted uses e^-1
    assert mse_pct == pytest.approx(100.0 * math.sqrt(1250.0) / 100.0, abs=5e-3)
    w = math.exp(-1.0)
    assert cae_pct == pytest.approx(
        100.0 * math.sqrt(2500.0 * w / (1 + w)) / 100.0, abs=5e-3
    )
    assert (mse_pct, cae_pct) == (pytest.approx(35.3553, abs=1e-3),
                                  pytest.approx(25.9298, abs=1e-3))


def test_error_report_ignores_augmented_rows():
    ds = make_dataset([("00", 100.0), ("11", 0.0, "augmented")])
    m = QuboModel(2, constant=100.0)
    assert error_report(m, ds) == (pytest.approx(0.0), pytest.approx(0.0))


def test_error_report_needs_real_data():
    with pytest.raises(EmptyDataset):
        error_report(QuboModel(2), make_dataset([("00", 1.0, "augmented")]))


# -- gradients ----------------------------------------------------------------


def finite_difference_gradient(phi, y, weights, ridge, w, h=1e-6):
    g = np.zeros_like(w)
    for k in range(len(w)):
        up, down = w.copy(), w.copy()
        up[k] += h
        down[k] -= h
        f_up = _objective_terms(phi, y, weights, ridge, up)[0]
        f_down = _objective_terms(phi, y, weights, ridge, down)[0]
        g[k] = (f_up - f_down) / (2 * h)
    return g


@pytest.mark.parametrize("cost", ["mse", "contour_aware"])
def test_analytic_gradient_matches_central_differences(cost):
    for seed in range(8):
        rng = np.random.default_rng(seed)
        ds = random_dataset(5, 9, seed=seed, lo=0.0, hi=3.0)
        X, y = ds.design()
        phi = _design(X)
        weights = (np.ones_like(y) if cost == "mse"
                   else _contour_weights(y, ds.real_max, 2.0))
        w = rng.normal(size=phi.shape[1])
        _, g = _objective_terms(phi, y, weights, 1e-4, w)
        fd = finite_difference_gradient(phi, y, weights, 1e-4, w)
        scale = np.maximum(np.abs(fd), 1e-8)
        assert np.max(np.abs(g - fd) / scale) < 1e-5


# -- fit ----------------------------------------------------------------------


def tight(**kw):
    base = dict(cost="mse", strategy="one_stage", ridge=0.0,
                max_iterations=20000, gradient_tolerance=1e-12)
    base.update(kw)
    return FitConfig(**base)


def test_exact_recovery_from_full_enumeration():
    hidden = random_model(6, seed=11)
    ds = Dataset()
    for v in range(64):
        bits = format(v, "06b")
        ds.record(bits, hidden.evaluate(bits))
    report = fit(ds, tight())
    X, y = ds.design()
    assert np.max(np.abs(report.model.evaluate_batch(X) - y)) <= 1e-6


def test_constant_target_reaches_constant_model():
    ds = make_dataset([("000", 1.0), ("011", 1.0), ("101", 1.0), ("110", 1.0)])
    # unregularized: the interpolant is exact
    report = fit(ds, tight(ridge=0.0))
    X, _ = ds.design()
    assert np.max(np.abs(report.model.evaluate_batch(X) - 1.0)) <= 1e-6
    # with ridge the predictions shrink by O(lambda) toward zero, no more
    report = fit(ds, tight(ridge=1e-6))
    assert np.max(np.abs(report.model.evaluate_batch(X) - 1.0)) <= 1e-5


def test_contour_fit_equals_mse_fit_when_all_at_max():
    ds = make_dataset([("00", 80.0), ("01", 80.0), ("10", 80.0)])
    a = fit(ds, tight(cost="mse", ridge=1e-6))
    b = fit(ds, tight(cost="contour_aware", ridge=1e-6))
    X, _ = ds.design()
    assert np.allclose(a.model.evaluate_batch(X), b.model.evaluate_batch(X),
                       atol=1e-9)


def test_fit_cost_never_exceeds_initial_cost():
    ds = random_dataset(6, 10, seed=5)
    initial = random_model(6, seed=1, scale=50.0)
    config = FitConfig(cost="mse", ridge=1e-6, max_iterations=50,
                       gradient_tolerance=1e-12)
    report = fit(ds, config, initial=initial)
    start = cost_mse(initial, ds) + config.ridge * float(
        np.sum(np.concatenate([initial.quad[np.triu_indices(6, 1)],
                               initial.linear, [initial.constant]]) ** 2))
    assert report.training_cost <= start + 1e-12


def test_fit_depends_on_initial_when_underdetermined():
    ds = random_dataset(6, 5, seed=2)  # 5 rows, 22 parameters
    a = fit(ds, tight(ridge=0.0, max_iterations=3000))
    b = fit(ds, tight(ridge=0.0, max_iterations=3000),
            initial=random_model(6, seed=3, scale=10.0))
    # same minimal cost, different minimizers
    assert a.training_cost == pytest.approx(b.training_cost, abs=1e-6)
    assert not np.allclose(a.model.linear, b.model.linear, atol=1e-3)


def test_final_cost_independent_of_initialization():
    ds = random_dataset(6, 12, seed=7, lo=0.0, hi=2.0)
    config = tight(ridge=1e-3)
    r1 = fit(ds, config)
    r2 = fit(ds, config, initial=random_model(6, seed=42))
    assert abs(r1.training_cost - r2.training_cost) <= 1e-6


def test_monotone_descent_history():
    ds = random_dataset(5, 10, seed=9)
    X, y = ds.design()
    phi = _design(X)
    _, history, _ = _descend(phi, y, np.ones_like(y), 1e-6,
                             np.zeros(phi.shape[1]), 500, 1e-10)
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


def test_fit_errors():
    with pytest.raises(EmptyDataset):
        fit(Dataset(), FitConfig())
    ds = random_dataset(4, 5, seed=0)
    with pytest.raises(DimensionMismatch):
        fit(ds, FitConfig(), initial=random_model(5, seed=0))
    aug_only = make_dataset([("00", 5.0, "augmented")])
    with pytest.raises(NoRealData):
        fit(aug_only, FitConfig(cost="contour_aware"))


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(cost="huber")
    with pytest.raises(ValueError):
        FitConfig(tau=0.0)
    with pytest.raises(ValueError):
        FitConfig(ridge=-1.0)
    with pytest.raises(ValueError):
        FitConfig(strategy="three_stage")


# -- coarse_fine ----------------------------------------------------------------


def test_coarse_fine_on_purely_linear_hidden_model():
    hidden = QuboModel(6, None, np.arange(1.0, 7.0), 3.0)
    rng = np.random.default_rng(4)
    ds = Dataset()
    seen = set()
    while len(ds) < 30:
        bits = "".join(rng.choice(["0", "1"], 6))
        if bits in seen:
            continue
        seen.add(bits)
        ds.record(bits, hidden.evaluate(bits))
    report = coarse_fine_fit(ds, tight(strategy="coarse_fine", ridge=0.0))
    assert report.stage1_cost <= 1e-10  # stage 1 alone nails a linear target
    assert report.training_cost <= report.stage1_cost + 1e-12


def test_coarse_fine_stage2_never_worse_than_stage1():
    for seed in range(50):
        ds = random_dataset(5, 8, seed=seed)
        report = coarse_fine_fit(
            ds, FitConfig(cost="contour_aware", strategy="coarse_fine",
                          max_iterations=300, gradient_tolerance=1e-8))
        assert report.training_cost <= report.stage1_cost + 1e-9


def test_no_quadratic_signal_keeps_couplings_at_zero():
    # all rows have at most one set bit, so every pair feature is constant 0
    ds = make_dataset([("0000", 1.0), ("1000", 2.0), ("0100", 3.0),
                       ("0010", 2.5), ("0001", 1.5)])
    report = coarse_fine_fit(ds, tight(strategy="coarse_fine", ridge=1e-6))
    assert np.max(np.abs(report.model.quad)) <= 1e-9


def test_contour_weighting_concentrates_accuracy_at_the_top():
    wins = 0
    trials = 30
    for seed in range(trials):
        ds = random_dataset(8, 20, seed=seed)  # 20 rows, 37 parameters
        cfg = dict(max_iterations=2000, gradient_tolerance=1e-9)
        rm = fit(ds, FitConfig(cost="mse", **cfg))
        rc = fit(ds, FitConfig(cost="contour_aware", tau=30.0, **cfg))
        top = max(ds, key=lambda o: o.ain)
        if abs(rc.model.evaluate(top.bits) - top.ain) < \
           abs(rm.model.evaluate(top.bits) - top.ain):
            wins += 1
    assert wins > trials / 2


# -- estimator face -----------------------------------------------------------


def test_regressor_fit_predict():
    hidden = random_model(5, seed=13)
    X = np.array([[int(c) for c in format(v, "05b")] for v in range(32)])
    y = hidden.evaluate_batch(X)
    est = QuboRegressor(cost="mse", ridge=0.0, max_iterations=20000,
                        gradient_tolerance=1e-12)
    est.fit(X, y)
    assert np.max(np.abs(est.predict(X) - y)) <= 1e-6
    assert est.score(X, y) == pytest.approx(1.0)
    assert est.n_features_in_ == 5


def test_regressor_sklearn_protocol():
    est = QuboRegressor(cost="contour_aware", tau=42.0)
    params = est.get_params()
    assert params["tau"] == 42.0
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(strategy="coarse_fine")
    assert est.strategy == "coarse_fine"


def test_regressor_accepts_bit_strings_and_real_mask():
    X = ["000", "011", "101", "110"]
    y = [5.0, 6.0, 4.0, 3.0]
    est = QuboRegressor(cost="contour_aware", max_iterations=500,
                        gradient_tolerance=1e-10)
    est.fit(X, y, real=[True, True, False, False])
    assert est.report_.mse_pct is not None
    assert est.model_.n == 3


def test_regressor_rejects_bad_y():
    with pytest.raises(DimensionMismatch):
        QuboRegressor().fit([[0, 1], [1, 0]], [1.0, 2.0, 3.0])


def test_observation_validation():
    with pytest.raises(ValueError):
        Observation(0, "01", 1.0, kind="synthetic")
    with pytest.raises(ValueError):
        Observation(0, "0x", 1.0)
