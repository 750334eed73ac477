import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hazardbench.base import (ConvergenceError, DimensionMismatchError, NumericalError,
                              UnfittableError)
from hazardbench.dataset import SplitSpec, SurvivalDataset, standardize, train_test_split
from hazardbench.linear_models import (AalenModel, CoxModel, EfronTerms, WeibullAftModel,
                                       aalen_fit, cox_fit, cox_partial_loglik_and_gradient,
                                       weibull_fit)
from hazardbench.metrics import StepFunction, concordance_index
from oracles import (central_difference, cox_binary_grid_mle, cox_efron_loglik_eta,
                     max_relative_error, simulate_cox_binary, simulate_weibull,
                     weibull_scipy_mle)


def ds(X, time, event):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return SurvivalDataset(X, np.asarray(time, float), np.asarray(event, bool),
                           tuple(f"x{j}" for j in range(X.shape[1])))


def random_cox_instance(rng):
    n = int(rng.integers(3, 26))
    m = int(rng.integers(1, 5))
    X = rng.normal(size=(n, m))
    time = rng.integers(1, max(2, n // 2) + 1, size=n).astype(float)
    event = rng.random(n) < 0.7
    event[0] = True
    beta = rng.normal(scale=0.7, size=m)
    return ds(X, time, event), beta


# --- Cox partial likelihood -------------------------------------------------

def test_efron_loglik_matches_naive(rng):
    for _ in range(100):
        data, beta = random_cox_instance(rng)
        eta = data.X @ beta
        ll, _ = EfronTerms(data.time, data.event).evaluate(eta)
        assert ll == pytest.approx(cox_efron_loglik_eta(eta, data.time, data.event), rel=1e-12)


def test_cox_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(60):
        data, beta = random_cox_instance(rng)
        _, grad = cox_partial_loglik_and_gradient(beta, data)
        num = central_difference(lambda b: cox_partial_loglik_and_gradient(b, data)[0], beta)
        worst = max(worst, max_relative_error(grad, num, floor=1e-3))
    assert worst < 1e-6


def test_cox_hessian_matches_finite_differences(rng):
    for _ in range(30):
        data, beta = random_cox_instance(rng)
        X = data.X - data.X.mean(axis=0)
        terms = EfronTerms(data.time, data.event)
        _, _, _, hess = terms.evaluate(X @ beta, X, hessian=True)
        for k in range(len(beta)):
            col = central_difference(lambda b: terms.evaluate(X @ b, X)[2][k], beta)
            assert max_relative_error(hess[k], col, floor=1e-3) < 1e-6


def test_loglik_at_zero_is_minus_sum_log_riskset():
    time = np.array([5.0, 1, 3, 4, 2, 6])
    event = np.array([True, True, False, True, True, False])
    ll, grad = cox_partial_loglik_and_gradient([0.0], ds(np.arange(6.0), time, event))
    sizes = [(time >= t).sum() for t in time[event]]
    assert ll == pytest.approx(-np.sum(np.log(sizes)), rel=1e-14)


def test_all_censored_gives_zero():
    data = ds(np.random.default_rng(0).normal(size=(8, 2)), np.arange(1.0, 9), np.zeros(8))
    ll, grad = cox_partial_loglik_and_gradient([0.3, -1.0], data)
    assert ll == 0.0 and np.all(grad == 0.0)


# --- Cox fitting ------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cox_recovery_matches_grid_search(seed):
    x, time, event = simulate_cox_binary(seed)
    model = cox_fit(ds(x, time, event))
    beta = model.coefficients[0]
    assert beta == pytest.approx(cox_binary_grid_mle(x, time, event), abs=1e-4)
    assert model.convergence.converged and model.convergence.gradient_norm <= 1e-9
    # within three standard errors of the truth
    assert abs(beta - 0.7) < 3 * 0.045


def test_cox_null_covariate_near_zero():
    rng = np.random.default_rng(5)
    n = 1000
    time = rng.exponential(size=n)
    x = rng.permutation(np.repeat([0.0, 1.0], n // 2))
    model = cox_fit(ds(x, time, np.ones(n)))
    assert abs(model.coefficients[0]) < 3 * 2 / np.sqrt(n)


def test_cox_monotone_likelihood_flag():
    model = cox_fit(ds([1.0, 0.0], [1.0, 2.0], [True, True]))
    assert model.convergence.monotone_likelihood
    assert model.coefficients[0] > 20


def test_cox_loglik_non_decreasing_across_iterations(rng):
    data = ds(rng.normal(size=(60, 3)), rng.integers(1, 20, 60), rng.random(60) < 0.7)
    lls = [cox_fit(data, max_iter=k, tolerance=0.0).loglik
           for k in range(1, 8) if _fits(data, k)]
    assert np.all(np.diff(lls) >= -1e-12)


def _fits(data, k):
    try:
        cox_fit(data, max_iter=k, tolerance=0.0)
        return True
    except ConvergenceError:
        return False


def test_cox_predict_risk_examples():
    model = CoxModel(np.array([1.0, 0.0]), np.array([0.5, -1.0]), StepFunction([], [], 0.0),
                     None)
    assert model.predict_risk([[0.5, -1.0]])[0] == 0.0
    assert model.predict_risk([[2.5, 98.0]])[0] == 2.0
    with pytest.raises(DimensionMismatchError):
        model.predict_risk([[1.0, 2.0, 3.0]])


def test_cox_affine_rescaling_keeps_ranking(rng):
    X = rng.normal(size=(120, 3))
    time = rng.exponential(np.exp(-X[:, 0]))
    event = rng.random(120) < 0.8
    a = cox_fit(ds(X, time, event))
    X2 = X.copy()
    X2[:, 1] = 7.5 * X2[:, 1] - 3.0
    b = cox_fit(ds(X2, time, event))
    assert b.coefficients[1] == pytest.approx(a.coefficients[1] / 7.5, rel=1e-6)
    np.testing.assert_array_equal(np.argsort(a.predict_risk(X)), np.argsort(b.predict_risk(X2)))


def test_cox_standardization_toggle_keeps_ranking(pbc):
    train, test = train_test_split(pbc, SplitSpec(3))
    strain, stest, _ = standardize(train, test)
    raw = cox_fit(train).predict_risk(test.X)
    std = cox_fit(strain).predict_risk(stest.X)
    np.testing.assert_allclose(raw, std, rtol=1e-6, atol=1e-8)


def test_cox_errors():
    with pytest.raises(UnfittableError):
        cox_fit(ds([1.0, 2.0, 3.0], [1, 2, 3], [False, True, False]))
    with pytest.raises(NumericalError, match="x1"):
        cox_fit(ds(np.column_stack([[1.0, 2, 3, 4], [2.0, 4, 6, 8]]), [1, 2, 3, 4], [1, 1, 1, 1]))


def test_breslow_baseline_at_zero_coefficients_is_nelson_aalen(rng):
    from hazardbench.metrics import nelson_aalen
    X = rng.normal(size=(50, 1))
    time = rng.integers(1, 15, 50).astype(float)
    event = rng.random(50) < 0.7
    model = cox_fit(ds(X, time, event), max_iter=0, tolerance=np.inf)
    na = nelson_aalen(time, event)
    np.testing.assert_allclose(model.baseline_cumhaz.values, na.values)


# --- Aalen ------------------------------------------------------------------

def test_aalen_knots_are_event_times(rng):
    X = rng.normal(size=(80, 2))
    time = rng.integers(1, 30, 80).astype(float)
    event = rng.random(80) < 0.6
    model = aalen_fit(ds(X, time, event))
    for b in model.cumulative_coeffs:
        np.testing.assert_array_equal(b.knots, np.unique(time[event]))


def test_aalen_constant_hazard_slope():
    rng = np.random.default_rng(2)
    n, h = 2000, 0.3
    time = rng.exponential(1 / h, size=n)
    model = aalen_fit(ds(np.zeros(n), time, np.ones(n)))
    grid = np.linspace(0.5, 3.0, 6)
    slope = np.polyfit(grid, [model.cumulative_coeffs[0](t) for t in grid], 1)[0]
    assert slope == pytest.approx(h, rel=0.2)


def test_aalen_hand_example():
    # five subjects, one covariate, no ridge
    x = np.array([0.0, 1.0, 0.0, 1.0, 2.0])
    time = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    event = np.array([True, True, False, True, False])
    model = aalen_fit(ds(x, time, event), ridge=0.0, risk_eval_time=4.0)
    # increments: least-squares of dN on [1, x] over the at-risk rows
    incs = []
    for t in (1.0, 2.0, 4.0):
        at = time >= t
        Z = np.column_stack([np.ones(at.sum()), x[at]])
        dn = ((time == t) & event)[at].astype(float)
        incs.append(np.linalg.solve(Z.T @ Z, Z.T @ dn))
    B = np.sum(incs, axis=0)
    expect = B[0] + B[1] * x
    np.testing.assert_allclose(model.predict_risk(x[:, None]), expect, atol=1e-12)
    assert model.predict_risk(np.zeros((1, 1)))[0] == pytest.approx(B[0])
    early = AalenModel(model.cumulative_coeffs, 0.5)
    assert np.all(early.predict_risk(x[:, None]) == 0.0)


def test_aalen_rank_deficient_design_is_not_fatal():
    # a constant covariate makes every at-risk design singular
    time = np.arange(1.0, 11)
    model = aalen_fit(ds(np.ones(10), time, np.ones(10)))
    assert all(np.all(np.isfinite(b.values)) for b in model.cumulative_coeffs)


def test_aalen_no_events():
    with pytest.raises(UnfittableError):
        aalen_fit(ds([1.0, 2.0], [1.0, 2.0], [False, False]))


# --- Weibull ----------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1])
def test_weibull_recovery_matches_scipy(seed):
    x, time, event = simulate_weibull(seed, n=2000)
    model = weibull_fit(ds(x, time, event))
    b0, b, rho = weibull_scipy_mle(x, time, event)
    assert model.intercept == pytest.approx(b0, abs=1e-5)
    assert model.coefficients[0] == pytest.approx(b[0], abs=1e-5)
    assert model.shape == pytest.approx(rho, rel=1e-5)
    assert model.gradient_norm <= 1e-9


def test_weibull_exponential_data_shape_near_one():
    x, time, event = simulate_weibull(7, n=5000, rho=1.0)
    assert weibull_fit(ds(x, time, event)).shape == pytest.approx(1.0, rel=0.1)


def test_weibull_gradient_matches_finite_differences(rng):
    from hazardbench.linear_models.weibull import weibull_loglik
    for _ in range(20):
        n = 30
        Z = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
        log_t = np.log(rng.exponential(size=n))
        event = rng.random(n) < 0.7
        p = rng.normal(scale=0.3, size=4)
        _, grad, hess = weibull_loglik(p, Z, log_t, event)
        f = lambda q: weibull_loglik(q, Z, log_t, event, derivatives=False)
        assert max_relative_error(grad, central_difference(f, p), floor=1e-3) < 1e-6
        h_num = np.array([central_difference(
            lambda q: weibull_loglik(q, Z, log_t, event)[1][k], p) for k in range(4)])
        assert max_relative_error(hess, h_num, floor=1e-3) < 1e-6


def test_weibull_survival_is_valid():
    x, time, event = simulate_weibull(3, n=500)
    model = weibull_fit(ds(x, time, event))
    t = np.concatenate([[0.0], np.sort(time), [1e6]])
    s = model.survival(t, np.array([[-1.0], [0.0], [2.0]]))
    assert np.all(s[:, 0] == 1.0)
    assert np.all(np.diff(s, axis=1) <= 0)
    assert np.all(s[:, -1] < 1e-12)


def test_weibull_risk_conventions(rng):
    m = WeibullAftModel(1.0, np.array([0.0, 0.0]), 1.3)
    assert np.ptp(m.predict_risk(rng.normal(size=(5, 2)))) == 0.0
    m = WeibullAftModel(0.2, np.array([np.log(2.0)]), 1.3)
    r = m.predict_risk([[0.0], [1.0]])
    assert r[0] - r[1] == pytest.approx(np.log(2.0))
    m = WeibullAftModel(0.2, np.array([0.4, -0.9]), 0.7)
    X = rng.normal(size=(40, 2))
    np.testing.assert_array_equal(np.argsort(m.predict_risk(X)),
                                  np.argsort(m.predict_median(X))[::-1])


def test_weibull_errors():
    with pytest.raises(ValueError):
        weibull_fit(ds([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], [1, 1, 1]))
    with pytest.raises(UnfittableError):
        weibull_fit(ds([0.0, 1.0, 2.0], [1.0, 1.0, 2.0], [1, 0, 0]))
    x, time, event = simulate_weibull(0, n=200)
    with pytest.raises(ConvergenceError) as err:
        weibull_fit(ds(x, time, event), max_iter=1)
    assert err.value.gradient_norm > 0 and err.value.last_iterate is not None


def test_weibull_converges_when_gain_is_below_rounding(pbc):
    # this split once stalled at gradient 3.7e-9: the remaining likelihood
    # gain was smaller than the rounding error of the likelihood itself
    train, test = train_test_split(pbc, SplitSpec(10))
    train, _, _ = standardize(train, test)
    model = weibull_fit(train)
    assert model.gradient_norm <= 1e-9


# --- shared contract --------------------------------------------------------

@pytest.mark.parametrize("fit", [cox_fit, aalen_fit, weibull_fit])
def test_train_test_isolation(fit, pbc):
    train, test = train_test_split(pbc, SplitSpec(0))
    other = test.with_features(test.X[::-1] * 3.0 + 1.0)
    tr_a, te_a, _ = standardize(train, test)
    tr_b, _, _ = standardize(train, other)
    np.testing.assert_array_equal(tr_a.X, tr_b.X)
    np.testing.assert_array_equal(fit(tr_a).predict_risk(te_a.X), fit(tr_b).predict_risk(te_a.X))


@pytest.mark.parametrize("fit,cls", [(cox_fit, CoxModel), (aalen_fit, AalenModel),
                                     (weibull_fit, WeibullAftModel)])
def test_json_roundtrip(fit, cls, gbcsg2):
    model = fit(gbcsg2)
    back = cls.from_json(json.loads(json.dumps(model.to_json())))
    np.testing.assert_array_equal(back.predict_risk(gbcsg2.X), model.predict_risk(gbcsg2.X))


@pytest.mark.parametrize("fit", [cox_fit, aalen_fit, weibull_fit])
def test_linear_models_beat_random_on_pbc(fit, pbc):
    train, test = train_test_split(pbc, SplitSpec(1))
    train, test, _ = standardize(train, test)
    risk = fit(train).predict_risk(test.X)
    assert concordance_index(test.time, test.event, risk).index > 0.7


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 50.0), st.floats(-10.0, 10.0))
def test_cox_affine_feature_property(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2))
    time = rng.exponential(np.exp(-0.5 * X[:, 0]))
    event = rng.random(40) < 0.8
    a = cox_fit(ds(X, time, event))
    b = cox_fit(ds(X * [scale, 1.0] + [shift, 0.0], time, event))
    if a.convergence.monotone_likelihood or b.convergence.monotone_likelihood:
        return
    assert b.coefficients[0] * scale == pytest.approx(a.coefficients[0], rel=1e-6, abs=1e-9)
    np.testing.assert_allclose(a.predict_risk(X), b.predict_risk(X * [scale, 1.0] + [shift, 0.0]),
                               rtol=1e-6, atol=1e-8)
