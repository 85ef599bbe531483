import math

import numpy as np
import pytest
from scipy import optimize

from contactinterval import complete
from contactinterval.base import SingularInformationError
from contactinterval.data import PairRows

import instances


def rows_from(stop, event, X, start=None, stratum=None, weight=None):
    n = len(stop)
    X = np.asarray(X, dtype=float)
    return PairRows(np.arange(n), np.arange(n) + 100, np.zeros(n) if start is None else start,
                    stop, event, event, X, ["x%d" % k for k in range(X.shape[1])],
                    stratum=stratum, weight=weight)


def five_pair_rows():
    return rows_from([1.0, 2.0, 3.0, 4.0, 5.0], [True, True, False, True, False],
                     [[0.5], [1.2], [-0.3], [0.8], [0.1]])


def single_pair_test():

    rows = rows_from([1.0], [True], [[0.3]])
    assert complete.log_partial_likelihood(rows, [0.0], "loglinear") == 0.0


def uniform_risk_set_test():

    rows = rows_from([1.0, 1.0], [True, False], [[0.0], [0.0]])
    assert abs(complete.log_partial_likelihood(rows, [0.0], "loglinear") - math.log(0.5)) < 1e-15


def efron_tie_test():

    rows = rows_from([1.0, 1.0, 3.0, 3.0], [True, True, False, False], np.zeros((4, 1)))
    efron = complete.log_partial_likelihood(rows, [0.0], "loglinear", ties="efron")
    breslow = complete.log_partial_likelihood(rows, [0.0], "loglinear", ties="breslow")
    assert abs(efron - (math.log(1 / 4.0) + math.log(1 / 3.0))) < 1e-12
    assert abs(breslow - 2 * math.log(1 / 4.0)) < 1e-12


def no_ties_policies_agree_test():

    rng = np.random.default_rng(1)
    rows = instances.random_rows(rng)
    beta = instances.random_beta(rng, 2)
    for func in (complete.log_partial_likelihood, complete.score, complete.observed_information):
        np.testing.assert_allclose(func(rows, beta, "loglinear", ties="efron"),
                                   func(rows, beta, "loglinear", ties="breslow"), rtol=1e-12)


def direct_sum_test():

    rng = np.random.default_rng(2)
    for family in ("loglinear", "linear"):
        for ties in ("efron", "breslow"):
            for _unused in range(20):
                rows = instances.random_rows(rng, n_pairs=20, n_cov=2, family=family,
                                             truncation=True, strata=2, tied=True)
                beta = instances.random_beta(rng, 2, family)
                expected = instances.direct_log_partial_likelihood(rows, beta, family, ties)
                actual = complete.log_partial_likelihood(rows, beta, family, ties)
                assert abs(actual - expected) < 1e-10 * max(1.0, abs(expected))


def derivatives_match_finite_differences_test():

    rng = np.random.default_rng(4)
    for family in ("loglinear", "linear"):
        for _unused in range(100):
            n_cov = int(rng.integers(1, 4))
            rows = instances.random_rows(rng, n_pairs=int(rng.integers(5, 51)), n_cov=n_cov,
                                         family=family, truncation=True, strata=2)
            beta = instances.random_beta(rng, n_cov, family)
            fd_score = instances.finite_difference(
                lambda b: complete.log_partial_likelihood(rows, b, family), beta)
            np.testing.assert_allclose(complete.score(rows, beta, family), fd_score, rtol=1e-6, atol=1e-7)
            fd_info = -instances.finite_difference(lambda b: complete.score(rows, b, family), beta)
            np.testing.assert_allclose(complete.observed_information(rows, beta, family), fd_info,
                                       rtol=1e-5, atol=1e-6)


def loglinear_information_identity_test():

    rng = np.random.default_rng(6)
    for _unused in range(50):
        rows = instances.random_rows(rng, n_cov=3, truncation=True, strata=3, tied=True)
        beta = instances.random_beta(rng, 3)
        observed = complete.observed_information(rows, beta, "loglinear")
        expected = complete.expected_information(rows, beta, "loglinear")
        np.testing.assert_allclose(observed, expected, rtol=0, atol=1e-10)


def singleton_risk_sets_test():

    start = np.array([0.0, 1.0, 2.0])
    rows = rows_from(start + 0.5, [True, True, True], [[0.1], [0.7], [-0.4]], start=start)
    np.testing.assert_allclose(complete.expected_information(rows, [0.3], "loglinear"), [[0.0]], atol=1e-14)


def constant_covariate_score_test():

    rows = rows_from([1.0, 2.0, 2.5, 4.0], [True, False, True, False], np.full((4, 1), 0.7))
    for beta in (-1.0, 0.0, 2.0):
        assert abs(complete.score(rows, [beta], "loglinear")[0]) < 1e-12


def weight_split_invariance_test():

    rng = np.random.default_rng(8)
    rows = instances.random_rows(rng, tied=True)
    doubled = rows.take(np.repeat(np.arange(len(rows)), 2))
    doubled = doubled.replace(weight=np.full(len(doubled), 0.5))
    beta = instances.random_beta(rng, 2)
    for ties in ("efron", "breslow"):
        assert abs(complete.log_partial_likelihood(rows, beta, "loglinear", ties)
                   - complete.log_partial_likelihood(doubled, beta, "loglinear", ties)) < 1e-10


def maximize_matches_grid_search_test():

    rows = five_pair_rows()
    fit = complete.maximize(rows, "loglinear")
    best = optimize.minimize_scalar(lambda b: -complete.log_partial_likelihood(rows, [b], "loglinear"),
                                    bounds=(-10.0, 10.0), method="bounded", options={"xatol": 1e-10})
    assert fit.converged
    assert abs(fit.beta[0] - best.x) < 1e-4
    assert np.max(np.abs(fit.score)) < 1e-8


def settled_likelihood_is_not_convergence_test(caplog):

    rows = five_pair_rows()
    strict = complete.maximize(rows, "loglinear", complete.NewtonOptions(score_tol=0.0))
    assert not strict.converged
    assert "not converged" in caplog.text
    assert complete.maximize(rows, "loglinear").converged
    assert abs(strict.beta[0] - complete.maximize(rows, "loglinear").beta[0]) < 1e-8


def fit_result_test():

    rng = np.random.default_rng(9)
    rows = instances.random_rows(rng, n_pairs=60, n_cov=2)
    fit = complete.maximize(rows, "loglinear")
    np.testing.assert_allclose(fit.cov_beta, fit.cov_beta.T)
    assert np.all(np.linalg.eigvalsh(fit.cov_beta) >= 0)
    assert fit.info_kind == "observed"
    assert complete.NewtonOptions().information_kind("linear") == "expected"
    assert complete.NewtonOptions(info_kind="observed").information_kind("linear") == "observed"
    with pytest.raises(ValueError):
        complete.NewtonOptions(ties="exact")


def order_and_stratum_invariance_test():

    rng = np.random.default_rng(10)
    rows = instances.random_rows(rng, n_pairs=40, strata=2)
    fit = complete.maximize(rows, "loglinear")
    shuffled = rows.take(rng.permutation(len(rows)))
    relabeled = rows.replace(stratum=1 - rows.stratum)
    np.testing.assert_allclose(complete.maximize(shuffled, "loglinear").beta, fit.beta, rtol=0, atol=1e-10)
    np.testing.assert_allclose(complete.maximize(relabeled, "loglinear").beta, fit.beta, rtol=0, atol=1e-10)


def constant_column_is_singular_test():

    rng = np.random.default_rng(12)
    rows = instances.random_rows(rng, n_cov=1)
    X = np.column_stack([rows.X, np.ones(len(rows))])
    with pytest.raises(SingularInformationError):
        complete.maximize(rows.replace(X=X, names=("x0", "const")), "loglinear")


def breslow_constant_risk_set_test():

    # ten at risk at both event ages, one entering late
    stop = np.array([1.0, 2.0] + [5.0] * 9)
    start = np.zeros(11)
    start[-1] = 1.5
    event = np.zeros(11, dtype=bool)
    event[:2] = True
    rows = rows_from(stop, event, np.zeros((11, 0)), start=start)
    cumhaz = complete.breslow_baseline(rows, [], "loglinear")[0]
    assert abs(cumhaz(2.0) - 0.2) < 1e-15
    assert cumhaz(0.5) == 0.0
    assert abs(cumhaz(1.0) - 0.1) < 1e-15


def nelson_aalen_reduction_test():

    rng = np.random.default_rng(13)
    for _unused in range(100):
        rows = instances.random_rows(rng, truncation=True)
        cumhaz = complete.breslow_baseline(rows, np.zeros(2), "loglinear")[0]
        ages, expected, _var, _deriv = instances.direct_breslow(rows, np.zeros(2), "loglinear")
        np.testing.assert_array_equal(cumhaz.jump_times, ages)
        np.testing.assert_allclose(cumhaz.cumhaz, expected, rtol=1e-13)


def baseline_variance_test():

    rng = np.random.default_rng(14)
    rows = instances.random_rows(rng, n_pairs=40)
    fit = complete.maximize(rows, "loglinear")
    ages, cumhaz, second, deriv = instances.direct_breslow(rows, fit.beta, "loglinear")

    known = complete.baseline_variance(rows, fit, include_beta=False)[0]
    np.testing.assert_allclose(known.variance, second, rtol=1e-12)

    full = complete.baseline_variance(rows, fit)[0]
    expected = np.einsum("ni,ij,nj->n", deriv, fit.cov_beta, deriv) + second
    np.testing.assert_allclose(full.jump_times, ages)
    np.testing.assert_allclose(full.cumhaz, cumhaz, rtol=1e-12)
    np.testing.assert_allclose(full.variance, expected, rtol=1e-10)
    np.testing.assert_allclose(fit.baseline[0].variance, expected, rtol=1e-10)


def baseline_ci_test():

    rows = five_pair_rows()
    fit = complete.maximize(rows, "loglinear")
    cumhaz = fit.baseline[0]
    lower, upper = complete.baseline_ci(cumhaz, 0.05, [0.5, 1.0, 4.5])
    assert lower[0] == upper[0] == 0.0
    assert np.all(lower[1:] < cumhaz([1.0, 4.5]))
    assert np.all(upper[1:] > cumhaz([1.0, 4.5]))
    np.testing.assert_allclose(np.log(cumhaz([1.0, 4.5])) - np.log(lower[1:]),
                               np.log(upper[1:]) - np.log(cumhaz([1.0, 4.5])))


def fitter_summary_test():

    rng = np.random.default_rng(15)
    rows = instances.random_rows(rng, n_pairs=60, n_cov=2)
    fitter = complete.Fitter("loglinear")
    fitter.fit(rows)
    table = fitter.summary()
    assert list(table.index) == ["x0", "x1"]
    np.testing.assert_allclose(table["hr"], np.exp(table["coef"]))
    payload = fitter.to_dict()
    assert payload["relrisk"] == "loglinear"
    assert payload["converged"] is True
    assert set(payload["baseline"]["0"]) == {"tau", "cumhaz", "var", "lo", "hi"}
    probability = fitter.transmission_probability([0.0, 0.0], fitter.result.baseline[0].jump_times)
    np.testing.assert_allclose(probability, 1.0 - np.exp(-fitter.result.baseline[0].cumhaz))
