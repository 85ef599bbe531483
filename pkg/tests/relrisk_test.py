import numpy as np
import pytest

from contactinterval.base import DomainError
from contactinterval.relrisk import RelRiskSpec, rr_log_grad, rr_log_hess, rr_value

from instances import finite_difference


def values_test():

    assert rr_value("loglinear", 0.0) == 1.0
    assert rr_value("linear", 0.0) == 1.0
    assert rr_value("linear", 0.5) == 1.5
    assert abs(rr_value("loglinear", 1.0) - 2.718281828) < 1e-9


def closed_form_derivatives_test():

    np.testing.assert_allclose(rr_log_grad("linear", [1.0], [0.0]), [1.0])
    np.testing.assert_allclose(rr_log_hess("linear", [1.0], [0.0]), [[-1.0]])
    np.testing.assert_allclose(rr_log_grad("linear", [1.0], [1.0]), [0.5])
    np.testing.assert_allclose(rr_log_hess("linear", [1.0], [1.0]), [[-0.25]])

    rng = np.random.default_rng(3)
    x = rng.normal(size=3)
    beta = rng.normal(size=3)
    np.testing.assert_array_equal(rr_log_grad("loglinear", x, beta), x)
    np.testing.assert_array_equal(rr_log_hess("loglinear", x, beta), np.zeros((3, 3)))


def domain_test():

    with pytest.raises(DomainError):
        rr_value("linear", -1.0)
    with pytest.raises(DomainError):
        rr_log_grad("linear", [2.0], [-0.75])
    with pytest.raises(ValueError):
        RelRiskSpec("probit")


def finite_difference_test():

    rng = np.random.default_rng(11)
    for family in ("loglinear", "linear"):
        spec = RelRiskSpec(family)
        for _unused in range(50):
            b = int(rng.integers(1, 4))
            x = rng.uniform(0.0, 1.0, size=b)
            beta = rng.uniform(-0.3, 0.3, size=b)
            grad = finite_difference(lambda t: np.log(spec.value(x.dot(t))), beta)
            np.testing.assert_allclose(rr_log_grad(spec, x, beta), grad, rtol=1e-6, atol=1e-9)
            hess = finite_difference(lambda t: rr_log_grad(spec, x, t), beta)
            np.testing.assert_allclose(rr_log_hess(spec, x, beta), hess, rtol=1e-6, atol=1e-8)


def loglinear_second_derivative_identity_test():

    rng = np.random.default_rng(5)
    x = rng.normal(size=2)
    beta = rng.normal(size=2)
    r = rr_value("loglinear", x.dot(beta))
    second = finite_difference(lambda t: x * rr_value("loglinear", x.dot(t)), beta)
    grad = rr_log_grad("loglinear", x, beta)
    np.testing.assert_allclose(second, np.outer(grad, grad) * r, rtol=1e-6, atol=1e-8)


def matrix_input_test():

    X = np.array([[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]])
    beta = np.array([0.2, -0.1])
    grads = rr_log_grad("linear", X, beta)
    hesses = rr_log_hess("linear", X, beta)
    assert grads.shape == (3, 2)
    assert hesses.shape == (3, 2, 2)
    for k in range(3):
        np.testing.assert_allclose(grads[k], rr_log_grad("linear", X[k], beta))
        np.testing.assert_allclose(hesses[k], rr_log_hess("linear", X[k], beta))


def max_step_test():

    spec = RelRiskSpec("linear")
    X = np.array([[1.0], [2.0]])
    step = spec.max_step(X, np.array([0.0]), np.array([-1.0]))
    # 1 + 2 s must stay positive
    assert 0 < step < 0.5
    assert spec.max_step(X, np.array([0.0]), np.array([1.0])) == 1.0
    assert RelRiskSpec("loglinear").max_step(X, np.array([0.0]), np.array([-100.0])) == 1.0
