# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-

"""
Relative risk functions r(beta'X).

Two families are supported:

* ``loglinear``: r(x) = exp(x), the Cox model;
* ``linear``: r(x) = 1 + x, defined for 1 + x > 0.

Both satisfy r(0) = 1. The fitters need the gradient and Hessian of
ln r(beta'X) with respect to beta; for a covariate matrix these are
returned row by row.
"""

import numpy as np

from contactinterval.base import DomainError

FAMILIES = ("loglinear", "linear")


class RelRiskSpec(object):
    """
    Relative risk family.

    :param family: "loglinear" or "linear".
    :raises: **ValueError** on an unknown family.
    """

    def __init__(self, family="loglinear"):
        if family not in FAMILIES:
            raise ValueError("unknown relative risk family %r" % family)
        self.family = family

    def __repr__(self):
        return "RelRiskSpec(%r)" % self.family

    def __eq__(self, other):
        return isinstance(other, RelRiskSpec) and other.family == self.family

    def __hash__(self):
        return hash(self.family)

    def check(self, eta):
        """
        :raises: **DomainError** if any linear predictor is outside the domain.
        """
        if self.family == "linear":
            eta = np.asarray(eta, dtype=float)
            if np.any(1.0 + eta <= 0):
                raise DomainError(None, "linear relative risk needs 1 + beta'x > 0; min 1 + beta'x = %g"
                                  % (1.0 + eta.min()))

    def value(self, eta):
        """r(eta), scalar or elementwise."""
        self.check(eta)
        if self.family == "loglinear":
            return np.exp(eta)
        return 1.0 + np.asarray(eta, dtype=float)

    def log_value(self, eta):
        """ln r(eta)."""
        self.check(eta)
        if self.family == "loglinear":
            return np.asarray(eta, dtype=float)
        return np.log1p(eta)

    def log_slope(self, eta):
        """(ln r)'(eta); the gradient of ln r(beta'x) is x times this."""
        self.check(eta)
        if self.family == "loglinear":
            return np.ones_like(np.asarray(eta, dtype=float))
        return 1.0 / (1.0 + np.asarray(eta, dtype=float))

    def log_curvature(self, eta):
        """(ln r)''(eta); the Hessian of ln r(beta'x) is x x' times this."""
        self.check(eta)
        if self.family == "loglinear":
            return np.zeros_like(np.asarray(eta, dtype=float))
        return -1.0 / (1.0 + np.asarray(eta, dtype=float)) ** 2

    def max_step(self, X, beta, direction, margin=1e-10):
        """
        Largest s in (0, 1] keeping 1 + (beta + s direction)'x > margin on
        every row of *X*. Always 1 for the loglinear family.
        """
        if self.family == "loglinear" or len(direction) == 0:
            return 1.0
        X = np.atleast_2d(X)
        slack = 1.0 + X.dot(beta) - margin
        rate = X.dot(direction)
        shrinking = rate < 0
        if not np.any(shrinking):
            return 1.0
        limit = np.min(slack[shrinking] / -rate[shrinking])
        return min(1.0, 0.99 * limit)


def as_spec(spec):
    """Return *spec* as a :class:`RelRiskSpec`, accepting a family name."""
    if isinstance(spec, RelRiskSpec):
        return spec
    return RelRiskSpec(spec)


def rr_value(spec, eta):
    """
    r(eta).

    :param spec: a :class:`RelRiskSpec` or a family name.
    :raises: **DomainError** for the linear family when eta <= -1.
    """
    return as_spec(spec).value(eta)


def rr_log_grad(spec, x, beta):
    """
    Gradient of ln r(beta'x) with respect to beta.

    :param x: covariate vector, or an n x b matrix for n rows at once.
    :returns: vector (or n x b matrix).
    """
    spec = as_spec(spec)
    x = np.asarray(x, dtype=float)
    eta = x.dot(beta)
    return x * np.expand_dims(spec.log_slope(eta), -1)


def rr_log_hess(spec, x, beta):
    """
    Hessian of ln r(beta'x) with respect to beta.

    :param x: covariate vector, or an n x b matrix.
    :returns: b x b matrix (or n x b x b array).
    """
    spec = as_spec(spec)
    x = np.asarray(x, dtype=float)
    eta = x.dot(beta)
    outer = np.einsum("...i,...j->...ij", x, x)
    return outer * spec.log_curvature(eta)[..., None, None]
