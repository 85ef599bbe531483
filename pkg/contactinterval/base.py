# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-

"""
Interface definition, exceptions and shared result types for all fitters.
"""

import numpy as np
import pandas as pd
from scipy import stats

#pylint: disable=R0921
#abstract class not implemented;

class FitterInterface(object):
    """
    This abstract class defines the interface implemented by all Fitters.
    """

    def fit(self, rows, **kwargs):
        """
        Fit the model to a table of pair rows.

        :param rows: the at-risk pairs.
        :type rows: :class:`contactinterval.data.PairRows`
        :returns: the fit result object.
        :raises: **ConvergenceError** if the optimizer fails.
        """
        raise NotImplementedError

    def summary(self, alpha=0.05):
        """
        Return the coefficient table of the last fit.

        :param alpha: one minus the confidence level.
        :type alpha: float
        :rtype: pandas.DataFrame
        """
        raise NotImplementedError

    def to_dict(self, alpha=0.05):
        """Return the last fit as a JSON-serializable dictionary."""
        raise NotImplementedError


class ContactIntervalError(Exception):
    """Root of all errors raised by this package.

       *exception* is the underlying cause, or None.
    """

    def __init__(self, exception, *args, **kwargs):
        super(ContactIntervalError, self).__init__(*args, **kwargs)
        self.exception = exception

    def __str__(self):

        val = " ".join(str(a) for a in self.args)
        if self.exception is None:
            return val

        return val + " " + str(self.exception)


class DataError(ContactIntervalError):
    """Input data is malformed or violates a model invariant."""


class DomainError(DataError):
    """A relative risk function was evaluated outside its domain."""


class ConvergenceError(ContactIntervalError):
    """An optimizer failed to reach its stopping criterion."""


class MonotonicityError(ConvergenceError):
    """Step halving could not increase the objective."""


class SingularInformationError(ConvergenceError):
    """The information matrix cannot be inverted.

       *condition* is the 2-norm condition number estimate.
    """

    def __init__(self, exception, condition, *args):
        super(SingularInformationError, self).__init__(exception, *args)
        self.condition = condition

    def __str__(self):
        return "%s (condition number %.3g)" % (
            super(SingularInformationError, self).__str__(), self.condition)


class UsageError(ContactIntervalError):
    """Bad command line usage."""


def normal_quantile(alpha):
    """
    Two-sided normal critical value.

    :param alpha: one minus the confidence level.
    :returns: z such that P(\\|Z\\| > z) = alpha.
    """
    return stats.norm.ppf(1.0 - alpha / 2.0)


def invert_information(info, cond_limit=1e12):
    """
    Invert an information matrix, refusing near-singular ones.

    :param info: symmetric b x b matrix.
    :param cond_limit: largest acceptable condition number.
    :raises: **SingularInformationError** if *info* is (nearly) singular.
    """
    info = np.atleast_2d(np.asarray(info, dtype=float))
    if info.size == 0:
        return np.zeros((0, 0))

    try:
        cond = np.linalg.cond(info)
    except np.linalg.LinAlgError as ex:
        raise SingularInformationError(ex, np.inf, "information matrix is singular")

    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularInformationError(None, cond, "information matrix is singular")

    cov = np.linalg.inv(info)
    return (cov + cov.T) / 2.0


class StepCumHaz(object):
    """
    Right-continuous step function for a cumulative hazard, with the
    cumulative variance estimate at each jump time.

    :param jump_times: increasing infectiousness ages.
    :param increments: nonnegative jump sizes, one per jump time.
    :param variance: cumulative variance at each jump time, or None.
    :param horizon: largest age at which any pair was at risk.
    :param stratum: stratum label.
    """

    def __init__(self, jump_times, increments, variance=None, horizon=None, stratum=0):

        self.jump_times = _frozen(jump_times)
        self.increments = _frozen(increments)
        if variance is None:
            variance = np.full(len(self.jump_times), np.nan)
        self.variance = _frozen(variance)
        self.cumhaz = _frozen(np.cumsum(self.increments))
        if horizon is None:
            horizon = self.jump_times[-1] if len(self.jump_times) else 0.0
        self.horizon = float(horizon)
        self.stratum = stratum

        if np.any(np.diff(self.jump_times) <= 0):
            raise DataError(None, "jump times must be strictly increasing")
        if np.any(self.increments < 0):
            raise DataError(None, "cumulative hazard increments must be nonnegative")

    def __len__(self):
        return len(self.jump_times)

    def __call__(self, tau):
        """Evaluate the cumulative hazard at *tau* (scalar or array)."""
        return self._step(self.cumhaz, tau)

    def variance_at(self, tau):
        """Evaluate the cumulative variance at *tau*."""
        return self._step(self.variance, tau)

    def _step(self, values, tau):
        idx = np.searchsorted(self.jump_times, np.asarray(tau, dtype=float), side="right")
        padded = np.concatenate([[0.0], values])
        return padded[idx]

    def with_variance(self, variance):
        """Return a copy carrying *variance* at the jump times."""
        return StepCumHaz(self.jump_times, self.increments, variance,
                          horizon=self.horizon, stratum=self.stratum)

    def confidence_band(self, alpha=0.05, tau=None):
        """
        Pointwise log-transformed confidence limits.

        Where the cumulative hazard is zero the band is the degenerate [0, 0].

        :param alpha: one minus the confidence level.
        :param tau: ages to evaluate at; defaults to the jump times.
        :returns: (lower, upper) arrays.
        """
        if tau is None:
            tau = self.jump_times
        est = np.atleast_1d(self(tau))
        var = np.atleast_1d(self.variance_at(tau))
        z = normal_quantile(alpha)
        lower = np.zeros_like(est)
        upper = np.zeros_like(est)
        positive = est > 0
        with np.errstate(invalid="ignore"):
            spread = np.exp(z * np.sqrt(np.maximum(var[positive], 0.0)) / est[positive])
        lower[positive] = est[positive] / spread
        upper[positive] = est[positive] * spread
        return lower, upper

    def survival(self, tau=None, method="exp"):
        """
        Survival function S(tau).

        :param method: "exp" for exp(-cumhaz), "product" for the product integral.
        """
        if tau is None:
            tau = self.jump_times
        if method == "exp":
            return np.exp(-self(tau))
        if method == "product":
            factors = np.concatenate([[1.0], np.cumprod(1.0 - np.minimum(self.increments, 1.0))])
            return factors[np.searchsorted(self.jump_times, np.asarray(tau, dtype=float), side="right")]
        raise ValueError("unknown survival method %r" % method)

    def table(self, alpha=0.05):
        """Return the `tau,cumhaz,var,lo,hi` table at the jump times."""
        lower, upper = self.confidence_band(alpha)
        return pd.DataFrame({"stratum": self.stratum,
                             "tau": self.jump_times,
                             "cumhaz": self.cumhaz,
                             "var": self.variance,
                             "lo": lower,
                             "hi": upper})


def _frozen(values):
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


#pylint: disable=R0922
#abstract class only referenced one time;
class Fitter(object):
    """
    :param name: Name of the fitter, displayed in log messages.
    :param kwargs: Any other keyword args will be stored in self.kwargs.

    This is the base implementation of the Fitter class.

    Implementations are provided for the following methods:

    * summary()
    * to_dict()
    * transmission_probability()

    The following methods must be implemented by the subclass:

    * fit()
    """

    def __init__(self, name="<unnamed>", **kwargs):
        self.name = name
        self.kwargs = kwargs
        self.result = None

    def fit(self, rows, **kwargs):
        """Fit the model.

        :raises: **NotImplementedError** must be implemented by subclass.
        """
        raise NotImplementedError

    def _require_result(self):
        if self.result is None:
            raise ContactIntervalError(None, self.name + " has not been fit")
        return self.result

    def summary(self, alpha=0.05):
        """
        Wald coefficient table: coef, se, z, p, lo, hi and, for the loglinear
        family, the hazard ratio with its limits.
        """
        result = self._require_result()
        beta = np.asarray(result.beta)
        se = np.sqrt(np.maximum(np.diag(result.cov_beta), 0.0)) if len(beta) else np.zeros(0)
        z = normal_quantile(alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            zval = beta / se
        table = pd.DataFrame({"coef": beta,
                              "se": se,
                              "z": zval,
                              "p": 2.0 * stats.norm.sf(np.abs(zval)),
                              "lo": beta - z * se,
                              "hi": beta + z * se},
                             index=pd.Index(list(result.names), name="covariate"))
        if result.spec.family == "loglinear":
            table["hr"] = np.exp(table["coef"])
            table["hr_lo"] = np.exp(table["lo"])
            table["hr_hi"] = np.exp(table["hi"])
        return table

    def baseline_table(self, alpha=0.05):
        """Concatenated baseline tables for all strata."""
        result = self._require_result()
        frames = [cumhaz.table(alpha) for cumhaz in result.baseline.values()]
        if not frames:
            return pd.DataFrame(columns=["stratum", "tau", "cumhaz", "var", "lo", "hi"])
        return pd.concat(frames, ignore_index=True)

    def transmission_probability(self, x, tau, stratum=0):
        """
        Cumulative probability of infectious contact by age *tau* in a pair
        with covariate vector *x*: 1 - exp(-r(beta'x) Lambda0(tau)).
        """
        result = self._require_result()
        eta = float(np.dot(result.beta, np.asarray(x, dtype=float))) if len(result.beta) else 0.0
        return 1.0 - np.exp(-result.spec.value(eta) * result.baseline[stratum](tau))

    def to_dict(self, alpha=0.05):
        """Return the last fit as a JSON-serializable dictionary."""
        result = self._require_result()
        table = self.summary(alpha)
        coefficients = []
        for name, row in table.iterrows():
            entry = {"name": name}
            entry.update({key: json_float(val) for key, val in row.items()})
            coefficients.append(entry)

        baseline = {}
        for stratum, cumhaz in result.baseline.items():
            frame = cumhaz.table(alpha)
            baseline[str(stratum)] = {col: [json_float(v) for v in frame[col]]
                                      for col in ("tau", "cumhaz", "var", "lo", "hi")}

        out = {"fitter": self.name,
               "relrisk": result.spec.family,
               "alpha": alpha,
               "coefficients": coefficients,
               "cov_beta": [[json_float(v) for v in row] for row in np.atleast_2d(result.cov_beta)],
               "info_kind": result.info_kind,
               "converged": bool(result.converged),
               "baseline": baseline}
        out.update(result.extra_json())
        return out


def json_float(value):
    value = float(value)
    if np.isnan(value):
        return None
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value
