# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-
#pylint: disable=R0913
#too many arguments;

"""
Fitting when who-infected-whom is observed.

The log partial likelihood, score and information come from
:class:`contactinterval.riskset.RiskSet`. :func:`maximize` runs
Newton-Raphson with step halving from beta = 0 and returns a
:class:`FitResult` carrying the Breslow baseline with its variance.

Example::

    rows, sets = data.build_pair_rows(records, contacts, data.PairPolicy(mode="complete"))
    fitter = complete.Fitter("loglinear")
    fitter.fit(rows)
    print(fitter.summary())
"""

import dataclasses
import logging
import typing

import numpy as np

from contactinterval import base
from contactinterval import relrisk
from contactinterval.base import (ConvergenceError, DataError, DomainError,
                                  MonotonicityError, StepCumHaz)
from contactinterval.riskset import TIES, RiskSet

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class NewtonOptions:
    """
    Newton-Raphson settings.

    ``info_kind`` picks the information used for the step and for the
    covariance; None means observed for the loglinear family and expected
    for the linear family.
    """
    ties: str = "efron"
    max_iter: int = 50
    max_halvings: int = 30
    pl_tol: float = 1e-9
    score_tol: float = 1e-8
    polish_steps: int = 3
    info_kind: typing.Optional[str] = None
    cond_limit: float = 1e12
    margin: float = 1e-10

    def __post_init__(self):
        if self.ties not in TIES:
            raise ValueError("ties must be one of %s, not %r" % (", ".join(TIES), self.ties))
        if self.info_kind not in (None, "observed", "expected"):
            raise ValueError("info_kind must be 'observed' or 'expected', not %r" % self.info_kind)

    def information_kind(self, spec):
        if self.info_kind is not None:
            return self.info_kind
        return "observed" if relrisk.as_spec(spec).family == "loglinear" else "expected"


@dataclasses.dataclass(frozen=True, eq=False)
class FitResult:
    """Coefficients, covariance and baseline of a complete-data fit."""
    beta: np.ndarray
    cov_beta: np.ndarray
    loglik: float
    info_kind: str
    iterations: int
    converged: bool
    baseline: typing.Dict[int, StepCumHaz]
    names: typing.Tuple[str, ...]
    spec: relrisk.RelRiskSpec
    ties: str
    score: np.ndarray
    information: np.ndarray

    @property
    def beta_hat(self):
        return self.beta

    def extra_json(self):
        return {"loglik": self.loglik,
                "iterations": self.iterations,
                "ties": self.ties,
                "max_abs_score": float(np.max(np.abs(self.score), initial=0.0))}


def log_partial_likelihood(rows, beta, spec, ties="efron", event_mass=None):
    """
    Log partial likelihood pl(beta).

    :raises: **DataError** on an empty risk set at an event age,
      **DomainError** for a linear relative risk outside its domain.
    """
    return RiskSet(rows, beta, spec, ties, event_mass, order=0).loglik


def score(rows, beta, spec, ties="efron", event_mass=None):
    """Score vector U(beta)."""
    return RiskSet(rows, beta, spec, ties, event_mass, order=1).score


def observed_information(rows, beta, spec, ties="efron", event_mass=None):
    """Minus the Hessian of pl(beta)."""
    return RiskSet(rows, beta, spec, ties, event_mass).observed_information


def expected_information(rows, beta, spec, ties="efron", event_mass=None):
    """Sum over event ages of the risk-set covariance of d/dbeta ln r."""
    return RiskSet(rows, beta, spec, ties, event_mass).expected_information


def _max_abs(vec):
    return float(np.max(np.abs(vec), initial=0.0))


def _score_settled(riskset, opts):
    """Converged only if the score is small, however flat pl has become."""
    largest = _max_abs(riskset.score)
    if largest < opts.score_tol:
        return True
    log.warning("partial likelihood stopped changing but max|U| = %.3g is above %.3g; "
                "reporting the fit as not converged", largest, opts.score_tol)
    return False


def newton_raphson(rows, spec, opts=None, event_mass=None, beta0=None):
    """
    Maximize the (weighted) log partial likelihood.

    Each step solves I d = U with the information named by the options and
    halves the step until pl does not decrease. For the linear family a
    step is first shortened to keep 1 + beta'x > margin on every row.

    Stops when max|U| < score_tol, or a few polishing steps after |dpl|
    drops below pl_tol; converged is true only if max|U| < score_tol.

    :returns: (beta, riskset at beta, iterations, converged)
    :raises: **DataError** if there is no event, **SingularInformationError**,
      **MonotonicityError** after too many halvings, **ConvergenceError**
      after the iteration limit.
    """
    opts = opts or NewtonOptions()
    spec = relrisk.as_spec(spec)
    kind = opts.information_kind(spec)
    beta = np.zeros(rows.n_covariates) if beta0 is None else np.array(beta0, dtype=float)
    current = RiskSet(rows, beta, spec, opts.ties, event_mass)
    if current.n_events <= 0:
        raise DataError(None, "no event rows to fit")

    polishing = None
    for iteration in range(1, opts.max_iter + 1):
        U = current.score
        if _max_abs(U) < opts.score_tol:
            return beta, current, iteration - 1, True
        if polishing is not None and polishing >= opts.polish_steps:
            return beta, current, iteration - 1, _score_settled(current, opts)

        info = current.information(kind)
        direction = base.invert_information(info, opts.cond_limit).dot(U)
        step = spec.max_step(rows.X, beta, direction, opts.margin)
        slack = 1e-12 * max(1.0, abs(current.loglik))
        for _unused in range(opts.max_halvings + 1):
            candidate = beta + step * direction
            try:
                trial = RiskSet(rows, candidate, spec, opts.ties, event_mass)
            except DomainError:
                trial = None
            if trial is not None and trial.loglik >= current.loglik - slack:
                break
            step /= 2.0
        else:
            raise MonotonicityError(None, "step halving failed to increase the partial likelihood "
                                    "after %d halvings" % opts.max_halvings)

        change = trial.loglik - current.loglik
        log.debug("newton iteration %d: pl %.10g change %.3g step %.3g max|U| %.3g",
                  iteration, trial.loglik, change, step, _max_abs(U))
        beta, current = candidate, trial
        if polishing is not None:
            polishing += 1
        elif abs(change) < opts.pl_tol:
            polishing = 0

    if polishing is not None or _max_abs(current.score) < opts.score_tol:
        return beta, current, opts.max_iter, _score_settled(current, opts)
    raise ConvergenceError(None, "Newton-Raphson did not converge in %d iterations" % opts.max_iter)


def _baselines(riskset, cov=None, horizons=None):
    baseline = {}
    for stratum in riskset.strata:
        times, increments, dbeta, var_increments = riskset.jumps(stratum)
        variance = None
        if cov is not None:
            dlambda = np.cumsum(dbeta, axis=0)
            variance = np.einsum("ni,ij,nj->n", dlambda, cov, dlambda) + np.cumsum(var_increments)
        horizon = None if horizons is None else horizons.get(stratum)
        baseline[int(stratum)] = StepCumHaz(times, increments, variance, horizon=horizon, stratum=int(stratum))
    return baseline


def _horizons(rows):
    return {int(s): float(rows.stop[rows.stratum == s].max()) for s in np.unique(rows.stratum)}


def breslow_baseline(rows, beta, spec, ties="efron", event_mass=None):
    """
    Breslow estimate of the baseline cumulative hazard in each stratum.

    The jump at each event age u is the event mass at u over Y(beta, u);
    at beta = 0 this is the Nelson-Aalen estimate.

    :returns: dict stratum -> :class:`contactinterval.base.StepCumHaz`
    """
    riskset = RiskSet(rows, beta, spec, ties, event_mass, order=0)
    return _baselines(riskset, horizons=_horizons(rows))


def baseline_variance(rows, fit, event_mass=None, include_beta=True):
    """
    Variance of the Breslow estimate,
    (dLambda/dbeta)' cov (dLambda/dbeta) + sum dN / Y^2.

    :param fit: a :class:`FitResult`.
    :param include_beta: False drops the first term, as if beta were known.
    :returns: dict stratum -> StepCumHaz carrying the variance.
    """
    riskset = RiskSet(rows, fit.beta, fit.spec, fit.ties, event_mass, order=1)
    cov = fit.cov_beta if include_beta else np.zeros_like(fit.cov_beta)
    return _baselines(riskset, cov=np.atleast_2d(cov).reshape(len(fit.beta), len(fit.beta)),
                      horizons=_horizons(rows))


def baseline_ci(cumhaz, alpha=0.05, tau=None):
    """
    Log-transformed pointwise confidence limits, Lambda exp(+-z sigma / Lambda).
    The band is [0, 0] where Lambda is 0.

    :returns: (lower, upper)
    """
    return cumhaz.confidence_band(alpha, tau)


def maximize(rows, spec, opts=None, event_mass=None, beta0=None):
    """
    Fit beta by Newton-Raphson and estimate the baseline.

    :param rows: complete-data pair rows (or weighted rows with *event_mass*).
    :param spec: relative risk family.
    :param opts: :class:`NewtonOptions`.
    :rtype: :class:`FitResult`
    """
    opts = opts or NewtonOptions()
    spec = relrisk.as_spec(spec)
    beta, riskset, iterations, converged = newton_raphson(rows, spec, opts, event_mass, beta0)
    kind = opts.information_kind(spec)
    info = riskset.information(kind)
    cov = base.invert_information(info, opts.cond_limit)
    baseline = _baselines(riskset, cov=cov, horizons=_horizons(rows))
    log.info("fit converged in %d iteration(s), pl = %.6f", iterations, riskset.loglik)
    return FitResult(beta=beta, cov_beta=cov, loglik=riskset.loglik, info_kind=kind,
                     iterations=iterations, converged=converged, baseline=baseline,
                     names=rows.names, spec=spec, ties=opts.ties, score=riskset.score,
                     information=info)


class Fitter(base.Fitter):
    """
    :param spec: relative risk family name or spec.
    :param options: :class:`NewtonOptions`.

    Complete-data fitter: partial likelihood for beta and the Breslow
    baseline.
    """

    __implements__ = (base.FitterInterface,)

    def __init__(self, spec="loglinear", options=None, name="complete", **kwargs):
        super(Fitter, self).__init__(name, **kwargs)
        self.spec = relrisk.as_spec(spec)
        self.options = options or NewtonOptions()

    def fit(self, rows, **kwargs):
        self.result = maximize(rows, self.spec, self.options, **kwargs)
        return self.result
