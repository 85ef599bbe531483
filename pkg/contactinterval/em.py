# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-
#pylint: disable=R0913,R0914
#too many arguments; too many locals;

"""
Fitting when who-infected-whom is not observed.

The ECM loop alternates:

* E-step: the probability that each possible infector i infected j,
  proportional to r(beta'x_ij) lambda(t_j - t_i - eps_i);
* CM1: beta maximizing the expected log partial likelihood, in which
  each candidate row is an event with mass p_ij;
* CM2: the marginal Breslow estimate of the baseline at the new beta;
* smoothing of the marginal Breslow increments into the next hazard.

Variances use the Louis information and the marginal baseline variance.
With beta held at 0 and no covariates the loop is the marginal
Nelson-Aalen estimator.
"""

import collections
import dataclasses
import itertools
import logging
import typing

import numpy as np
import pandas as pd

from contactinterval import base
from contactinterval import complete
from contactinterval import relrisk
from contactinterval.base import DataError, StepCumHaz
from contactinterval.data import InfectiousSets
from contactinterval.riskset import RiskSet
from contactinterval.smooth import HazardCurve, SmoothOptions, smooth_hazard

log = logging.getLogger(__name__)

TREE_LIMIT = 10 ** 6


class InfectorWeights(object):
    """
    Infector probabilities of each infectee, tied to the candidate rows of
    one table.

    :param rows: the pair rows the weights belong to.
    :param row_index: index of each weighted candidate row.
    :param probabilities: p_ij for each of those rows.
    """

    def __init__(self, rows, row_index, probabilities):
        self.n_rows = len(rows)
        self.row_index = np.asarray(row_index, dtype=int)
        self.probabilities = np.asarray(probabilities, dtype=float)
        self.infector = rows.infector[self.row_index]
        self.infectee = rows.susceptible[self.row_index]
        if np.any(self.probabilities < 0):
            raise DataError(None, "infector probabilities must be nonnegative")

    def __len__(self):
        return len(self.row_index)

    def __getitem__(self, j):
        sel = self.infectee == j
        return list(zip(self.infector[sel].tolist(), self.probabilities[sel].tolist()))

    def infectees(self):
        return sorted(set(self.infectee.tolist()))

    def totals(self):
        """Map infectee -> sum of its probabilities."""
        sums = collections.defaultdict(float)
        for j, p in zip(self.infectee.tolist(), self.probabilities.tolist()):
            sums[j] += p
        return dict(sums)

    def event_mass(self):
        """p_ij on candidate rows and 0 elsewhere, one value per row."""
        mass = np.zeros(self.n_rows)
        mass[self.row_index] = self.probabilities
        return mass

    def as_dict(self):
        """Map infectee -> {infector: p_ij}."""
        out = collections.defaultdict(dict)
        for i, j, p in zip(self.infector.tolist(), self.infectee.tolist(), self.probabilities.tolist()):
            out[j][i] = p
        return dict(out)

    def to_frame(self):
        """The `j,i,p_ij` weights table."""
        frame = pd.DataFrame({"j": self.infectee, "i": self.infector, "p_ij": self.probabilities})
        return frame.sort_values(["j", "i"], kind="stable").reset_index(drop=True)


def _candidate_index(rows, infectious_sets):
    index = np.flatnonzero(rows.candidate)
    known = set(infectious_sets)
    keep = np.array([int(j) in known for j in rows.susceptible[index]], dtype=bool)
    return index[keep] if len(index) else index


def _hazard_for(hazard, stratum):
    if isinstance(hazard, dict):
        return hazard.get(int(stratum))
    return hazard


def infector_probabilities(rows, infectious_sets, beta, hazard, spec):
    """
    E-step: p_ij proportional to r(beta'x_ij) lambda(tau_ij) over the
    infectious set of j, normalized per j.

    :param hazard: a :class:`contactinterval.smooth.HazardCurve` (or any
      callable), or a dict stratum -> curve.
    :rtype: :class:`InfectorWeights`
    """
    spec = relrisk.as_spec(spec)
    index = _candidate_index(rows, infectious_sets)
    eta = rows.X[index].dot(np.asarray(beta, dtype=float).reshape(rows.n_covariates))
    ages = rows.stop[index]
    strata = rows.stratum[index]
    lam = np.zeros(len(index))
    for stratum in np.unique(strata):
        sel = strata == stratum
        curve = _hazard_for(hazard, stratum)
        if curve is not None:
            lam[sel] = curve(ages[sel])
    raw = spec.value(eta) * lam

    infectee = rows.susceptible[index]
    probabilities = np.zeros(len(index))
    for j in np.unique(infectee):
        sel = infectee == j
        total = raw[sel].sum()
        if total > 0 and np.isfinite(total):
            probabilities[sel] = raw[sel] / total
        else:
            log.warning("all candidate hazards are zero for infectee %d; using uniform infector weights", j)
            probabilities[sel] = 1.0 / sel.sum()
    return InfectorWeights(rows, index, probabilities)


def expected_log_partial_likelihood(rows, weights, beta, spec, ties="efron"):
    """Partial likelihood with each candidate row an event of mass p_ij."""
    return complete.log_partial_likelihood(rows, beta, spec, ties, event_mass=weights.event_mass())


def marginal_breslow(rows, weights, beta, spec, ties="efron"):
    """
    Marginal Breslow estimate: jumps p_ij / Y(beta, tau_ij) at the candidate
    contact intervals.

    :returns: dict stratum -> StepCumHaz
    """
    return complete.breslow_baseline(rows, beta, spec, ties, event_mass=weights.event_mass())


def louis_terms(rows, weights, beta, spec, ties="efron"):
    """
    The two parts of the Louis information: the expected complete-data
    information, and the variance of the complete-data score over
    transmission trees.

    :returns: (complete information, missing information)
    """
    riskset = RiskSet(rows, beta, spec, ties, event_mass=weights.event_mass())
    info = riskset.observed_information
    index = weights.row_index
    Y, S1 = riskset.sums_at(rows.stop[index], rows.stratum[index])
    deviation = riskset.grad[index] - S1 / Y[:, None]
    p = weights.probabilities
    missing = np.einsum("n,ni,nj->ij", p, deviation, deviation)
    for j in np.unique(weights.infectee):
        sel = weights.infectee == j
        total = p[sel].dot(deviation[sel])
        missing -= np.outer(total, total)
    return info, (missing + missing.T) / 2.0


def louis_information(rows, weights, beta, spec, ties="efron"):
    """
    Observed-data information: expected complete-data information minus
    the variance of the complete-data score.
    """
    info, missing = louis_terms(rows, weights, beta, spec, ties)
    return info - missing


def marginal_baseline_variance(rows, weights, beta, cov, spec, ties="efron"):
    """
    Variance of the marginal Breslow estimate:
    (dLambda/dbeta)' cov (dLambda/dbeta) + 2 sum p / Y^2 - sum_j (sum p_.j / Y)^2.

    :returns: dict stratum -> StepCumHaz carrying the variance.
    """
    riskset = RiskSet(rows, beta, spec, ties, event_mass=weights.event_mass(), order=1)
    cov = np.asarray(cov, dtype=float).reshape(rows.n_covariates, rows.n_covariates)
    index = weights.row_index
    p = weights.probabilities
    Y, _unused = riskset.sums_at(rows.stop[index], rows.stratum[index])

    out = {}
    for stratum in riskset.strata:
        times, increments, dbeta, var_increments = riskset.jumps(stratum)
        dlambda = np.cumsum(dbeta, axis=0)
        variance = np.einsum("ni,ij,nj->n", dlambda, cov, dlambda) + 2.0 * np.cumsum(var_increments)

        sel = (rows.stratum[index] == stratum) & (p > 0)
        ages = rows.stop[index][sel]
        order = np.argsort(ages, kind="stable")
        ages = ages[order]
        share = (p[sel] / Y[sel])[order]
        owners = weights.infectee[sel][order]
        running = collections.defaultdict(float)
        squares = 0.0
        correction = np.zeros(len(times))
        k = 0
        for t_index, t in enumerate(times):
            while k < len(ages) and ages[k] <= t:
                before = running[owners[k]]
                running[owners[k]] = before + share[k]
                squares += share[k] * (2.0 * before + share[k])
                k += 1
            correction[t_index] = squares
        variance = np.maximum(variance - correction, 0.0)
        horizon = float(rows.stop[rows.stratum == stratum].max())
        out[int(stratum)] = StepCumHaz(times, increments, variance, horizon=horizon, stratum=int(stratum))
    return out


@dataclasses.dataclass(frozen=True)
class EMOptions:
    """
    ECM settings. The loop stops once, after at least ``min_iter``
    iterations, the expected log partial likelihood, beta and the
    cumulative hazard all change by less than their tolerances.
    ``fix_beta`` holds beta at 0.
    """
    min_iter: int = 2
    max_iter: int = 25
    ll_tol: float = 0.002
    beta_tol: float = 1e-3
    cumhaz_tol: float = 1e-3
    fix_beta: bool = False
    final_refit: bool = True
    smooth: SmoothOptions = dataclasses.field(default_factory=SmoothOptions)
    newton: complete.NewtonOptions = dataclasses.field(default_factory=complete.NewtonOptions)

    @property
    def ties(self):
        return self.newton.ties


@dataclasses.dataclass(frozen=True, eq=False)
class EMFitResult:
    """Estimates and diagnostics of an ECM fit."""
    beta: np.ndarray
    cov_beta: np.ndarray
    loglik: float
    converged: bool
    em_iterations: int
    baseline: typing.Dict[int, StepCumHaz]
    weights: InfectorWeights
    trace: pd.DataFrame
    hazard: typing.Dict[int, HazardCurve]
    names: typing.Tuple[str, ...]
    spec: relrisk.RelRiskSpec
    ties: str
    information: np.ndarray
    info_kind: str = "louis"

    @property
    def beta_tilde(self):
        return self.beta

    @property
    def marginal_baseline(self):
        return self.baseline

    def extra_json(self):
        return {"loglik": self.loglik,
                "em_iterations": self.em_iterations,
                "ties": self.ties,
                "trace": [{key: base.json_float(val) for key, val in row.items()}
                          for row in self.trace.to_dict("records")]}


def _sup_change(new, old):
    change = 0.0
    for stratum in set(new) | set(old):
        a, b = new.get(stratum), old.get(stratum)
        times = np.concatenate([x.jump_times for x in (a, b) if x is not None])
        if not len(times):
            continue
        va = a(times) if a is not None else 0.0
        vb = b(times) if b is not None else 0.0
        change = max(change, float(np.max(np.abs(va - vb))))
    return change


def _smooth_all(cumhaz, opts):
    return {stratum: smooth_hazard(curve, opts) for stratum, curve in cumhaz.items() if len(curve)}


def ecm_fit(rows, infectious_sets, spec, opts=None):
    """
    Run the ECM algorithm.

    Starts from beta = 0 and the constant hazard (number of infections) /
    (total pair-time at risk). After convergence beta is refit from 0 with
    the final weights held fixed, and the Louis information and marginal
    baseline variance are computed there.

    :param rows: unknown-infector pair rows.
    :param infectious_sets: :class:`contactinterval.data.InfectiousSets`.
    :param opts: :class:`EMOptions`.
    :rtype: :class:`EMFitResult`
    :raises: **DataError** if there is no infectee with a possible infector,
      **ConvergenceError** if an inner Newton-Raphson fails.
    """
    opts = opts or EMOptions()
    spec = relrisk.as_spec(spec)
    ties = opts.ties
    if not len(_candidate_index(rows, infectious_sets)):
        raise DataError(None, "no infectee with a possible infector")

    exposure = float(np.sum(rows.weight * (rows.stop - rows.start)))
    n_infections = sum(1 for _j, infectors in infectious_sets.items() if infectors)
    horizon = rows.horizon
    hazard = HazardCurve.constant(n_infections / exposure, horizon)
    beta = np.zeros(rows.n_covariates)
    cumhaz = {}
    loglik = None
    trace = []
    converged = False

    for iteration in range(1, opts.max_iter + 1):
        weights = infector_probabilities(rows, infectious_sets, beta, hazard, spec)
        mass = weights.event_mass()
        if opts.fix_beta:
            new_beta = beta
            new_loglik = complete.log_partial_likelihood(rows, beta, spec, ties, event_mass=mass)
        else:
            new_beta, riskset, _iterations, _converged = complete.newton_raphson(
                rows, spec, opts.newton, event_mass=mass, beta0=beta)
            new_loglik = riskset.loglik
        new_cumhaz = marginal_breslow(rows, weights, new_beta, spec, ties)

        if loglik is None:
            ll_change = beta_change = cumhaz_change = np.inf
        else:
            ll_change = abs(new_loglik - loglik)
            beta_change = float(np.max(np.abs(new_beta - beta), initial=0.0))
            cumhaz_change = _sup_change(new_cumhaz, cumhaz)
        trace.append({"iteration": iteration, "expected_loglik": new_loglik,
                      "beta_change": beta_change, "cumhaz_change": cumhaz_change})
        log.debug("ECM iteration %d: expected pl %.8g, |dbeta| %.3g, sup|dLambda| %.3g",
                  iteration, new_loglik, beta_change, cumhaz_change)

        beta, cumhaz, loglik = new_beta, new_cumhaz, new_loglik
        hazard = _smooth_all(cumhaz, opts.smooth)
        if (iteration >= opts.min_iter and ll_change < opts.ll_tol
                and beta_change < opts.beta_tol and cumhaz_change < opts.cumhaz_tol):
            converged = True
            break

    if not converged:
        log.warning("ECM did not converge in %d iterations", opts.max_iter)

    if opts.final_refit and not opts.fix_beta:
        beta, riskset, _iterations, _converged = complete.newton_raphson(
            rows, spec, opts.newton, event_mass=weights.event_mass())
        loglik = riskset.loglik

    if opts.fix_beta:
        cov = np.zeros((rows.n_covariates, rows.n_covariates))
        info = cov
    else:
        info = louis_information(rows, weights, beta, spec, ties)
        cov = base.invert_information(info, opts.newton.cond_limit)
    baseline = marginal_baseline_variance(rows, weights, beta, cov, spec, ties)
    log.info("ECM finished after %d iteration(s), expected pl = %.6f", len(trace), loglik)
    return EMFitResult(beta=np.asarray(beta, dtype=float), cov_beta=cov, loglik=float(loglik),
                       converged=converged, em_iterations=len(trace), baseline=baseline,
                       weights=weights, trace=pd.DataFrame(trace), hazard=hazard,
                       names=rows.names, spec=spec, ties=ties, information=info)


def marginal_nelson_aalen(rows, infectious_sets, opts=None):
    """
    Nonparametric marginal Nelson-Aalen estimate: the ECM loop with no
    covariates and beta = 0.

    :rtype: :class:`EMFitResult` with an empty coefficient vector.
    """
    opts = dataclasses.replace(opts or EMOptions(), fix_beta=True)
    return ecm_fit(rows.select_covariates(()), infectious_sets, "loglinear", opts)


def enumerate_trees(infectious_sets, weights=None, limit=TREE_LIMIT):
    """
    Yield every transmission tree with its probability.

    :param weights: :class:`InfectorWeights`, or None for uniform choice
      within each infectious set.
    :returns: iterator over (dict infectee -> infector, probability).
    :raises: **DataError** if the number of trees exceeds *limit*.
    """
    n_trees = infectious_sets.n_trees()
    if n_trees > limit:
        raise DataError(None, "%d transmission trees exceed the limit of %d" % (n_trees, limit))
    infectees = list(infectious_sets)
    table = weights.as_dict() if weights is not None else {}
    choices = []
    for j in infectees:
        infectors = infectious_sets[j]
        if weights is None:
            choices.append([(i, 1.0 / len(infectors)) for i in infectors])
        else:
            choices.append([(i, table.get(j, {}).get(i, 0.0)) for i in infectors])
    for combo in itertools.product(*choices):
        tree = {j: i for j, (i, _p) in zip(infectees, combo)}
        yield tree, float(np.prod([p for _i, p in combo]))


def tree_event_mass(rows, tree):
    """Event indicators of the candidate rows chosen by one transmission tree."""
    chosen = set(tree.items())
    return np.array([float(bool(c) and (int(j), int(i)) in chosen)
                     for i, j, c in zip(rows.infector, rows.susceptible, rows.candidate)])


def weighted_copies(rows, weights):
    """
    Materialize the weighted-copies table: each candidate row becomes an
    event copy of weight w p_ij and a censored copy of weight w (1 - p_ij).

    :rtype: :class:`contactinterval.data.PairRows`
    """
    mass = weights.event_mass()
    is_weighted = np.zeros(len(rows), dtype=bool)
    is_weighted[weights.row_index] = True
    source, event, weight = [], [], []
    for k in range(len(rows)):
        if is_weighted[k]:
            source.extend([k, k])
            event.extend([True, False])
            weight.extend([rows.weight[k] * mass[k], rows.weight[k] * (1.0 - mass[k])])
        else:
            source.append(k)
            event.append(False)
            weight.append(rows.weight[k])
    source = np.array(source, dtype=int)
    event = np.array(event, dtype=bool)
    copies = rows.take(source)
    return copies.replace(event=event, candidate=event, weight=np.array(weight))


class Fitter(base.Fitter):
    """
    :param spec: relative risk family name or spec.
    :param options: :class:`EMOptions`.

    Unknown-infector fitter. :meth:`fit` takes the pair rows and,
    optionally, the infectious sets (recovered from the candidate rows
    when omitted).
    """

    __implements__ = (base.FitterInterface,)

    def __init__(self, spec="loglinear", options=None, name="em", **kwargs):
        super(Fitter, self).__init__(name, **kwargs)
        self.spec = relrisk.as_spec(spec)
        self.options = options or EMOptions()

    def fit(self, rows, infectious_sets=None, **kwargs):
        if infectious_sets is None:
            infectious_sets = InfectiousSets.from_rows(rows)
        self.result = ecm_fit(rows, infectious_sets, self.spec, self.options)
        return self.result

