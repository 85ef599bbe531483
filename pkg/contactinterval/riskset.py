# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-

"""
Risk-set sums on the infectiousness-age time scale.

A row contributes a risk weight w and an event mass e. In complete-data
mode e = w for event rows and 0 otherwise; in the unknown-infector mode
the event mass of a candidate row is its infector probability. A row is
at risk at age u iff start < u <= stop, and all sums are formed within
stratum.

With a(row) = w r(beta'x) and g = d/dbeta ln r(beta'x)::

    Y(u)   = sum a
    S1(u)  = sum a g
    S2(u)  = sum a g g'
    S2H(u) = sum a d2/dbeta2 ln r

Tied event ages are expanded into copies: one copy with the full
denominator for Breslow ties, or d copies whose k-th denominator
subtracts k/d of the tied event mass for Efron ties.
"""

import math

import numpy as np

from contactinterval import relrisk
from contactinterval.base import DataError

TIES = ("efron", "breslow")


def _scale(factor, values):
    return factor.reshape((-1,) + (1,) * (values.ndim - 1)) * values


def _suffix_sums(values):
    """Sums of values[k:] for k = 0..n, with a trailing zero."""
    tail = np.zeros((1,) + values.shape[1:])
    if len(values) == 0:
        return tail
    return np.concatenate([np.cumsum(values[::-1], axis=0)[::-1], tail])


class _StratumSums(object):
    """Sorted suffix sums of one stratum's contributions."""

    def __init__(self, start, stop, contributions):
        order = np.argsort(stop, kind="stable")
        self.stop = stop[order]
        self.by_stop = [_suffix_sums(c[order]) for c in contributions]
        self.truncated = bool(np.any(start > 0))
        if self.truncated:
            order = np.argsort(start, kind="stable")
            self.start = start[order]
            self.by_start = [_suffix_sums(c[order]) for c in contributions]

    def at(self, times):
        """Sums over rows with start < u <= stop, for each u in *times*."""
        idx = np.searchsorted(self.stop, times, side="left")
        sums = [s[idx] for s in self.by_stop]
        if self.truncated:
            idx = np.searchsorted(self.start, times, side="left")
            sums = [s - t[idx] for s, t in zip(sums, self.by_start)]
        return sums


class RiskSet(object):
    """
    Partial likelihood and its derivatives for one table of pair rows at
    one coefficient vector.

    :param rows: the pair rows.
    :type rows: :class:`contactinterval.data.PairRows`
    :param beta: coefficient vector.
    :param spec: a :class:`contactinterval.relrisk.RelRiskSpec` or family name.
    :param ties: "efron" or "breslow".
    :param event_mass: event mass per row; defaults to weight times event.
    :param order: 0 computes the log partial likelihood only, 1 adds the
      score, 2 adds both information matrices.
    :raises: **DataError** on an empty risk set at an event age,
      **DomainError** for a linear relative risk outside its domain.
    """

    def __init__(self, rows, beta, spec, ties="efron", event_mass=None, order=2):

        if ties not in TIES:
            raise ValueError("unknown tie policy %r" % ties)
        spec = relrisk.as_spec(spec)
        b = rows.n_covariates
        beta = np.asarray(beta, dtype=float).reshape(b)
        weight = rows.weight
        if event_mass is None:
            event_mass = weight * rows.event
        event_mass = np.asarray(event_mass, dtype=float)
        if event_mass.shape != weight.shape:
            raise ValueError("event mass needs one value per row")

        self.rows = rows
        self.spec = spec
        self.beta = beta
        self.ties = ties
        self.order = order
        self.event_mass = event_mass

        X = rows.X
        eta = X.dot(beta)
        self.log_r = spec.log_value(eta)
        self.r = spec.value(eta)
        self.grad = X * spec.log_slope(eta)[:, None]
        self.hess = np.einsum("ni,nj->nij", X, X) * spec.log_curvature(eta)[:, None, None]

        # per-row terms; risk sums weight them by w r, tie sums by e r
        terms = [np.ones(len(eta))]
        if order >= 1:
            terms.append(self.grad)
        if order >= 2:
            terms.append(np.einsum("ni,nj->nij", self.grad, self.grad))
            terms.append(self.hess)
        contributions = [_scale(weight * self.r, t) for t in terms]

        self.strata = np.unique(rows.stratum)
        self._sums = {}
        times, strata, events, at_risk, tied = [], [], [], [], []
        for stratum in self.strata:
            in_stratum = rows.stratum == stratum
            self._sums[stratum] = _StratumSums(rows.start[in_stratum], rows.stop[in_stratum],
                                               [c[in_stratum] for c in contributions])

            has_event = in_stratum & (event_mass > 0)
            if not np.any(has_event):
                continue
            event_times, inverse = np.unique(rows.stop[has_event], return_inverse=True)
            n_t = len(event_times)
            mass = event_mass[has_event]
            tie_parts = []
            for t in terms:
                part = np.zeros((n_t,) + t.shape[1:])
                np.add.at(part, inverse, _scale(mass * self.r[has_event], t[has_event]))
                tie_parts.append(part)
            E = np.zeros(n_t)
            np.add.at(E, inverse, mass)

            times.append(event_times)
            strata.append(np.full(n_t, stratum))
            events.append(E)
            at_risk.append(self._sums[stratum].at(event_times))
            tied.append(tie_parts)

        if not times:
            self.event_times = np.zeros(0)
            self.event_strata = np.zeros(0, dtype=int)
            self.events = np.zeros(0)
            self._at_risk = [np.zeros((0,) + c.shape[1:]) for c in contributions]
            self._tied = [np.zeros((0,) + c.shape[1:]) for c in contributions]
        else:
            self.event_times = np.concatenate(times)
            self.event_strata = np.concatenate(strata)
            self.events = np.concatenate(events)
            self._at_risk = [np.concatenate([a[k] for a in at_risk]) for k in range(len(contributions))]
            self._tied = [np.concatenate([t[k] for t in tied]) for k in range(len(contributions))]

        if np.any(self._at_risk[0] <= 0):
            bad = self.event_times[self._at_risk[0] <= 0][0]
            raise DataError(None, "empty risk set at event age %g" % bad)

        self._expand_ties()

    @property
    def n_events(self):
        return float(self.events.sum())

    @property
    def at_risk(self):
        """Y(u) at each event age."""
        return self._at_risk[0]

    @property
    def at_risk_grad(self):
        """S1(u) = dY/dbeta at each event age."""
        return self._at_risk[1]

    def _expand_ties(self):
        E = self.events
        if self.ties == "efron":
            # effective number of tied events; integer masses keep their count
            d = np.array([max(1, int(math.ceil(m - 1e-9))) for m in E], dtype=int)
            owner = np.repeat(np.arange(len(E)), d)
            first = np.repeat(np.cumsum(d) - d, d)
            fraction = (np.arange(len(owner)) - first) / d[owner]
            mult = E[owner] / d[owner]
        else:
            owner = np.arange(len(E))
            fraction = np.zeros(len(E))
            mult = E.copy()

        self._owner = owner
        self._mult = mult
        self._fraction = fraction
        denom = self._at_risk[0][owner] - fraction * self._tied[0][owner]
        if np.any(denom <= 0):
            raise DataError(None, "empty risk set at a tied event age")
        self._denom = denom

    def _copy_sum(self, k):
        shape = (-1,) + (1,) * (self._at_risk[k].ndim - 1)
        return self._at_risk[k][self._owner] - self._fraction.reshape(shape) * self._tied[k][self._owner]

    @property
    def loglik(self):
        """Log partial likelihood."""
        return float(np.dot(self.event_mass, self.log_r) - np.dot(self._mult, np.log(self._denom)))

    @property
    def score(self):
        """Score vector."""
        self._need(1)
        mean = self._copy_sum(1) / self._denom[:, None]
        return self.event_mass.dot(self.grad) - self._mult.dot(mean)

    def _mean_outer(self):
        mean = self._copy_sum(1) / self._denom[:, None]
        return np.einsum("ni,nj->nij", mean, mean)

    @property
    def expected_information(self):
        """Sum over event ages of the risk-weighted covariance of the gradient of ln r."""
        self._need(2)
        second = self._copy_sum(2) / self._denom[:, None, None]
        info = np.einsum("n,nij->ij", self._mult, second - self._mean_outer())
        return (info + info.T) / 2.0

    @property
    def observed_information(self):
        """Minus the Hessian of the log partial likelihood."""
        self._need(2)
        second = (self._copy_sum(2) + self._copy_sum(3)) / self._denom[:, None, None]
        info = np.einsum("n,nij->ij", self._mult, second - self._mean_outer())
        info -= np.einsum("n,nij->ij", self.event_mass, self.hess)
        return (info + info.T) / 2.0

    def information(self, kind):
        """Observed or expected information by name."""
        if kind == "observed":
            return self.observed_information
        if kind == "expected":
            return self.expected_information
        raise ValueError("unknown information kind %r" % kind)

    def _need(self, order):
        if self.order < order:
            raise ValueError("risk set was built with order %d, %d needed" % (self.order, order))

    def sums_at(self, times, strata):
        """
        Y and S1 at arbitrary ages.

        :param times: ages.
        :param strata: stratum of each age.
        :returns: (Y, S1) arrays.
        """
        self._need(1)
        times = np.asarray(times, dtype=float)
        strata = np.asarray(strata)
        Y = np.zeros(len(times))
        S1 = np.zeros((len(times), self.rows.n_covariates))
        for stratum in np.unique(strata):
            sel = strata == stratum
            sums = self._sums.get(stratum)
            if sums is None:
                continue
            Y[sel], S1[sel] = sums.at(times[sel])[:2]
        return Y, S1

    def jumps(self, stratum):
        """
        Breslow jumps of one stratum.

        :returns: (event ages, jump sizes E/Y, dLambda/dbeta increments -E S1/Y^2,
          Nelson-Aalen-type variance increments E/Y^2)
        """
        sel = self.event_strata == stratum
        E = self.events[sel]
        Y = self.at_risk[sel]
        increments = E / Y
        if self.order >= 1:
            dbeta = -(E / Y ** 2)[:, None] * self.at_risk_grad[sel]
        else:
            dbeta = np.zeros((len(E), self.rows.n_covariates))
        return self.event_times[sel], increments, dbeta, E / Y ** 2
