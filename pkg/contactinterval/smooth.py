# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-

"""
Kernel smoothing of cumulative hazard increments.

Each jump of a :class:`contactinterval.base.StepCumHaz` is spread over
[0, horizon] with an Epanechnikov kernel. A kernel that would reach
past either end is renormalized to its mass inside the interval, so the
smoothed hazard integrates to exactly the total jump mass.
"""

import dataclasses
import typing

import numpy as np

from contactinterval.base import DataError

KERNELS = ("epanechnikov",)


@dataclasses.dataclass(frozen=True)
class SmoothOptions:
    """
    ``bandwidth`` None means a tenth of the horizon. ``floor`` is the
    smallest hazard value returned. ``grid_size`` is the number of ages in
    the stored evaluation grid.
    """
    bandwidth: typing.Optional[float] = None
    floor: float = 1e-12
    grid_size: int = 201
    kernel: str = "epanechnikov"

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in KERNELS:
            raise ValueError("unknown kernel %r" % self.kernel)


def _kernel(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _kernel_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.5 + 0.75 * (u - u ** 3 / 3.0)


class HazardCurve(object):
    """
    Smoothed hazard on [0, horizon]. Calling the curve evaluates it
    exactly; ``grid`` and ``values`` hold a tabulation.

    :param centers: jump ages.
    :param masses: jump sizes.
    :param bandwidth: kernel half-width, or None for a constant hazard
      spreading the total mass evenly.
    """

    def __init__(self, centers, masses, bandwidth, horizon, floor=1e-12, grid_size=201,
                 method="epanechnikov"):
        self.centers = np.asarray(centers, dtype=float)
        self.masses = np.asarray(masses, dtype=float)
        self.bandwidth = bandwidth
        self.horizon = float(horizon)
        self.floor = floor
        self.method = method
        if self.bandwidth is not None:
            self._norm = (_kernel_cdf((self.horizon - self.centers) / bandwidth)
                          - _kernel_cdf(-self.centers / bandwidth))
        self.grid = np.linspace(0.0, self.horizon, grid_size)
        self.values = self(self.grid)

    @classmethod
    def constant(cls, rate, horizon, grid_size=201):
        """A flat hazard of the given rate on [0, horizon]."""
        return cls([], [rate * horizon], None, horizon, grid_size=grid_size, method="constant")

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.bandwidth is None:
            value = np.full(tau.shape, self.total_mass / self.horizon)
        else:
            u = (tau[..., None] - self.centers) / self.bandwidth
            value = np.sum(self.masses * _kernel(u) / (self.bandwidth * self._norm), axis=-1)
            value = np.where((tau >= 0) & (tau <= self.horizon), value, 0.0)
        return np.maximum(value, self.floor)

    def cumulative(self, tau):
        """Integral of the unfloored hazard from 0 to *tau*."""
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, self.horizon)
        if self.bandwidth is None:
            return tau * self.total_mass / self.horizon
        lower = _kernel_cdf(-self.centers / self.bandwidth)
        upper = _kernel_cdf((tau[..., None] - self.centers) / self.bandwidth)
        return np.sum(self.masses * (upper - lower) / self._norm, axis=-1)


def smooth_hazard(cumhaz, opts=None):
    """
    Smooth the increments of a cumulative hazard.

    :param cumhaz: a :class:`contactinterval.base.StepCumHaz` with at least one jump.
    :param opts: :class:`SmoothOptions`.
    :rtype: :class:`HazardCurve`
    :raises: **DataError** on an empty cumulative hazard or a zero horizon.
    """
    opts = opts or SmoothOptions()
    if len(cumhaz) == 0:
        raise DataError(None, "cannot smooth an empty cumulative hazard")
    horizon = max(cumhaz.horizon, float(cumhaz.jump_times[-1]))
    if not horizon > 0:
        raise DataError(None, "cannot smooth a cumulative hazard with zero horizon")
    bandwidth = opts.bandwidth if opts.bandwidth is not None else horizon / 10.0
    return HazardCurve(cumhaz.jump_times, cumhaz.increments, bandwidth, horizon,
                       floor=opts.floor, grid_size=opts.grid_size, method=opts.kernel)
