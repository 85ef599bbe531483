import numpy as np
import pytest
from scipy import integrate

from contactinterval.base import DataError, StepCumHaz
from contactinterval.smooth import HazardCurve, SmoothOptions, smooth_hazard


def weibull_steps(shape, rate, horizon, step=0.01):
    ages = np.arange(step, horizon + step / 2, step)
    cumhaz = (rate * ages) ** shape
    return StepCumHaz(ages, np.diff(np.concatenate([[0.0], cumhaz])), horizon=horizon)


def wide_bandwidth_is_flat_test():

    cumhaz = StepCumHaz([0.5, 1.0, 3.0], [0.2, 0.3, 0.5], horizon=4.0)
    curve = smooth_hazard(cumhaz, SmoothOptions(bandwidth=1e6))
    np.testing.assert_allclose(curve([0.1, 2.0, 3.9]), 1.0 / 4.0, rtol=1e-6)


def mass_is_conserved_test():

    rng = np.random.default_rng(30)
    ages = np.sort(rng.uniform(0.0, 5.0, size=40))
    cumhaz = StepCumHaz(ages, rng.uniform(0.01, 0.1, size=40), horizon=5.0)
    curve = smooth_hazard(cumhaz, SmoothOptions(grid_size=4001))
    assert curve.cumulative(5.0) == pytest.approx(cumhaz.cumhaz[-1], rel=1e-12)
    area = integrate.trapezoid(curve.values, curve.grid)
    assert abs(area - cumhaz.cumhaz[-1]) < 0.01 * cumhaz.cumhaz[-1]


def recovers_weibull_hazard_test():

    cumhaz = weibull_steps(2.0, 0.6, 3.0)
    curve = smooth_hazard(cumhaz)
    ages = np.linspace(0.6, 2.4, 19)
    truth = 2.0 * 0.6 ** 2 * ages
    np.testing.assert_allclose(curve(ages), truth, rtol=0.2)


def floor_test():

    curve = smooth_hazard(StepCumHaz([0.5], [1.0], horizon=10.0), SmoothOptions(bandwidth=0.1))
    assert curve(5.0) == 1e-12
    assert curve(0.5) > 1.0
    assert curve(11.0) == 1e-12


def constant_curve_test():

    curve = HazardCurve.constant(0.25, 8.0)
    np.testing.assert_allclose(curve([0.0, 4.0, 8.0]), 0.25)
    assert curve.cumulative(4.0) == pytest.approx(1.0)
    assert curve.total_mass == pytest.approx(2.0)


def bad_input_test():

    with pytest.raises(DataError):
        smooth_hazard(StepCumHaz([], []))
    with pytest.raises(ValueError):
        SmoothOptions(bandwidth=0.0)
    with pytest.raises(ValueError):
        SmoothOptions(kernel="gaussian")
