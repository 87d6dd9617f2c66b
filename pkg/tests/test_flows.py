import math
import threading

import numpy as np
import pytest
from numpy.testing import assert_allclose

from signflow.control import PiecewiseConstantControl
from signflow.exceptions import ConfigurationError, IntegrationDivergedError
from signflow.flows import (CORRECTED, OTHER, PERTURBATION_SHORT, PROPAGATION,
                            REFERENCE, OdeSystem, SolveCounter)
from signflow.geometry import TWO_PI, ManifoldSpec


def _exp_system(dt):
    return OdeSystem(ManifoldSpec.euclidean(1), [lambda t, x: x],
                     lambda x: float(x[0]), dt=dt)


def test_counter_categories_and_totals():
    c = SolveCounter()
    c.increment(REFERENCE)
    c.increment(CORRECTED)
    c.increment(CORRECTED)
    c.increment(PROPAGATION)
    c.increment(PERTURBATION_SHORT)
    c.increment()  # OTHER
    assert c.counts() == {REFERENCE: 1, CORRECTED: 2, PROPAGATION: 1,
                          PERTURBATION_SHORT: 1, OTHER: 1}
    assert c.total() == 6
    assert c.primal_total() == 4  # short perturbations excluded
    c.reset()
    assert c.total() == 0
    with pytest.raises(ValueError):
        c.increment("adjoint")


def test_counter_thread_safety():
    c = SolveCounter()

    def bump():
        for _ in range(500):
            c.increment(REFERENCE)

    threads = [threading.Thread(target=bump) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert c.counts()[REFERENCE] == 4000


def test_flow_increments_counter_once_per_call():
    sys = _exp_system(1e-2)
    sys.flow(np.array([1.0]), np.array([1.0]), 0.0, 0.5, count_as=REFERENCE)
    sys.flow(np.array([1.0]), np.array([1.0]), 0.0, 0.0, count_as=CORRECTED)
    assert sys.solve_counter.counts()[REFERENCE] == 1
    assert sys.solve_counter.counts()[CORRECTED] == 1
    assert sys.solve_counter.total() == 2


def test_zero_span_is_identity():
    sys = _exp_system(1e-2)
    x = np.array([1.7])
    assert_allclose(sys.flow(x, np.array([1.0]), 0.3, 0.3), x, rtol=0, atol=0)


def test_exponential_accuracy():
    sys = _exp_system(1e-2)
    x1 = sys.flow(np.array([1.0]), np.array([1.0]), 0.0, 1.0)
    assert abs(x1[0] - math.e) <= 1e-6
    x1 = sys.flow(np.array([1.0]), np.array([-1.0]), 0.0, 1.0)
    assert abs(x1[0] - math.exp(-1.0)) <= 1e-6


def test_fourth_order_convergence():
    # halving dt must shrink the error by at least 12x (~16x for RK4)
    errors = []
    for dt in (0.1, 0.05, 0.025):
        x1 = _exp_system(dt).flow(np.array([1.0]), np.array([1.0]), 0.0, 1.0)
        errors.append(abs(x1[0] - math.e))
    assert errors[0] / errors[1] >= 12.0
    assert errors[1] / errors[2] >= 12.0


def test_semigroup_property():
    sys = _exp_system(1e-3)
    u = np.array([1.0])
    x0 = np.array([1.0])
    direct = sys.flow(x0, u, 0.0, 1.0)
    # 0.37 is not a multiple of dt, so the first leg ends on a shortened
    # substep; composition must still agree with the direct solve
    mid = sys.flow(x0, u, 0.0, 0.37)
    composed = sys.flow(mid, u, 0.37, 1.0)
    assert abs(direct[0] - composed[0]) <= 1e-9


def test_circle_output_is_wrapped():
    sys = OdeSystem(ManifoldSpec.circle(), [lambda t, x: np.ones_like(x)],
                    lambda x: float(x[0]), dt=1e-3)
    x1 = sys.flow(np.array([5.5]), np.array([1.0]), 0.0, 2.0)
    assert_allclose(x1, [7.5 - TWO_PI], atol=1e-12)
    assert 0.0 <= x1[0] < TWO_PI


def test_segmentation_at_control_switches():
    # x' = u(t) * t integrates exactly under RK4, so the result isolates
    # the switch handling: +int_0^0.5 t dt - int_0.5^1 t dt = -0.25
    sys = OdeSystem(ManifoldSpec.euclidean(1), [lambda t, x: np.full_like(x, t)],
                    lambda x: float(x[0]), dt=0.015)
    u = PiecewiseConstantControl(1.0, [[1.0], [-1.0]])
    x1 = sys.flow(np.array([0.0]), u, 0.0, 1.0)
    assert abs(x1[0] - (-0.25)) <= 1e-12
    assert u.switch_count() == 1


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_divergence_raises_with_time():
    sys = OdeSystem(ManifoldSpec.euclidean(1), [lambda t, x: x ** 3],
                    lambda x: float(x[0]), dt=1e-3)
    with pytest.raises(IntegrationDivergedError) as info:
        sys.flow(np.array([10.0]), np.array([1.0]), 0.0, 1.0)
    assert isinstance(info.value.time, float)
    assert 0.0 < info.value.time <= 1.0


def test_flow_validation():
    sys = _exp_system(1e-2)
    with pytest.raises(ConfigurationError):
        sys.flow(np.array([1.0, 2.0]), np.array([1.0]), 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        sys.flow(np.array([1.0]), np.array([1.0, 0.0]), 0.0, 1.0)
    with pytest.raises(ValueError):
        sys.flow(np.array([1.0]), np.array([1.0]), 1.0, 0.5)
    with pytest.raises(ConfigurationError):
        OdeSystem(ManifoldSpec.euclidean(1), [lambda t, x: x],
                  lambda x: 0.0, dt=0.0)
    with pytest.raises(ConfigurationError):
        OdeSystem(ManifoldSpec.euclidean(1), [], lambda x: 0.0)


def test_flow_map_composition_matches_direct():
    sys = _exp_system(1e-3)
    u = PiecewiseConstantControl(1.0, [[1.0], [-0.5]])
    phi = sys.flow_map(u)
    x_mid = phi(np.array([1.0]), 0.0, 0.6)
    assert sys.cost(phi(x_mid, 0.6, 1.0)) == sys.cost(
        sys.flow(sys.flow(np.array([1.0]), u, 0.0, 0.6), u, 0.6, 1.0))
