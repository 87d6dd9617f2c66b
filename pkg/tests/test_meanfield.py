import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import erf

from signflow.benchmarks import (kuramoto_initial_profile,
                                 matching_target_profile,
                                 torus_initial_profile)
from signflow.control import PiecewiseConstantControl
from signflow.exceptions import (CflViolationError, ConfigurationError,
                                 DegenerateDensityError,
                                 IntegrationDivergedError)
from signflow.geometry import TWO_PI, ManifoldSpec
from signflow import meanfield
from signflow.meanfield import (DensityMatchingCost, GridDensity,
                                LinearObservableCost, MeanFieldSystem,
                                VelocityGrid, advect_step, attention_velocity,
                                attention_velocity_direct, circular_mean,
                                kuramoto_velocity, kuramoto_velocity_direct,
                                linear_cost, matching_cost, order_parameter,
                                solve_continuity, trig_moments)

CIRCLE = ManifoldSpec.circle()
TORUS = ManifoldSpec.torus2()


def _phase_density(G=256):
    return GridDensity.from_function(CIRCLE, (G,), kuramoto_initial_profile)


# ---------------------------------------------------------------------------
# GridDensity


def test_from_function_normalizes_mass():
    rho = _phase_density()
    assert abs(rho.mass() - 1.0) <= 1e-12
    rho2 = GridDensity.from_function(TORUS, (32, 32), torus_initial_profile)
    assert abs(rho2.mass() - 1.0) <= 1e-12


def test_uniform_density():
    rho = GridDensity.uniform(CIRCLE, (64,))
    assert_allclose(rho.values, 1.0 / TWO_PI, rtol=1e-14)
    assert abs(rho.mass() - 1.0) <= 1e-12


def test_grid_layout():
    rho = GridDensity.from_function(TORUS, (8, 16),
                                    lambda a, b: np.ones_like(a))
    assert rho.cells == (8, 16)
    assert_allclose(rho.spacings, (TWO_PI / 8, TWO_PI / 16))
    assert abs(rho.cell_volume - TWO_PI / 8 * TWO_PI / 16) < 1e-15
    c1, c2 = rho.axis_centers()
    assert_allclose(c1[0], 0.5 * TWO_PI / 8)
    assert_allclose(c2[-1], (15.5) * TWO_PI / 16)
    m1, m2 = rho.meshes()
    assert m1.shape == m2.shape == (8, 16)
    assert_allclose(m1[:, 0], c1)


def test_density_validation():
    with pytest.raises(ConfigurationError):
        GridDensity(ManifoldSpec.euclidean(1), np.ones(8))
    with pytest.raises(ConfigurationError):
        GridDensity(CIRCLE, np.ones((4, 4)))
    with pytest.raises(ConfigurationError):
        GridDensity(CIRCLE, np.array([1.0, -0.5, 1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        GridDensity(CIRCLE, np.array([1.0, np.nan, 1.0, 1.0]))
    with pytest.raises(DegenerateDensityError):
        GridDensity(CIRCLE, np.zeros(8)).normalized()
    rho = GridDensity.uniform(CIRCLE, (8,))
    with pytest.raises(ValueError):
        rho.values[0] = 2.0  # read-only


def test_to_csv_circle(tmp_path):
    rho = _phase_density(32)
    path = tmp_path / "rho.csv"
    rho.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,rho"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (32, 2)
    assert_allclose(data[:, 0], rho.axis_centers()[0], rtol=0, atol=0)
    assert_allclose(data[:, 1], rho.values, rtol=0, atol=0)


def test_to_csv_torus_row_major(tmp_path):
    rho = GridDensity.from_function(TORUS, (6, 5), torus_initial_profile)
    path = tmp_path / "rho.csv"
    rho.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,rho"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (30, 3)
    # row-major: x2 varies fastest
    assert_allclose(data[:5, 0], data[0, 0], rtol=0, atol=0)
    assert_allclose(data[:, 2].reshape(6, 5), rho.values, rtol=0, atol=0)


# ---------------------------------------------------------------------------
# circular statistics


def test_trig_moments_of_phase_density():
    # A = <sin, rho0> = 1/4 by harmonic orthogonality; B = <cos, rho0> = 0.
    # Midpoint quadrature is exact for trigonometric polynomials of degree
    # below G, so the grid values match the analytic moments to roundoff.
    a, b = trig_moments(_phase_density())
    assert abs(a - 0.25) <= 1e-12
    assert abs(b) <= 1e-12
    assert abs(order_parameter(_phase_density()) - 0.25) <= 1e-12
    assert abs(circular_mean(_phase_density()) - math.pi / 2) <= 1e-12


def test_trig_moments_uniform():
    a, b = trig_moments(GridDensity.uniform(CIRCLE, (64,)))
    assert abs(a) <= 1e-15 and abs(b) <= 1e-15


def test_trig_moments_requires_circle():
    rho = GridDensity.uniform(TORUS, (8, 8))
    with pytest.raises(ConfigurationError):
        trig_moments(rho)


# ---------------------------------------------------------------------------
# Kuramoto velocity


def test_kuramoto_velocity_matches_direct_quadrature():
    rho = _phase_density(128)
    for u in ((0.0, 1.0), (0.3, -0.7), (1.0, 0.0)):
        fast = kuramoto_velocity(rho, np.array(u)).components[0]
        direct = kuramoto_velocity_direct(rho, np.array(u)).components[0]
        assert np.max(np.abs(fast - direct)) <= 1e-12


def test_kuramoto_velocity_validation():
    rho = _phase_density(16)
    with pytest.raises(ConfigurationError):
        kuramoto_velocity(rho, np.array([1.0]))
    with pytest.raises(ConfigurationError):
        kuramoto_velocity(GridDensity.uniform(TORUS, (8, 8)),
                          np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# attention velocity


def test_attention_velocity_matches_direct_quadrature():
    rho = GridDensity.from_function(TORUS, (12, 12), torus_initial_profile)
    v_mat = np.array([[1.0, 0.5], [-0.3, 1.0]])
    fast = attention_velocity(rho, v_mat, kappa=5.0)
    direct = attention_velocity_direct(rho, v_mat, kappa=5.0)
    for a, b in zip(fast.components, direct.components):
        assert np.max(np.abs(a - b)) <= 1e-10


def test_attention_identity_on_uniform_density():
    # uniform rho and V = I: the von Mises weighted mean of the lifted
    # coordinates is the evaluation point itself, so v(x) = x
    rho = GridDensity.uniform(TORUS, (31, 31))
    vel = attention_velocity(rho, np.eye(2), kappa=5.0)
    x1, x2 = rho.meshes()
    assert np.max(np.abs(vel.components[0] - x1)) <= 1e-10
    assert np.max(np.abs(vel.components[1] - x2)) <= 1e-10


def test_attention_identity_even_grid_tie_term():
    # on an even grid each point has one antipodal column per axis at
    # exactly half a period; its lift resolves to the upper representative
    # instead of canceling, contributing ~ pi * e^{-2 kappa} relative
    # weight, so the identity holds only up to that tie term
    rho = GridDensity.uniform(TORUS, (32, 32))
    vel = attention_velocity(rho, np.eye(2), kappa=5.0)
    x1, _ = rho.meshes()
    err = np.max(np.abs(vel.components[0] - x1))
    assert 1e-6 < err < 1e-4


def test_attention_kernel_cache_reused():
    meanfield._KERNEL_CACHE.clear()
    rho = GridDensity.uniform(TORUS, (16, 16))
    attention_velocity(rho, np.eye(2), kappa=3.0)
    attention_velocity(rho, np.eye(2), kappa=3.0)
    assert len(meanfield._KERNEL_CACHE) == 1
    attention_velocity(rho, np.eye(2), kappa=4.0)
    assert len(meanfield._KERNEL_CACHE) == 2


def test_attention_velocity_validation():
    rho = GridDensity.uniform(TORUS, (8, 8))
    with pytest.raises(ConfigurationError):
        attention_velocity(rho, np.eye(2), kappa=0.0)
    with pytest.raises(ConfigurationError):
        attention_velocity(GridDensity.uniform(CIRCLE, (8,)), np.eye(2), 1.0)
    zero = GridDensity(TORUS, np.zeros((8, 8)))
    with pytest.raises(DegenerateDensityError):
        attention_velocity(zero, np.eye(2), kappa=1.0)


def test_velocity_grid_rejects_non_finite():
    with pytest.raises(IntegrationDivergedError):
        VelocityGrid(CIRCLE, (np.array([1.0, np.nan, 0.0, 0.0]),))
    with pytest.raises(ConfigurationError):
        VelocityGrid(TORUS, (np.zeros((4, 4)),))  # one component per axis


# ---------------------------------------------------------------------------
# upwind advection


def test_advect_step_exact_shift_at_unit_courant():
    # with v = 1 and dt = dx the upwind update reduces to rho[i] <- rho[i-1]
    rho = _phase_density(64)
    dx = rho.spacings[0]
    vel = VelocityGrid(CIRCLE, (np.ones(64),))
    out = advect_step(rho, vel, dx)
    assert_allclose(out.values, np.roll(rho.values, 1), rtol=0, atol=0)


def test_advect_step_conserves_mass_and_positivity():
    rho = _phase_density(128)
    x = rho.axis_centers()[0]
    vel = VelocityGrid(CIRCLE, (np.sin(x),))  # compressive field
    dt = 0.5 * rho.spacings[0]
    for _ in range(60):
        rho = advect_step(rho, vel, dt)
    assert abs(rho.mass() - 1.0) <= 1e-13
    assert rho.values.min() >= -1e-12


def test_advect_step_cfl_guard():
    rho = _phase_density(32)
    vel = VelocityGrid(CIRCLE, (np.ones(32),))
    with pytest.raises(CflViolationError):
        advect_step(rho, vel, 10.0)
    with pytest.raises(ValueError):
        advect_step(rho, vel, -0.1)


def test_advect_step_2d_conservation():
    rho = GridDensity.from_function(TORUS, (24, 24), torus_initial_profile)
    x1, x2 = rho.meshes()
    vel = VelocityGrid(TORUS, (np.sin(x2), -np.cos(x1)))
    dt = 0.4 * rho.spacings[0]
    for _ in range(40):
        rho = advect_step(rho, vel, dt)
    assert abs(rho.mass() - 1.0) <= 1e-13
    assert rho.values.min() >= -1e-12


# ---------------------------------------------------------------------------
# continuity solver


def test_rotation_preserves_order_parameter():
    # pure rotation u = (1, 0) leaves R invariant; at unit Courant number
    # the upwind step is an exact cell shift, and the horizon pi spans
    # exactly G/2 such steps, so the invariance is exact on the grid
    sys = MeanFieldSystem("kuramoto", cost=None, cfl_target=1.0, dt_max=0.1)
    rho = _phase_density(256)
    r0 = order_parameter(rho)
    rho_t = solve_continuity(sys, rho, np.array([1.0, 0.0]), 0.0, math.pi)
    assert abs(order_parameter(rho_t) - r0) <= 1e-6


def test_rotation_translates_circular_mean():
    sys = MeanFieldSystem("kuramoto", cost=None)  # default cfl 0.9
    rho = _phase_density(128)
    mean0 = circular_mean(rho)
    rho_t = solve_continuity(sys, rho, np.array([1.0, 0.0]), 0.0, math.pi)
    expected = math.fmod(mean0 + math.pi, TWO_PI)
    diff = (circular_mean(rho_t) - expected + math.pi) % TWO_PI - math.pi
    assert abs(diff) <= 1e-2


def test_solve_continuity_piecewise_control_conserves_mass():
    sys = MeanFieldSystem("kuramoto", cost=None)
    rho = _phase_density(128)
    u = PiecewiseConstantControl(1.0, [[1.0, 1.0], [-1.0, 1.0], [0.0, -1.0]])
    out = solve_continuity(sys, rho, u, 0.0, 1.0)
    assert abs(out.mass() - 1.0) <= 1e-12
    assert out.values.min() >= -1e-12


def test_solve_continuity_validation():
    sys = MeanFieldSystem("kuramoto", cost=None)
    rho = _phase_density(16)
    with pytest.raises(ValueError):
        solve_continuity(sys, rho, np.array([1.0, 0.0]), 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        solve_continuity(sys, rho, np.array([1.0]), 0.0, 1.0)


# ---------------------------------------------------------------------------
# cost functionals


def test_linear_cost_phase_locking_baseline():
    # <rho0, 1 - cos(x - pi)> = 1 + B = 1 exactly (B = 0 by orthogonality)
    cost = linear_cost(_phase_density(), lambda x: 1.0 - np.cos(x - math.pi))
    assert abs(cost - 1.0) <= 1e-12


def test_linear_cost_point_mass():
    # all mass in the cell nearest pi scores ~ F(pi) = 0, within dx^2
    G = 256
    dx = TWO_PI / G
    values = np.zeros(G)
    values[np.argmin(np.abs((np.arange(G) + 0.5) * dx - math.pi))] = 1.0 / dx
    rho = GridDensity(CIRCLE, values)
    assert linear_cost(rho, lambda x: 1.0 - np.cos(x - math.pi)) <= dx ** 2


def test_matching_cost_perfect_match_is_zero():
    rho = GridDensity.from_function(CIRCLE, (128,), matching_target_profile)
    assert matching_cost(rho, matching_target_profile,
                         normalize_target=True) == 0.0
    assert matching_cost(rho, matching_target_profile, weighted=True,
                         normalize_target=True) == 0.0


def test_matching_cost_uniform_against_zero_target():
    rho = GridDensity.uniform(CIRCLE, (64,))
    cost = matching_cost(rho, lambda x: np.zeros_like(x))
    assert abs(cost - 1.0 / TWO_PI) <= 1e-12


def _quadrature_matching(weighted, normalize_target, n=1 << 17):
    """Continuum matching cost by fine midpoint quadrature (oracle)."""
    x = (np.arange(n) + 0.5) * (TWO_PI / n)
    dx = TWO_PI / n
    rho = kuramoto_initial_profile(x)
    target = matching_target_profile(x)
    if normalize_target:
        target = target / (target.sum() * dx)
    sq = (rho - target) ** 2
    if weighted:
        sq = rho * sq
    return float(sq.sum() * dx)


@pytest.mark.parametrize("weighted,normalize", [
    (False, False), (False, True), (True, False), (True, True)])
def test_matching_cost_grid_matches_quadrature_oracle(weighted, normalize):
    rho = _phase_density(256)
    grid = DensityMatchingCost(matching_target_profile, weighted=weighted,
                               normalize_target=normalize).evaluate(rho)
    oracle = _quadrature_matching(weighted, normalize)
    assert abs(grid - oracle) <= 1e-4


def test_normalized_target_mass():
    # integral of exp(-(x-pi)^2/2) over one period = sqrt(2 pi) erf(pi/sqrt 2)
    rho = _phase_density(256)
    cost = DensityMatchingCost(matching_target_profile, normalize_target=True)
    t = cost.target_values(rho)
    assert abs(t.sum() * rho.cell_volume - 1.0) <= 1e-12
    raw_mass = matching_target_profile(rho.axis_centers()[0]).sum() \
        * rho.cell_volume
    oracle = math.sqrt(2.0 * math.pi) * erf(math.pi / math.sqrt(2.0))
    assert abs(raw_mass - oracle) <= 1e-5


def test_cost_describe():
    lin = LinearObservableCost(lambda x: x, label="F")
    assert lin.describe() == {"kind": "linear", "observable": "F"}
    match = DensityMatchingCost(matching_target_profile, weighted=True)
    d = match.describe()
    assert d["kind"] == "matching" and d["weighted"] is True


# ---------------------------------------------------------------------------
# MeanFieldSystem


def test_system_validation():
    with pytest.raises(ConfigurationError):
        MeanFieldSystem("vlasov", cost=None)
    with pytest.raises(ConfigurationError):
        MeanFieldSystem("attention", cost=None)  # kappa required
    with pytest.raises(ConfigurationError):
        MeanFieldSystem("kuramoto", cost=None, cfl_target=0.0)
    with pytest.raises(ConfigurationError):
        MeanFieldSystem("kuramoto", cost=None, cfl_target=1.2)
    with pytest.raises(ConfigurationError):
        MeanFieldSystem("kuramoto", cost=None, dt_max=0.0)
    assert MeanFieldSystem("kuramoto", cost=None).control_dim == 2
    assert MeanFieldSystem("attention", cost=None, kappa=5.0).control_dim == 4


def test_system_flow_counts_and_cost():
    cost = LinearObservableCost(lambda x: 1.0 - np.cos(x - math.pi))
    sys = MeanFieldSystem("kuramoto", cost)
    rho = _phase_density(64)
    out = sys.flow(rho, np.array([0.0, 1.0]), 0.0, 0.1, count_as="reference")
    assert sys.solve_counter.counts()["reference"] == 1
    assert isinstance(sys.cost(out), float)
    assert abs(out.mass() - 1.0) <= 1e-12
