"""Property suites backing `signflow verify`: increment-formula accuracy,
mass conservation, and independent solver oracles (direct quadrature,
rotation refinement, deterministic particle ensemble)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benchmarks import (build_attention_torus, build_kuramoto_matching,
                         build_kuramoto_sync, build_toy_ode,
                         kuramoto_initial_profile, torus_initial_profile)
from .control import PiecewiseConstantControl
from .descent import verify_increment_formula
from .exceptions import ConfigurationError
from .flows import OdeSystem
from .geometry import TWO_PI, ManifoldSpec
from .meanfield import (GridDensity, MeanFieldSystem, attention_velocity,
                        attention_velocity_direct, circular_mean,
                        kuramoto_velocity, kuramoto_velocity_direct,
                        order_parameter, solve_continuity)


@dataclass
class Check:
    """One verified property: measured value against its tolerance."""

    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


def _check(name, measured, tolerance, detail="") -> Check:
    return Check(name=name, measured=float(measured),
                 tolerance=float(tolerance),
                 passed=bool(measured <= tolerance), detail=detail)


# refinement ladder for the increment-formula quadrature
INCREMENT_LADDER = ((1e-3, 50), (1e-4, 200), (1e-5, 800))
INCREMENT_TOLERANCE = 5e-3


def increment_suite() -> list:
    """Exact-increment representation on analytic ODE problems."""
    checks = []
    drift = OdeSystem(ManifoldSpec.euclidean(1),
                      [lambda t, x: np.ones_like(x)],
                      lambda x: float(x[0]), dt=1e-3)
    res = verify_increment_formula(drift, np.array([0.0]), 1.0,
                                   np.array([0.0]), np.array([1.0]),
                                   quad_points=50, eps_fd=1e-3)
    checks.append(_check("increment.unit_drift", res["abs_err"], 1e-3,
                         f"lhs={res['lhs']:.6f} rhs={res['rhs']:.6f}"))
    toy = build_toy_ode("bilinear1d")
    errors = []
    for eps_fd, quad in INCREMENT_LADDER:
        res = verify_increment_formula(toy.system, toy.initial_state,
                                       toy.horizon, np.array([0.0]),
                                       np.array([1.0]), quad_points=quad,
                                       eps_fd=eps_fd)
        errors.append(res["abs_err"])
        checks.append(_check(
            f"increment.bilinear[eps_fd={eps_fd:g},quad={quad}]",
            res["abs_err"], INCREMENT_TOLERANCE,
            f"lhs={res['lhs']:.8f} rhs={res['rhs']:.8f}"))
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    checks.append(Check(name="increment.ladder_monotone",
                        measured=float(errors[-1]), tolerance=float(errors[0]),
                        passed=monotone,
                        detail="errors " + ", ".join(f"{e:.3e}" for e in errors)))
    return checks


def _mass_drift(instance, control_values) -> float:
    sys = instance.system
    rho0 = instance.initial_state
    u = PiecewiseConstantControl(instance.horizon,
                                 np.asarray(control_values, dtype=float))
    rho_t = sys.flow(rho0, u, 0.0, instance.horizon)
    return abs(rho_t.mass() - rho0.mass())


MASS_TOLERANCE = 1e-10


def conservation_suite() -> list:
    """Mass conservation over full-horizon transport on every grid system."""
    checks = []
    sync = build_kuramoto_sync()
    checks.append(_check("conservation.kuramoto_sync",
                         _mass_drift(sync, [[1.0, 1.0], [-1.0, 1.0],
                                            [1.0, -1.0]]),
                         MASS_TOLERANCE))
    matching = build_kuramoto_matching()
    checks.append(_check("conservation.kuramoto_matching",
                         _mass_drift(matching, [[-1.0, 1.0], [0.0, 1.0],
                                                [1.0, 0.0]]),
                         MASS_TOLERANCE))
    attention = build_attention_torus()
    checks.append(_check("conservation.attention_torus",
                         _mass_drift(attention,
                                     [[1.0, 0.0, 0.0, 1.0],
                                      [-1.0, 1.0, 0.0, -1.0],
                                      [0.0, -1.0, 1.0, 0.0],
                                      [1.0, 1.0, -1.0, -1.0]]),
                         MASS_TOLERANCE))
    return checks


def initial_phase_cdf(x):
    """Antiderivative of the benchmark phase density (analytic, exact)."""
    return (2.0 * x + 1.0 - np.cos(x) + 0.4 * np.sin(2.0 * x)
            + 0.1 * (np.cos(2.0 * x) - 1.0)) / (4.0 * np.pi)


def quantile_particles(n_particles: int) -> np.ndarray:
    """Deterministic particle positions: mid-quantiles of the initial CDF.

    The CDF is inverted by bisection (it is nondecreasing with total mass
    one), giving a reproducible, randomness-free ensemble.
    """
    q = (np.arange(n_particles) + 0.5) / n_particles
    lo = np.zeros(n_particles)
    hi = np.full(n_particles, TWO_PI)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = initial_phase_cdf(mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _particle_velocity(x: np.ndarray, u) -> np.ndarray:
    a = np.mean(np.sin(x))
    b = np.mean(np.cos(x))
    return u[0] + u[1] * (a * np.cos(x) - b * np.sin(x))


def particle_order_parameters(n_particles: int, checkpoints, u=(0.0, 1.0),
                              dt: float = 2.5e-3) -> list:
    """Order parameter R of the coupled particle ensemble at checkpoints.

    Integrates the fully coupled system (each RK4 stage re-evaluates the
    ensemble trig moments) with a fixed step, shortened to land exactly on
    each checkpoint.
    """
    x = quantile_particles(n_particles)
    u = np.asarray(u, dtype=float)
    out = []
    t = 0.0
    for t_next in checkpoints:
        while t_next - t > 1e-12:
            h = min(dt, t_next - t)
            k1 = _particle_velocity(x, u)
            k2 = _particle_velocity(x + 0.5 * h * k1, u)
            k3 = _particle_velocity(x + 0.5 * h * k2, u)
            k4 = _particle_velocity(x + h * k3, u)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out.append(float(np.hypot(np.mean(np.sin(x)), np.mean(np.cos(x)))))
    return out


def pde_order_parameters(G: int, checkpoints, u=(0.0, 1.0)) -> list:
    """Order parameter of the grid solution at the same checkpoints."""
    sys = MeanFieldSystem("kuramoto", cost=None)
    rho = GridDensity.from_function(ManifoldSpec.circle(), (G,),
                                    kuramoto_initial_profile)
    out = []
    t = 0.0
    for t_next in checkpoints:
        rho = solve_continuity(sys, rho, np.asarray(u, dtype=float), t, t_next)
        t = t_next
        out.append(order_parameter(rho))
    return out


def rotation_test_error(G: int) -> float:
    """Circular-mean error after pure rotation by π (exact answer known)."""
    sys = MeanFieldSystem("kuramoto", cost=None)
    rho = GridDensity.from_function(ManifoldSpec.circle(), (G,),
                                    kuramoto_initial_profile)
    mean0 = circular_mean(rho)
    rho_t = solve_continuity(sys, rho, np.array([1.0, 0.0]), 0.0, np.pi)
    expected = np.mod(mean0 + np.pi, TWO_PI)
    diff = np.mod(circular_mean(rho_t) - expected + np.pi, TWO_PI) - np.pi
    return abs(float(diff))


PARTICLE_CHECKPOINTS = (0.5, 1.0, 1.5, 2.0, 2.5)
PARTICLE_COUNT = 4096


def oracle_suite() -> list:
    """Independent cross-checks of the velocity fields and the transport."""
    checks = []

    rho = GridDensity.from_function(ManifoldSpec.circle(), (256,),
                                    kuramoto_initial_profile)
    worst = 0.0
    for u in ((0.0, 1.0), (0.3, -0.7)):
        fast = kuramoto_velocity(rho, np.array(u)).components[0]
        direct = kuramoto_velocity_direct(rho, np.array(u)).components[0]
        worst = max(worst, float(np.max(np.abs(fast - direct))))
    checks.append(_check("oracle.kuramoto_field_vs_quadrature", worst, 1e-12))

    rho2 = GridDensity.from_function(ManifoldSpec.torus2(), (24, 24),
                                     torus_initial_profile)
    v_mat = np.array([[1.0, 0.5], [-0.3, 1.0]])
    fast = attention_velocity(rho2, v_mat, kappa=5.0)
    direct = attention_velocity_direct(rho2, v_mat, kappa=5.0)
    diff = max(float(np.max(np.abs(a - b)))
               for a, b in zip(fast.components, direct.components))
    checks.append(_check("oracle.attention_field_vs_quadrature", diff, 1e-10))

    err_coarse = rotation_test_error(128)
    err_fine = rotation_test_error(256)
    checks.append(_check("oracle.rotation.G256", err_fine, 2e-2,
                         f"G128 error {err_coarse:.3e}"))
    ratio_ok = err_coarse / max(err_fine, 1e-300) >= 1.8
    checks.append(Check(name="oracle.rotation.refinement",
                        measured=float(err_coarse / max(err_fine, 1e-300)),
                        tolerance=1.8, passed=ratio_ok,
                        detail="ratio must be >= 1.8"))

    r_pde = pde_order_parameters(256, PARTICLE_CHECKPOINTS)
    r_part = particle_order_parameters(PARTICLE_COUNT, PARTICLE_CHECKPOINTS)
    gap = max(abs(a - b) for a, b in zip(r_pde, r_part))
    checks.append(_check("oracle.particle_order_parameter", gap, 2e-2,
                         "R(pde) " + ", ".join(f"{r:.4f}" for r in r_pde)))
    return checks


SUITES = {
    "increment": increment_suite,
    "conservation": conservation_suite,
    "oracle": oracle_suite,
}


def run_suite(name: str) -> list:
    if name not in SUITES:
        raise ConfigurationError(
            f"unknown suite: {name!r}; known: {', '.join(SUITES)}")
    return SUITES[name]()
