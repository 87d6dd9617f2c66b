"""Controlled flows: the abstract system interface and a fixed-step RK4
integrator for control-linear ODEs on the supported manifolds."""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod

import numpy as np

from . import geometry
from .control import constant_windows
from .exceptions import ConfigurationError, IntegrationDivergedError

# Solve categories used by the descent loop's accounting.
REFERENCE = "reference"
CORRECTED = "corrected"
PROPAGATION = "propagation"
PERTURBATION_SHORT = "perturbation_short"
OTHER = "other"

_CATEGORIES = (REFERENCE, CORRECTED, PROPAGATION, PERTURBATION_SHORT, OTHER)


class SolveCounter:
    """Categorized count of flow-map evaluations.

    Thread-safe: concurrent rollouts may increment without lost updates.
    The headline primal total counts full-horizon reference and corrected
    rollouts plus window propagations; the short perturbation flows are
    tracked separately (they are folded into their corrected rollouts).
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(_CATEGORIES, 0)

    def increment(self, category: str = OTHER) -> None:
        if category not in self._counts:
            raise ValueError(f"unknown solve category: {category!r}")
        with self._lock:
            self._counts[category] += 1

    def counts(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def primal_total(self) -> int:
        with self._lock:
            return (self._counts[REFERENCE] + self._counts[CORRECTED]
                    + self._counts[PROPAGATION])

    def reset(self) -> None:
        with self._lock:
            for key in self._counts:
                self._counts[key] = 0


class ControlSystem(ABC):
    """A controlled flow: state space, flow map, and terminal cost.

    Implementations must guarantee ``flow(x, u, t, t) == x``, the semigroup
    property up to solver tolerance, and bitwise-deterministic costs.
    """

    def __init__(self):
        self.solve_counter = SolveCounter()

    @property
    @abstractmethod
    def control_dim(self) -> int:
        """Number of control components m."""

    @abstractmethod
    def flow(self, x, u, t0: float, t1: float, count_as: str = OTHER):
        """Propagate ``x`` from ``t0`` to ``t1`` under the signal ``u``.

        ``u`` is a PiecewiseConstantControl or a constant vector override.
        Each call increments the solve counter by one under ``count_as``.
        """

    @abstractmethod
    def cost(self, x) -> float:
        """Terminal cost of a state."""

    def flow_map(self, u):
        """The flow under a fixed signal, as a reusable ``(x, s, t)`` map.

        The composition ``cost(flow_map(u)(x, t, T))`` realizes the adjoint
        state at time ``t`` without ever storing it.
        """
        def phi(x, s, t, count_as: str = OTHER):
            return self.flow(x, u, s, t, count_as=count_as)
        return phi


class OdeSystem(ControlSystem):
    """Control-linear ODE ``x' = sum_i u_i(t) f_i(t, x)`` on a manifold.

    Parameters
    ----------
    manifold : geometry.ManifoldSpec
        State space; returned states are always wrapped into its chart.
    basis_fields : sequence of callables
        The m fields ``f_i(t, x) -> velocity``, each mapping a state array
        of shape (d,) to a velocity of the same shape.
    terminal_cost : callable
        ``x -> float``; the Mayer objective evaluated at the horizon.
    dt : float
        Fixed RK4 step size.  The final substep of each constant-control
        segment is shortened so the segment endpoint is hit exactly.
    """

    def __init__(self, manifold, basis_fields, terminal_cost, dt: float = 1e-3):
        super().__init__()
        if dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if len(basis_fields) < 1:
            raise ConfigurationError("at least one basis field is required")
        self.manifold = manifold
        self.basis_fields = tuple(basis_fields)
        self.terminal_cost = terminal_cost
        self.dt = float(dt)

    @property
    def control_dim(self) -> int:
        return len(self.basis_fields)

    @property
    def state_dim(self) -> int:
        return self.manifold.dim

    def cost(self, x) -> float:
        return float(self.terminal_cost(np.atleast_1d(np.asarray(x, dtype=float))))

    def _velocity(self, t: float, x: np.ndarray, u_vec: np.ndarray) -> np.ndarray:
        v = np.zeros_like(x)
        for ui, field in zip(u_vec, self.basis_fields):
            if ui != 0.0:
                v = v + ui * np.asarray(field(t, x), dtype=float)
        return v

    def _rk4_segment(self, x: np.ndarray, u_vec: np.ndarray,
                     s0: float, s1: float) -> np.ndarray:
        """Classical RK4 over one constant-control span.

        Takes ``floor(span/dt)`` full steps of size ``dt`` and one shortened
        final step, so the integrator never crosses a control switch and
        lands on ``s1`` exactly.
        """
        span = s1 - s0
        if span <= 0.0:
            return x
        n_full = int(np.floor(span / self.dt + 1e-9))
        h_last = span - n_full * self.dt
        if h_last < 1e-12 * max(self.dt, span):
            h_last = 0.0
        for k in range(n_full + (1 if h_last > 0.0 else 0)):
            t = s0 + k * self.dt
            h = self.dt if k < n_full else h_last
            k1 = self._velocity(t, x, u_vec)
            k2 = self._velocity(t + 0.5 * h, x + 0.5 * h * k1, u_vec)
            k3 = self._velocity(t + 0.5 * h, x + 0.5 * h * k2, u_vec)
            k4 = self._velocity(t + h, x + h * k3, u_vec)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise IntegrationDivergedError(
                    t + h, f"non-finite state at t={t + h:.6g}")
        return x

    def flow(self, x, u, t0: float, t1: float, count_as: str = OTHER):
        if t1 < t0:
            raise ValueError("t1 must be >= t0")
        x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
        if x.shape != (self.state_dim,):
            raise ConfigurationError(
                f"state must have shape ({self.state_dim},), got {x.shape}")
        for s0, s1, value in constant_windows(u, t0, t1):
            if value.shape != (self.control_dim,):
                raise ConfigurationError(
                    f"control must have {self.control_dim} components")
            x = self._rk4_segment(x, value, s0, s1)
        self.solve_counter.increment(count_as)
        return geometry.wrap(self.manifold, x)
