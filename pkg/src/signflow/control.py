"""Piecewise-constant admissible controls on a uniform sampling grid."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigurationError

# Relative snap tolerance for classifying times that sit a rounding error
# away from a window boundary.
_BOUNDARY_SNAP = 1e-9


class ControlBox:
    """Box of admissible control values, ``lo_i <= u_i <= hi_i``."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ConfigurationError("lo and hi must be 1-d arrays of equal shape")
        if np.any(self.lo > self.hi):
            raise ConfigurationError("control box requires lo <= hi")
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @classmethod
    def symmetric(cls, m: int, bound: float = 1.0) -> "ControlBox":
        """The default box [-bound, +bound]^m."""
        return cls(-bound * np.ones(m), bound * np.ones(m))

    @property
    def control_dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, u, atol: float = 1e-12) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(
            np.all(u >= self.lo - atol) and np.all(u <= self.hi + atol)
        )


class PiecewiseConstantControl:
    """Control signal holding a constant vector on each sampling window.

    The horizon ``[0, T]`` is split into ``N`` equal windows; window ``k``
    spans ``[k*T/N, (k+1)*T/N)`` and the final window is closed at ``T``.
    Values are immutable after construction.
    """

    def __init__(self, horizon: float, values, box: ControlBox | None = None):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if horizon <= 0.0:
            raise ConfigurationError("horizon must be positive")
        if values.ndim != 2 or values.shape[0] < 1:
            raise ConfigurationError("values must be an (N, m) array, N >= 1")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("control values must be finite")
        if box is None:
            box = ControlBox.symmetric(values.shape[1])
        if box.control_dim != values.shape[1]:
            raise ConfigurationError("control box dimension mismatch")
        if not box.contains(values):
            raise ConfigurationError("control values outside the box")
        self.horizon = float(horizon)
        self.box = box
        self._values = values.copy()
        self._values.setflags(write=False)

    @classmethod
    def zeros(cls, horizon: float, n_windows: int, control_dim: int,
              box: ControlBox | None = None) -> "PiecewiseConstantControl":
        return cls(horizon, np.zeros((n_windows, control_dim)), box)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_windows(self) -> int:
        return self._values.shape[0]

    @property
    def control_dim(self) -> int:
        return self._values.shape[1]

    @staticmethod
    def uniform_bounds(horizon: float, n_windows: int) -> np.ndarray:
        """Window boundaries 0, T/N, ..., T (shared with the descent loop)."""
        return np.arange(n_windows + 1) * float(horizon) / int(n_windows)

    def window_bounds(self) -> np.ndarray:
        return self.uniform_bounds(self.horizon, self.n_windows)

    def window_index(self, t: float) -> int:
        """Index of the window containing ``t`` (right-continuous)."""
        if t < -_BOUNDARY_SNAP * self.horizon or \
                t > self.horizon * (1.0 + _BOUNDARY_SNAP):
            raise ValueError(f"t={t} outside the horizon [0, {self.horizon}]")
        s = max(t, 0.0) * self.n_windows / self.horizon
        k = int(np.floor(s))
        if s - k > 1.0 - _BOUNDARY_SNAP:
            # t sits a rounding error below the next boundary
            k += 1
        return min(k, self.n_windows - 1)

    def eval(self, t: float) -> np.ndarray:
        """Value held on the window containing ``t``.

        Right-continuous at interior boundaries; the last window is closed
        at ``t = T``.  Raises ``ValueError`` outside ``[0, T]``.
        """
        return self._values[self.window_index(t)]

    def switch_count(self) -> int:
        """Number of window boundaries at which any component changes."""
        if self.n_windows < 2:
            return 0
        diff = self._values[1:] != self._values[:-1]
        return int(np.any(diff, axis=1).sum())

    def __repr__(self):
        return (f"PiecewiseConstantControl(horizon={self.horizon}, "
                f"n_windows={self.n_windows}, control_dim={self.control_dim})")


def constant_windows(u, t0: float, t1: float):
    """Split ``[t0, t1]`` into spans on which the signal ``u`` is constant.

    ``u`` may be a :class:`PiecewiseConstantControl` or a plain vector
    (constant override, as used for short perturbation flows).  Returns a
    list of ``(s0, s1, value)`` with values evaluated at span midpoints so
    boundary rounding cannot select the wrong window.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if not isinstance(u, PiecewiseConstantControl):
        value = np.atleast_1d(np.asarray(u, dtype=float))
        return [(t0, t1, value)]
    bounds = u.window_bounds()
    tiny = _BOUNDARY_SNAP * max(1.0, u.horizon)
    inner = bounds[(bounds > t0 + tiny) & (bounds < t1 - tiny)]
    points = np.concatenate(([t0], inner, [t1]))
    return [
        (float(a), float(b), u.eval(min(0.5 * (a + b), u.horizon)))
        for a, b in zip(points[:-1], points[1:])
    ]
