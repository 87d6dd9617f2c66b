"""Coordinate conventions for the supported state spaces.

Periodic coordinates live on the canonical chart ``[0, 2*pi)`` per
coordinate; Euclidean coordinates are unconstrained.  All operations
broadcast over leading axes, so they accept single points as well as
whole grids of points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

EUCLIDEAN = "euclidean"
CIRCLE = "circle"
TORUS2 = "torus2"


@dataclass(frozen=True)
class ManifoldSpec:
    """A state space described by per-coordinate periods.

    ``periods[j]`` is the period of coordinate ``j``; ``nan`` marks an
    unbounded (Euclidean) coordinate.  Use the classmethod constructors
    rather than instantiating directly.
    """

    kind: str
    periods: tuple[float, ...]

    def __post_init__(self):
        if len(self.periods) < 1:
            raise ValueError("a manifold needs at least one coordinate")
        for p in self.periods:
            if not math.isnan(p) and p <= 0.0:
                raise ValueError(f"periods must be positive, got {p}")
        expected = {CIRCLE: 1, TORUS2: 2}.get(self.kind)
        if expected is not None and len(self.periods) != expected:
            raise ValueError(f"{self.kind} has {expected} coordinate(s)")

    @classmethod
    def euclidean(cls, n: int) -> "ManifoldSpec":
        if n < 1:
            raise ValueError("dimension must be >= 1")
        return cls(EUCLIDEAN, (math.nan,) * n)

    @classmethod
    def circle(cls) -> "ManifoldSpec":
        return cls(CIRCLE, (TWO_PI,))

    @classmethod
    def torus2(cls) -> "ManifoldSpec":
        return cls(TORUS2, (TWO_PI, TWO_PI))

    @property
    def dim(self) -> int:
        return len(self.periods)

    @property
    def is_periodic(self) -> bool:
        return any(not math.isnan(p) for p in self.periods)


def _coordinate_view(m: ManifoldSpec, x: np.ndarray):
    """Yield (index, period-or-None, coordinate slice) per coordinate.

    For one-dimensional manifolds the whole array is treated as values of
    the single coordinate; otherwise the last axis indexes coordinates.
    """
    if m.dim == 1:
        yield 0, m.periods[0], ...
        return
    if x.shape[-1:] != (m.dim,):
        raise ValueError(
            f"expected last axis of length {m.dim}, got shape {x.shape}"
        )
    for j, p in enumerate(m.periods):
        yield j, p, (..., j)


def wrap(m: ManifoldSpec, x) -> np.ndarray:
    """Map every periodic coordinate into its canonical chart [0, period).

    Euclidean coordinates pass through unchanged.  Idempotent; raises
    ``ValueError`` on non-finite input.
    """
    out = np.array(x, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError("cannot wrap non-finite coordinates")
    for _, period, sel in _coordinate_view(m, out):
        if math.isnan(period):
            continue
        c = np.mod(out[sel], period)
        # mod can round up to the period itself for tiny negative inputs
        c = np.where(c >= period, 0.0, c)
        out[sel] = c
    return out


def nearest_lift(m: ManifoldSpec, y, center) -> np.ndarray:
    """Representative of ``y`` closest to ``center`` coordinate-wise.

    Each periodic coordinate of the result lies in
    ``(center - period/2, center + period/2]``; a tie at exactly half a
    period resolves to the upper representative.  Euclidean coordinates
    are returned unchanged.
    """
    y_arr = np.array(y, dtype=float)
    c_arr = np.asarray(center, dtype=float)
    if not (np.all(np.isfinite(y_arr)) and np.all(np.isfinite(c_arr))):
        raise ValueError("cannot lift non-finite coordinates")
    out = np.array(np.broadcast_arrays(y_arr, c_arr)[0], dtype=float)
    c_b = np.broadcast_to(c_arr, out.shape)
    for _, period, sel in _coordinate_view(m, out):
        if math.isnan(period):
            continue
        delta = np.mod(out[sel] - c_b[sel], period)
        delta = np.where(delta > 0.5 * period, delta - period, delta)
        out[sel] = c_b[sel] + delta
    return out
