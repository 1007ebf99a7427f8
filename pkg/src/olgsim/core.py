"""Shared domain types: time grids, interest-rate paths and discounting.

All types are immutable after construction and safe to share between
threads.  The numerical conventions used throughout the package live
here: a uniform grid of ``M`` steps over a lifespan ``L``, piecewise
linear interest-rate paths with constant extrapolation outside their
grid, and trapezoid-rule integration consistent with the Euler
discretization order of the simulators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "ConfigurationError",
    "TimeGrid",
    "RatePath",
    "DiscountSpec",
    "discount_factor",
]


class ConfigurationError(ValueError):
    """Raised when a model or run configuration is invalid."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_j = t0 + j * dt`` with ``dt = L / M``.

    Parameters
    ----------
    t0 : float
        Start of the window (years).
    L : float
        Length of the window (lifespan, years, > 0).
    M : int
        Number of steps (>= 1); the grid has ``M + 1`` nodes.
    """

    t0: float
    L: float
    M: int

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError(f"lifespan L must be positive, got {self.L}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError(f"step count M must be an integer >= 1, got {self.M}")

    @property
    def dt(self) -> float:
        return self.L / self.M

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = self.t0 + (self.L / self.M) * np.arange(self.M + 1)
        nodes.setflags(write=False)
        return nodes

    @property
    def t_end(self) -> float:
        return self.t0 + self.L


def _as_readonly(values) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RatePath:
    """Deterministic interest-rate path on a time grid.

    Evaluation between nodes is linear interpolation; outside the grid
    the path is extended by its boundary values (constant extrapolation).
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _as_readonly(self.values)
        if vals.shape != (self.grid.M + 1,):
            raise ConfigurationError(
                f"rate path needs {self.grid.M + 1} node values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("rate path values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, grid: TimeGrid) -> "RatePath":
        return cls(grid, np.full(grid.M + 1, float(value)))

    def __call__(self, t):
        return np.interp(t, self.grid.nodes, self.values)

    @property
    def sup_norm(self) -> float:
        # The interpolant's extrema sit at the nodes.
        return float(np.max(np.abs(self.values)))

    def integrate(self, a: float, b: float) -> float:
        """Integral of the path over [a, b] (a <= b), exact for the interpolant."""
        if b < a:
            raise ValueError(f"integration bounds out of order: [{a}, {b}]")
        if b == a:
            return 0.0
        nodes = self.grid.nodes
        interior = nodes[(nodes > a) & (nodes < b)]
        pts = np.concatenate(([a], interior, [b]))
        return float(np.trapezoid(self(pts), pts))

    def shifted(self, delta: float) -> "RatePath":
        """Return the path with ``delta`` added to every node value."""
        return RatePath(self.grid, self.values + delta)


@dataclass(frozen=True)
class DiscountSpec:
    """Time-preference rate ``delta`` and bequest intensity ``lam``."""

    delta: float
    lam: float

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigurationError(f"discount rate must be >= 0, got {self.delta}")
        if self.lam < 0:
            raise ConfigurationError(f"bequest intensity must be >= 0, got {self.lam}")


def discount_factor(r: RatePath, delta: float, t: float, T: float) -> float:
    """``exp(integral_t^T (r_s - delta) ds)`` by trapezoid rule.

    Requires ``t <= T``; the rate path's constant extrapolation applies
    outside its grid.
    """
    if T < t:
        raise ValueError(f"discount_factor needs t <= T, got t={t}, T={T}")
    return float(np.exp(r.integrate(t, T) - delta * (T - t)))
