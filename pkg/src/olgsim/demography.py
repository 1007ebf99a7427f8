"""Demographic flows: birth-date densities over the living population.

A flow assigns to each calendar time ``t`` a probability density
``n(t, b)`` over birth dates ``b`` in ``[t - L, t]``, used to weight
cohorts when aggregating wealth, consumption and income.  Stationary
kinds satisfy ``n(t, b) = n(0, b - t)`` exactly; the exponential kind
tilts the density toward recent births at growth rate ``g``.

The module also provides the derivative identity for moving-window
integrals ``d/dt int f(t,b) n(t,b) db`` (boundary terms plus interior
``dt f`` and ``dt n`` terms), together with a finite-difference cross
check used by the equilibrium solver's diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import ConfigurationError

__all__ = [
    "StationaryUniform",
    "StationaryExponential",
    "CustomFlow",
    "DemographicFlow",
    "leibniz_derivative_check",
]


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _quad(fn, a: float, b: float, n: int = 64) -> float:
    """Gauss-Legendre quadrature of ``fn`` over ``[a, b]``."""
    x, w = _gauss_legendre(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.dot(w, fn(mid + half * x)))


@dataclass(frozen=True)
class StationaryUniform:
    """Equal weight on every living cohort: ``n = 1 / L``."""

    def density(self, L, t, b):
        return np.full_like(np.asarray(b, dtype=float), 1.0 / L)

    def dt_density(self, L, t, b):
        return np.zeros_like(np.asarray(b, dtype=float))


@dataclass(frozen=True)
class StationaryExponential:
    """Births tilted exponentially at growth rate ``g``.

    ``n(t, b) = g e^{g (b - t)} / (1 - e^{-g L})`` for ``g != 0``; the
    ``g -> 0`` limit is the uniform flow.
    """

    g: float

    def density(self, L, t, b):
        b = np.asarray(b, dtype=float)
        if self.g == 0.0:
            return np.full_like(b, 1.0 / L)
        return self.g * np.exp(self.g * (b - t)) / (1.0 - np.exp(-self.g * L))

    def dt_density(self, L, t, b):
        return -self.g * self.density(L, t, b)


@dataclass(frozen=True)
class CustomFlow:
    """User-supplied density ``n(t, b)`` and optional ``dt n(t, b)``."""

    density_fn: Callable
    dt_density_fn: Callable | None = None

    def density(self, L, t, b):
        return np.asarray(self.density_fn(t, np.asarray(b, dtype=float)), dtype=float)

    def dt_density(self, L, t, b):
        if self.dt_density_fn is None:
            raise ConfigurationError(
                "custom demographic flow needs a time-derivative function for this operation"
            )
        return np.asarray(self.dt_density_fn(t, np.asarray(b, dtype=float)), dtype=float)


@dataclass(frozen=True)
class DemographicFlow:
    """A flow of birth-date densities on the calendar window ``[T0, T1]``."""

    kind: StationaryUniform | StationaryExponential | CustomFlow
    L: float
    window: tuple[float, float]

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError(f"lifespan L must be positive, got {self.L}")
        if self.window[1] < self.window[0]:
            raise ConfigurationError(f"window out of order: {self.window}")

    @property
    def stationary(self) -> bool:
        return isinstance(self.kind, (StationaryUniform, StationaryExponential))

    def density(self, t, b):
        return self.kind.density(self.L, t, b)

    def dt_density(self, t, b):
        return self.kind.dt_density(self.L, t, b)

    def normalization(self, t: float, n_quad: int = 64) -> float:
        """Quadrature of ``n(t, .)`` over ``[t - L, t]`` (should be 1)."""
        return _quad(lambda b: self.density(t, b), t - self.L, t, n_quad)

    def norm(self, n_samples: int = 101) -> float:
        """Sampled sup of ``|n|`` plus sampled sup of ``|dt n|``.

        This is the flow magnitude entering the ball radius of the
        fixed-point rate search; sampling covers the calendar window
        and the full age range.
        """
        T0, T1 = self.window
        ts = np.linspace(T0, T1, n_samples) if T1 > T0 else np.array([T0])
        sup_n = 0.0
        sup_dt = 0.0
        for t in ts:
            bs = np.linspace(t - self.L, t, n_samples)
            sup_n = max(sup_n, float(np.max(np.abs(self.density(t, bs)))))
            sup_dt = max(sup_dt, float(np.max(np.abs(self.dt_density(t, bs)))))
        return sup_n + sup_dt


def leibniz_derivative_check(
    f: Callable,
    flow: DemographicFlow,
    t: float,
    n_quad: int = 64,
    fd_step: float = 1e-4,
) -> tuple[float, float]:
    """Derivative of ``t -> int_{t-L}^t f(t,b) n(t,b) db``, two ways.

    The analytic value sums the boundary terms ``f(t,t) n(t,t) -
    f(t,t-L) n(t,t-L)`` and the interior ``dt f`` and ``dt n``
    integrals; the second value is a centered finite difference of the
    integral itself.  ``f`` must be ``C^1``; its time derivative is
    taken by a tight central difference.

    Returns ``(analytic, finite_difference)``.
    """
    L = flow.L
    h_f = 1e-5

    def ft(tt, b):
        return (np.asarray(f(tt + h_f, b), dtype=float) - np.asarray(f(tt - h_f, b), dtype=float)) / (2.0 * h_f)

    def interior(b):
        return np.asarray(f(t, b), dtype=float) * flow.dt_density(t, b) + ft(t, b) * flow.density(t, b)

    analytic = (
        float(np.asarray(f(t, t), dtype=float)) * float(flow.density(t, np.array([t]))[0])
        - float(np.asarray(f(t, t - L), dtype=float)) * float(flow.density(t, np.array([t - L]))[0])
        + _quad(interior, t - L, t, n_quad)
    )

    def window_integral(s):
        return _quad(lambda b: np.asarray(f(s, b), dtype=float) * flow.density(s, b), s - L, s, n_quad)

    fd = (window_integral(t + fd_step) - window_integral(t - fd_step)) / (2.0 * fd_step)
    return analytic, fd
