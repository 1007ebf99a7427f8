"""Income processes, initial-state laws and seeded path simulation.

Noise is generated from counter-based Philox streams keyed by
``(master seed, stream id, path index)``, so every path's draws are a
deterministic function of the seed and its own index.  Simulations are
therefore bit-reproducible regardless of how paths might be scheduled
across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ConfigurationError, TimeGrid

__all__ = [
    "GBM",
    "CustomIncome",
    "PointLaw",
    "UniformLaw",
    "LogNormalLaw",
    "ParetoLaw",
    "IncomeModel",
    "path_rng",
    "derive_seed",
    "sample_initial",
    "simulate_income",
]

# Stream ids reserve separate noise channels per purpose so adding a
# consumer never shifts another consumer's draws.
STREAM_INCOME_NOISE = 0
STREAM_INCOME_INIT = 1
STREAM_WEALTH_INIT = 2


def path_rng(seed: int, path_index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one path's private noise stream."""
    key = (int(seed) << 64) | ((int(stream) & 0xFFFFFFFF) << 32) | (int(path_index) & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, index: int) -> int:
    """Derive a child master seed (used for per-cohort seeding)."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _path_normals(seed: int, n_paths: int, n_steps: int, stream: int) -> np.ndarray:
    z = np.empty((n_paths, n_steps))
    for i in range(n_paths):
        z[i] = path_rng(seed, i, stream).standard_normal(n_steps)
    return z


# -- initial-state laws ----------------------------------------------


@dataclass(frozen=True)
class PointLaw:
    value: float

    def sample(self, n: int, seed: int, stream: int) -> np.ndarray:
        return np.full(n, float(self.value))

    @property
    def mean(self) -> float:
        return float(self.value)

    def shifted(self, offset: float) -> "PointLaw":
        return PointLaw(self.value + offset)


@dataclass(frozen=True)
class UniformLaw:
    lo: float
    hi: float

    def __post_init__(self):
        if self.hi < self.lo:
            raise ConfigurationError(f"uniform law needs lo <= hi, got [{self.lo}, {self.hi}]")

    def sample(self, n: int, seed: int, stream: int) -> np.ndarray:
        u = np.empty(n)
        for i in range(n):
            u[i] = path_rng(seed, i, stream).random()
        return self.lo + (self.hi - self.lo) * u

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def shifted(self, offset: float) -> "UniformLaw":
        return UniformLaw(self.lo + offset, self.hi + offset)


@dataclass(frozen=True)
class LogNormalLaw:
    m: float
    s: float

    def __post_init__(self):
        if self.s < 0:
            raise ConfigurationError(f"log-normal scale must be >= 0, got {self.s}")

    def sample(self, n: int, seed: int, stream: int) -> np.ndarray:
        z = _path_normals(seed, n, 1, stream)[:, 0]
        return np.exp(self.m + self.s * z)

    @property
    def mean(self) -> float:
        return float(np.exp(self.m + 0.5 * self.s**2))


@dataclass(frozen=True)
class ParetoLaw:
    scale: float
    shape: float

    def __post_init__(self):
        if self.scale <= 0 or self.shape <= 0:
            raise ConfigurationError(
                f"Pareto law needs positive scale and shape, got ({self.scale}, {self.shape})"
            )

    def sample(self, n: int, seed: int, stream: int) -> np.ndarray:
        u = np.empty(n)
        for i in range(n):
            # Guard against u = 0, which would send the draw to infinity.
            u[i] = 1.0 - path_rng(seed, i, stream).random()
        return self.scale * np.power(u, -1.0 / self.shape)

    @property
    def mean(self) -> float:
        if self.shape <= 1:
            return float("inf")
        return self.scale * self.shape / (self.shape - 1.0)


def sample_initial(law, n: int, seed: int, stream: int) -> np.ndarray:
    return law.sample(n, seed, stream)


# -- income dynamics -------------------------------------------------


@dataclass(frozen=True)
class GBM:
    """Geometric Brownian motion coefficients: drift mu*eta, vol sigma*eta."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError(f"volatility must be >= 0, got {self.sigma}")

    def drift(self, t, eta):
        return self.mu * eta

    def vol(self, t, eta):
        return self.sigma * eta


@dataclass(frozen=True)
class CustomIncome:
    """User-supplied drift/vol coefficient functions of (t, eta)."""

    drift: Callable
    vol: Callable


@dataclass(frozen=True)
class IncomeModel:
    kind: GBM | CustomIncome
    initial_law: PointLaw | UniformLaw | LogNormalLaw

    def __post_init__(self):
        law = self.initial_law
        if isinstance(law, PointLaw) and law.value < 0:
            raise ConfigurationError(f"income must be >= 0, got initial value {law.value}")
        if isinstance(law, UniformLaw) and law.lo < 0:
            raise ConfigurationError(f"income support must be >= 0, got lo={law.lo}")

    def conditional_mean_horizon(self, eta, horizon):
        """``E[eta_{t+h} | eta_t]`` when available in closed form (GBM)."""
        if isinstance(self.kind, GBM):
            return np.asarray(eta) * np.exp(self.kind.mu * np.asarray(horizon))
        raise NotImplementedError("closed-form conditional mean only available for GBM income")


def simulate_income(
    model: IncomeModel,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Euler-Maruyama income paths, shape ``(n_paths, M + 1)``.

    Each step applies ``eta += drift*dt + vol*sqrt(dt)*z`` and then
    floors the state at 0, preserving the nonnegative income state
    space that the continuous model guarantees but the Euler scheme
    does not.
    """
    if n_paths < 1:
        raise ConfigurationError(f"n_paths must be >= 1, got {n_paths}")
    if initial is None:
        initial = sample_initial(model.initial_law, n_paths, seed, STREAM_INCOME_INIT)
    dt = grid.dt
    sqrt_dt = np.sqrt(dt)
    kind = model.kind
    sigma_zero = isinstance(kind, GBM) and kind.sigma == 0.0
    z = None if sigma_zero else _path_normals(seed, n_paths, grid.M, STREAM_INCOME_NOISE)
    eta = np.empty((n_paths, grid.M + 1))
    eta[:, 0] = np.maximum(initial, 0.0)
    nodes = grid.nodes
    for j in range(grid.M):
        cur = eta[:, j]
        step = kind.drift(nodes[j], cur) * dt
        if not sigma_zero:
            step = step + kind.vol(nodes[j], cur) * sqrt_dt * z[:, j]
        eta[:, j + 1] = np.maximum(cur + step, 0.0)
    return eta
