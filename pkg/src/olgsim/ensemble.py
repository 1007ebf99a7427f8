"""Path ensemble container shared by the stochastic solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TimeGrid

__all__ = ["PathEnsemble"]


@dataclass
class PathEnsemble:
    """Seeded ``n_paths x (M+1)`` arrays of income/wealth/consumption.

    The income array is fixed at construction; wealth and consumption
    are filled in (and replaced wholesale) by the solvers.  Arrays for
    a given ``(seed, config)`` are bit-reproducible because all noise
    is drawn from per-path counter-based streams.
    """

    grid: TimeGrid
    n_paths: int
    seed: int
    income: np.ndarray = field(repr=False)
    wealth: np.ndarray = field(default=None, repr=False)
    consumption: np.ndarray = field(default=None, repr=False)
    initial_wealth_law: object = None

    def __post_init__(self):
        shape = (self.n_paths, self.grid.M + 1)
        if self.income.shape != shape:
            raise ValueError(f"income array must have shape {shape}, got {self.income.shape}")

    @property
    def terminal_wealth(self) -> np.ndarray:
        return self.wealth[:, -1]

    def state(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-path Markov state ``(w_{t_j}, eta_{t_j})`` at node ``j``."""
        return self.wealth[:, j], self.income[:, j]
