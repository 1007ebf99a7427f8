"""Cross-sectional conditional-expectation estimators.

The workhorse is a least-squares projection of a per-path target onto
a total-degree polynomial basis in the Markov state ``(w_t, eta_t)``,
in the style of Longstaff-Schwartz regression.  A nested Monte Carlo
estimator is provided as an independent oracle for targets that are
functionals of future income, so the regression can be cross-validated
without trusting its own machinery.

Fits use explicitly accumulated normal equations (no threaded BLAS
reductions) so results are bit-identical regardless of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TimeGrid
from .income import IncomeModel, derive_seed, simulate_income

__all__ = ["RegressionEstimator", "NestedMCEstimator", "polynomial_basis", "solve_normal_equations"]


def polynomial_basis(x: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    """All monomials ``x**i * y**k`` with ``i + k <= degree``."""
    xp = [np.ones_like(x)]
    yp = [np.ones_like(y)]
    for _ in range(degree):
        xp.append(xp[-1] * x)
        yp.append(yp[-1] * y)
    cols = [xp[i] * yp[total - i] for total in range(degree + 1) for i in range(total + 1)]
    return np.column_stack(cols)


def solve_normal_equations(B: np.ndarray, target: np.ndarray, ridge: float = 1e-8, warnings: list | None = None) -> np.ndarray:
    """Least-squares coefficients for ``B @ coef ~ target``.

    Uses explicitly accumulated normal equations (deterministic,
    thread-count independent) with one step of iterative refinement.
    A rank-deficient design matrix falls back to a small ridge penalty
    and records a warning if a list is provided.
    """
    G = np.einsum("ni,nj->ij", B, B, optimize=False)
    rhs = np.einsum("ni,n->i", B, target, optimize=False)
    evals = np.linalg.eigvalsh(G)
    if evals[0] <= B.shape[1] * np.finfo(float).eps * max(evals[-1], 1.0):
        G = G + ridge * np.eye(B.shape[1])
        if warnings is not None:
            warnings.append("rank-deficient design matrix; ridge fallback applied")
    coef = np.linalg.solve(G, rhs)
    # One refinement step recovers accuracy lost to squaring the
    # condition number in the normal equations.
    resid = rhs - np.einsum("ij,j->i", G, coef, optimize=False)
    return coef + np.linalg.solve(G, resid)


@dataclass
class RegressionEstimator:
    """Polynomial least-squares projection on the per-node cross section."""

    degree: int = 3
    ridge: float = 1e-8
    warnings: list = field(default_factory=list)

    def estimate(self, w: np.ndarray, eta: np.ndarray, target: np.ndarray) -> np.ndarray:
        """Project ``target`` onto the polynomial basis in ``(w, eta)``.

        States are standardized before building the basis (an affine
        change of variables, so the fitted span is unchanged).
        """
        w = np.asarray(w, dtype=float)
        eta = np.asarray(eta, dtype=float)
        target = np.asarray(target, dtype=float)
        ws = w.std()
        es = eta.std()
        xn = (w - w.mean()) / ws if ws > 0 else np.zeros_like(w)
        yn = (eta - eta.mean()) / es if es > 0 else np.zeros_like(eta)
        B = polynomial_basis(xn, yn, self.degree)
        coef = solve_normal_equations(B, target, self.ridge, self.warnings)
        return np.einsum("ni,i->n", B, coef, optimize=False)


@dataclass
class NestedMCEstimator:
    """Brute-force conditional means by re-simulation from each state.

    Only supports targets that are functions of terminal income; it
    exists as an oracle to validate the regression estimator, not as a
    production path.
    """

    inner_paths: int = 2000

    def conditional_mean(
        self,
        model: IncomeModel,
        grid: TimeGrid,
        j: int,
        eta_states: np.ndarray,
        terminal_fn,
        seed: int,
    ):
        """``E[terminal_fn(eta_L) | eta_{t_j} = state]`` per state.

        Returns ``(means, standard errors)`` arrays over the states.
        """
        eta_states = np.atleast_1d(np.asarray(eta_states, dtype=float))
        if j >= grid.M:
            vals = terminal_fn(eta_states)
            return vals, np.zeros_like(vals)
        sub = TimeGrid(grid.nodes[j], grid.t_end - grid.nodes[j], grid.M - j)
        means = np.empty(eta_states.shape)
        errs = np.empty(eta_states.shape)
        for i, state in enumerate(eta_states):
            sub_seed = derive_seed(seed, i)
            paths = simulate_income(
                model, sub, self.inner_paths, sub_seed, initial=np.full(self.inner_paths, state)
            )
            vals = terminal_fn(paths[:, -1])
            means[i] = vals.mean()
            errs[i] = vals.std(ddof=1) / np.sqrt(self.inner_paths)
        return means, errs
