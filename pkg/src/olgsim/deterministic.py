"""Closed-form benchmark for the noiseless life-cycle problem.

With deterministic exponential income ``eta_t = eta0 * exp(mu * (t - t0))``
and CRRA preferences, optimal consumption is proportional to terminal
wealth, and terminal wealth solves a scalar linear equation.  This
module evaluates that solution by quadrature on the master grid and is
used as the ground-truth oracle (and initial guess) for the stochastic
solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, DiscountSpec, RatePath, TimeGrid
from .utility import UtilitySpec

__all__ = ["DeterministicSolution", "solve_deterministic_crra", "deterministic_payoff"]


@dataclass(frozen=True)
class DeterministicSolution:
    grid: TimeGrid
    consumption: np.ndarray
    wealth: np.ndarray
    terminal_wealth: float
    Xi_L: float
    Theta_L: float


def solve_deterministic_crra(
    w0: float,
    eta0: float,
    mu: float,
    r: RatePath,
    disc: DiscountSpec,
    gamma: float,
    grid: TimeGrid,
) -> DeterministicSolution:
    """Solve the noiseless life-cycle problem on ``grid``.

    Terminal wealth is ``w_L = (A_L w0 + Xi_L) / (1 + Theta_L)`` where
    ``A_t`` is the accumulation factor ``exp(int r)``, ``Xi_L`` the
    accumulated income and ``Theta_L`` the accumulated consumption
    propensity; consumption is then
    ``c_t = lam**(-1/gamma) * exp(-(1/gamma) int_t^L (r - delta)) * w_L``
    and wealth follows by variation of constants.  All integrals use
    the composite trapezoid rule on the grid nodes, so the integrated
    wealth path hits ``w_L`` exactly at the terminal node.
    """
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be > 0, got {gamma}")
    if not disc.lam > 0:
        raise ConfigurationError("deterministic closed form requires bequest intensity lam > 0")
    nodes = grid.nodes
    dt = grid.dt
    rv = r(nodes)
    # Cumulative trapezoid integrals of r and (r - delta) from t0.
    seg_r = 0.5 * (rv[1:] + rv[:-1]) * dt
    I = np.concatenate(([0.0], np.cumsum(seg_r)))
    G = I - disc.delta * (nodes - grid.t0)
    A = np.exp(I)  # accumulation factor A_j = exp(int_{t0}^{t_j} r)
    eta = eta0 * np.exp(mu * (nodes - grid.t0))

    lam_pow = disc.lam ** (-1.0 / gamma)
    # Consumption shape c_j = phi_j * w_L.
    phi = lam_pow * np.exp(-(G[-1] - G) / gamma)
    Xi_L = float(np.trapezoid(A[-1] / A * eta, nodes))
    Theta_L = float(np.trapezoid(A[-1] / A * phi, nodes))
    denom = 1.0 + Theta_L
    assert denom != 0.0, "1 + Theta_L vanished; cannot happen for lam > 0 and bounded r"
    w_L = (A[-1] * w0 + Xi_L) / denom

    consumption = phi * w_L
    # Variation of constants: w_j = A_j * (w0 + int (eta - c)/A).
    integrand = (eta - consumption) / A
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * dt
    wealth = A * (w0 + np.concatenate(([0.0], np.cumsum(seg))))
    return DeterministicSolution(
        grid=grid,
        consumption=consumption,
        wealth=wealth,
        terminal_wealth=float(w_L),
        Xi_L=Xi_L,
        Theta_L=Theta_L,
    )


def deterministic_payoff(
    sol: DeterministicSolution,
    disc: DiscountSpec,
    u1: UtilitySpec,
    u2: UtilitySpec,
) -> float:
    """Discounted utility of the consumption path plus the bequest term."""
    nodes = sol.grid.nodes
    age = nodes - sol.grid.t0
    flow = np.exp(-disc.delta * age) * u1(sol.consumption)
    running = float(np.trapezoid(flow, nodes))
    bequest = disc.lam * np.exp(-disc.delta * sol.grid.L) * float(u2(sol.terminal_wealth))
    return running + bequest
