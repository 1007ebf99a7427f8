"""Stochastic life-cycle solver: Picard iteration on the wealth map.

Optimal consumption satisfies

    c_t = (u1')^{-1}( lam * exp(int_t^L (r - delta)) * E[u2'(w_L) | F_t] )

so each Picard sweep estimates the conditional expectation of marginal
bequest utility on the Markov state ``(w_t, eta_t)`` — by default
through a backward pass that composes cross-sectionally fitted state
surfaces with the one-step income transition — maps it through the
inverse marginal utility, and rebuilds wealth from the Euler budget
recursion.  Iteration continues until the wealth ensemble is a fixed
point.  The module also provides the natural borrowing limit, the
Euler-equation diagnostic, Monte Carlo payoff evaluation, a constant-
rate wealth sweep, and the linear-BSDE valuation used as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, DiscountSpec, RatePath, TimeGrid, discount_factor
from .deterministic import solve_deterministic_crra
from .ensemble import PathEnsemble
from .income import (
    GBM,
    STREAM_WEALTH_INIT,
    IncomeModel,
    PointLaw,
    sample_initial,
    simulate_income,
)
from .regression import RegressionEstimator, polynomial_basis, solve_normal_equations
from .utility import UtilitySpec

__all__ = [
    "LifecycleSolution",
    "SweepRow",
    "consumption_from_terminal",
    "theta_map_apply",
    "picard_solve",
    "natural_borrowing_limit",
    "nbl_surface",
    "euler_equation_residual",
    "payoff_evaluate",
    "expected_wealth_sweep",
    "linear_bsde_value",
]


@dataclass
class LifecycleSolution:
    ensemble: PathEnsemble
    rate: RatePath
    iterations: int
    contraction_ratios: np.ndarray
    converged: bool
    kappa_used: float
    warnings: list = field(default_factory=list)

    @property
    def grid(self) -> TimeGrid:
        return self.ensemble.grid


def _estimate_clipped(estimator, w, eta, target):
    """Regression estimate clipped to the target's range.

    A conditional expectation always lies between the essential bounds
    of its target, so clipping to the sample range is a valid
    projection; it protects the inverse marginal from spurious
    negative estimates in thin tails.
    """
    est = estimator.estimate(w, eta, target)
    return np.clip(est, target.min(), target.max())


def _bequest_factors(u_rate: RatePath, disc: DiscountSpec, grid: TimeGrid) -> np.ndarray:
    """``lam * exp(int_{t_j}^{L}(r - delta))`` per node."""
    T = grid.t_end
    return np.array(
        [disc.lam * discount_factor(u_rate, disc.delta, t, T) for t in grid.nodes]
    )


def consumption_from_terminal(
    u1: UtilitySpec,
    u2: UtilitySpec,
    disc: DiscountSpec,
    r: RatePath,
    ensemble: PathEnsemble,
    estimator,
    j: int,
) -> np.ndarray:
    """Per-path consumption at node ``j`` from the terminal-wealth rule."""
    g = u2.marginal(ensemble.terminal_wealth)
    factor = disc.lam * discount_factor(r, disc.delta, ensemble.grid.nodes[j], ensemble.grid.t_end)
    if j >= ensemble.grid.M:
        cond = g
    else:
        w, eta = ensemble.state(j)
        cond = _estimate_clipped(estimator, w, eta, g)
    return u1.inverse_marginal(factor * cond)


def theta_map_apply(
    consumption: np.ndarray,
    income: np.ndarray,
    w0_samples: np.ndarray,
    r: RatePath,
    grid: TimeGrid,
) -> np.ndarray:
    """Euler budget recursion ``w_{j+1} = w_j + (r w_j + eta_j - c_j) dt``."""
    dt = grid.dt
    rv = r(grid.nodes)
    wealth = np.empty_like(income)
    wealth[:, 0] = w0_samples
    for j in range(grid.M):
        cur = wealth[:, j]
        wealth[:, j + 1] = cur + (rv[j] * cur + income[:, j] - consumption[:, j]) * dt
    return wealth


def _deterministic_proxy_wealth(
    w0_samples: np.ndarray,
    income: np.ndarray,
    model: IncomeModel,
    r: RatePath,
    disc: DiscountSpec,
    u1: UtilitySpec,
    grid: TimeGrid,
) -> np.ndarray:
    """Initial Picard guess: the noiseless closed form, path by path.

    The closed-form terminal wealth is affine in ``(w0, eta0)``, so one
    reference solve gives the whole ensemble.  With no bequest motive
    the closed form does not exist; fall back to zero-consumption
    compounding.
    """
    if disc.lam <= 0:
        zeros = np.zeros_like(income)
        return theta_map_apply(zeros, income, w0_samples, r, grid)
    mu = model.kind.mu if isinstance(model.kind, GBM) else 0.0
    base = solve_deterministic_crra(0.0, 1.0, mu, r, disc, u1.gamma, grid)
    unit_w = solve_deterministic_crra(1.0, 0.0, mu, r, disc, u1.gamma, grid)
    # terminal wealth w_L = unit_w.terminal * w0 + base.terminal * eta0
    w_L = unit_w.terminal_wealth * w0_samples + base.terminal_wealth * income[:, 0]
    phi = base.consumption / base.terminal_wealth if base.terminal_wealth != 0 else None
    if phi is None:
        phi = unit_w.consumption / unit_w.terminal_wealth
    consumption = np.outer(w_L, phi)
    return theta_map_apply(consumption, income, w0_samples, r, grid)


def _linearized_gain(r: RatePath, disc: DiscountSpec, u1: UtilitySpec, grid: TimeGrid) -> float:
    """Magnitude of the solution map's linearized terminal-wealth gain.

    Equals ``Theta_L``, the accumulated consumption propensity of the
    noiseless closed form; 0 without a bequest motive (no feedback).
    """
    if disc.lam <= 0:
        return 0.0
    return solve_deterministic_crra(1.0, 0.0, 0.0, r, disc, u1.gamma, grid).Theta_L


class _NodeSurface:
    """Fitted conditional-expectation surface at one time node.

    The target ``y = E[u2'(w_L) | state]`` behaves like
    ``(w - wbar)^{-gamma}`` near the borrowing frontier ``wbar``, which
    no low-degree polynomial can represent.  The surface therefore fits
    ``z = y * gap^gamma`` (``gap = w - wbar``, floored) — a slowly
    varying quantity whose projection is still linear in ``y`` — and
    divides the frontier shape back in at evaluation time.  Distressed
    rows at the gap floor are excluded from the fit so their extreme
    targets cannot poison the cross section, and predictions are
    clipped to the fitted targets' range (a conditional expectation
    cannot leave the range of its target).
    """

    def __init__(self, w, eta, y, wbar_coeff, gamma, gap_floor, degree, ridge, warnings):
        self.wbar_coeff = wbar_coeff
        self.gamma = gamma
        self.gap_floor = gap_floor
        self.degree = degree
        gap = w + eta * wbar_coeff
        ok = gap > gap_floor
        if ok.sum() < 50:
            ok = np.ones(w.shape, dtype=bool)
        ws, es, ys = w[ok], eta[ok], y[ok]
        z = ys * np.maximum(gap[ok], gap_floor) ** gamma
        # A degenerate (noiseless) coordinate keeps unit scale so the
        # centred basis stays bounded off the fitting point.
        self.w_loc, self.w_scale = ws.mean(), ws.std() if ws.std() > 1e-9 else 1.0
        self.e_loc, self.e_scale = es.mean(), es.std() if es.std() > 1e-9 else 1.0
        B = polynomial_basis((ws - self.w_loc) / self.w_scale, (es - self.e_loc) / self.e_scale, degree)
        self.coef = solve_normal_equations(B, z, ridge, warnings)
        self.y_lo, self.y_hi = ys.min(), ys.max()
        # On a degenerate (noiseless) cross section the target range is
        # a single point; clipping to it would flatten the surface, and
        # the frontier-shape extrapolation z/gap^gamma is exact there.
        self.clip = ws.std() > 1e-9

    def __call__(self, w, eta):
        gap = np.maximum(w + eta * self.wbar_coeff, self.gap_floor)
        B = polynomial_basis((w - self.w_loc) / self.w_scale, (eta - self.e_loc) / self.e_scale, self.degree)
        z = np.einsum("ni,i->n", B, self.coef, optimize=False)
        out = z / gap**self.gamma
        if self.clip:
            out = np.clip(out, self.y_lo, self.y_hi)
        return np.maximum(out, 0.0)


class _TerminalSurface:
    """Exact terminal condition ``y_L = u2'(w_L)``."""

    def __init__(self, u2: UtilitySpec):
        self.u2 = u2

    def __call__(self, w, eta):
        return self.u2.marginal(w)


class _BackwardRecursion:
    """One-step expectation machinery shared by both solver passes."""

    def __init__(self, u1, u2, model, r, grid, factors, nbl_kern, gap_floor, degree, ridge, warnings, quad_points, inner_iters):
        self.u1, self.u2, self.model, self.grid = u1, u2, model, grid
        self.factors = factors
        self.nbl_kern = nbl_kern
        self.gap_floor = gap_floor
        self.degree, self.ridge, self.warnings = degree, ridge, warnings
        self.inner_iters = inner_iters
        # Gauss-Hermite nodes/weights rescaled for a standard normal.
        xh, wh = np.polynomial.hermite.hermgauss(quad_points)
        self.z_nodes = np.sqrt(2.0) * xh
        self.z_weights = wh / np.sqrt(np.pi)
        self.rv = r(grid.nodes)
        self.dt = grid.dt
        self.sqrt_dt = np.sqrt(grid.dt)

    def step_expectation(self, surface_next, j, w, eta, c):
        """``E[y_{j+1}(w', eta') | w, eta]`` for one Euler step with consumption ``c``."""
        t = self.grid.nodes[j]
        w_next = w + (self.rv[j] * w + eta - c) * self.dt
        drift = self.model.kind.drift(t, eta)
        vol = self.model.kind.vol(t, eta)
        base = eta + drift * self.dt
        if np.all(vol == 0.0):
            return surface_next(w_next, np.maximum(base, 0.0))
        q = len(self.z_nodes)
        W = np.broadcast_to(w_next, (q, w.shape[0]))
        E = np.maximum(base[None, :] + vol[None, :] * self.sqrt_dt * self.z_nodes[:, None], 0.0)
        vals = surface_next(W.ravel(), E.ravel()).reshape(q, w.shape[0])
        return self.z_weights @ vals

    def consumption_at(self, surface_next, j, w, eta):
        """Solve ``c = (u1')^{-1}(factor * E[y_{j+1} | state])`` (c enters the step).

        The consumption feedback into next-period wealth carries a
        factor of ``dt``, so this inner fixed point contracts at
        O(dt * relative surface slope) and a couple of passes reach
        well below the solver tolerance.
        """
        c = np.zeros_like(w)
        y = None
        for _ in range(self.inner_iters):
            y = self.step_expectation(surface_next, j, w, eta, c)
            c = self.u1.inverse_marginal(self.factors[j] * y)
        return c, y

    def fit_node(self, j, w, eta, y):
        return _NodeSurface(
            w, eta, y, self.nbl_kern[j], self.u2.gamma, self.gap_floor, self.degree, self.ridge, self.warnings
        )


def _dp_sweep(rec: _BackwardRecursion, wealth, income, w0_samples, nbl, disc):
    """One solution-map application: backward surface pass + capped forward pass.

    The backward pass composes each node's conditional expectation from
    the next node's fitted surface and the exact one-step transition,
    so the terminal condition enters as the function ``u2'`` rather
    than as simulated terminal values (no direct terminal-wealth
    feedback).  The forward pass re-evaluates consumption at the newly
    reached states and caps it so no path is pushed below next period's
    natural borrowing limit — a constraint the exact solution satisfies
    almost surely, so the fixed point is unchanged.
    """
    grid = rec.grid
    M = grid.M
    surfaces: list = [None] * (M + 1)
    surfaces[M] = _TerminalSurface(rec.u2)
    for j in range(M - 1, -1, -1):
        _, y = rec.consumption_at(surfaces[j + 1], j, wealth[:, j], income[:, j])
        surfaces[j] = rec.fit_node(j, wealth[:, j], income[:, j], y)

    dt = grid.dt
    w = np.empty_like(income)
    c = np.empty_like(income)
    w[:, 0] = w0_samples
    for j in range(M):
        c_j, _ = rec.consumption_at(surfaces[j + 1], j, w[:, j], income[:, j])
        cap = (w[:, j] * (1.0 + rec.rv[j] * dt) + income[:, j] * dt - nbl[:, j + 1]) / dt
        c[:, j] = np.minimum(c_j, np.maximum(cap, 0.0))
        w[:, j + 1] = w[:, j] + (rec.rv[j] * w[:, j] + income[:, j] - c[:, j]) * dt
    c[:, M] = rec.u1.inverse_marginal(disc.lam * rec.u2.marginal(w[:, M]))
    return w, c


def picard_solve(
    u1: UtilitySpec,
    u2: UtilitySpec,
    disc: DiscountSpec,
    r: RatePath,
    model: IncomeModel,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    initial_wealth_law=None,
    estimator=None,
    damping: float | None = None,
    tol_scale: float = 1e-6,
    k_max: int = 200,
    income: np.ndarray | None = None,
    wealth_init: np.ndarray | None = None,
    scheme: str = "recursive",
    quad_points: int = 5,
    inner_iters: int = 3,
) -> LifecycleSolution:
    """Iterate the wealth solution map to its fixed point.

    Starts from the noiseless closed-form proxy (or ``wealth_init``),
    applies damping ``w <- theta*w_new + (1-theta)*w_old``, and stops
    when the residual ``sup |Theta(w) - w|`` is below
    ``tol_scale * (1 + |E[w0]|)`` or after ``k_max`` sweeps.

    Two estimation schemes are available for the conditional
    expectation ``E[u2'(w_L) | state]``:

    - ``"recursive"`` (default): a backward pass builds the
      expectation node by node from fitted state surfaces and
      Gauss-Hermite quadrature over the one-step income shock, so the
      terminal condition enters as a function and the outer iteration
      only has to stabilize the fitting clouds.
    - ``"terminal"``: each node regresses the simulated terminal
      marginals directly on the current state.  This is the plain
      solution-map iteration; its linearization amplifies
      terminal-wealth errors by about ``-Theta_L``, so for long
      lifespans it diverges unless damped — it is kept as the
      reference implementation for contraction diagnostics.

    Damping starts at ``damping`` (default 1.0) and is halved whenever
    the residual expands over a three-iteration window (ratio product
    >= 1), which also breaks period-two cycles.  Non-convergence is
    reported, not raised: the ratio history is the diagnostic for
    lifespans beyond the contraction regime.
    """
    if scheme not in ("recursive", "terminal"):
        raise ConfigurationError(f"unknown estimation scheme {scheme!r}")
    if initial_wealth_law is None:
        initial_wealth_law = PointLaw(0.0)
    if estimator is None:
        estimator = RegressionEstimator()
    if income is None:
        income = simulate_income(model, grid, n_paths, seed)
    w0_samples = sample_initial(initial_wealth_law, n_paths, seed, STREAM_WEALTH_INIT)
    tol_fix = tol_scale * (1.0 + abs(float(np.mean(w0_samples))))

    ensemble = PathEnsemble(
        grid=grid,
        n_paths=n_paths,
        seed=seed,
        income=income,
        initial_wealth_law=initial_wealth_law,
    )
    if wealth_init is not None:
        wealth = np.array(wealth_init, dtype=float, copy=True)
        wealth[:, 0] = w0_samples
    else:
        wealth = _deterministic_proxy_wealth(w0_samples, income, model, r, disc, u1, grid)

    factors = _bequest_factors(r, disc, grid)
    M = grid.M

    if disc.lam <= 0:
        # No bequest motive: consumption saturates at the kappa clamp
        # immediately and there is no feedback to iterate.
        consumption = np.full_like(income, u1.inverse_marginal(0.0))
        wealth = theta_map_apply(consumption, income, w0_samples, r, grid)
        ensemble.wealth = wealth
        ensemble.consumption = consumption
        return LifecycleSolution(
            ensemble=ensemble,
            rate=r,
            iterations=1,
            contraction_ratios=np.array([]),
            converged=True,
            kappa_used=u1.kappa,
            warnings=list(getattr(estimator, "warnings", [])),
        )

    # The backward scheme's residual is dominated by a period-two mode
    # (hoard/splurge alternation with multiplier near -1); damping 1/2
    # annihilates it exactly, so that is its default.  The plain
    # terminal scheme keeps full steps and relies on automatic halving.
    if damping is None:
        damping = 0.5 if scheme == "recursive" else 1.0
    theta = damping
    warnings: list = getattr(estimator, "warnings", [])
    if scheme == "recursive":
        mu = model.kind.mu if isinstance(model.kind, GBM) else 0.0
        nbl_kern = _nbl_kernels(r, grid, mu)
        nbl = -income * nbl_kern[None, :]
        gap_floor = 0.1 * (1.0 + abs(float(np.mean(w0_samples))))
        rec = _BackwardRecursion(
            u1, u2, model, r, grid, factors, nbl_kern, gap_floor,
            getattr(estimator, "degree", 3), getattr(estimator, "ridge", 1e-8),
            warnings, quad_points, inner_iters,
        )

    ratios = []
    prev_diff = None
    window = []
    converged = False
    consumption = np.zeros_like(income)
    iterations = 0

    for k in range(k_max):
        iterations = k + 1
        if scheme == "recursive":
            wealth_new, consumption = _dp_sweep(rec, wealth, income, w0_samples, nbl, disc)
        else:
            g = u2.marginal(wealth[:, -1])
            g_lo, g_hi = g.min(), g.max()
            for j in range(M + 1):
                if j == M:
                    cond = g
                else:
                    est = estimator.estimate(wealth[:, j], income[:, j], g)
                    cond = np.clip(est, g_lo, g_hi)
                consumption[:, j] = u1.inverse_marginal(factors[j] * cond)
            wealth_new = theta_map_apply(consumption, income, w0_samples, r, grid)
        diff = float(np.max(np.abs(wealth_new - wealth)))
        if prev_diff is not None and prev_diff > 0:
            ratio = diff / prev_diff
            ratios.append(ratio)
            window.append(ratio)
            if len(window) >= 3:
                if np.prod(window[-3:]) >= 1.0:
                    theta = max(theta / 2.0, 1.0 / 1024.0)
                    window.clear()
                else:
                    window.pop(0)
        prev_diff = diff
        if diff < tol_fix:
            wealth = wealth_new
            converged = True
            break
        wealth = theta * wealth_new + (1.0 - theta) * wealth

    ensemble.wealth = wealth
    ensemble.consumption = consumption
    return LifecycleSolution(
        ensemble=ensemble,
        rate=r,
        iterations=iterations,
        contraction_ratios=np.array(ratios),
        converged=converged,
        kappa_used=u1.kappa,
        warnings=list(warnings),
    )


# -- natural borrowing limit -----------------------------------------


def _nbl_kernels(r: RatePath, grid: TimeGrid, mu: float) -> np.ndarray:
    """``int_{t_j}^{L} exp(-int_{t_j}^{s} r) * exp(mu (s - t_j)) ds`` for every j.

    Uses the cumulative trapezoid integral of the rate on the grid, so
    the discounting is consistent with every other quadrature in the
    package.  The terminal kernel is exactly 0 (empty integral).
    """
    nodes = grid.nodes
    dt = grid.dt
    rv = r(nodes)
    I = np.concatenate(([0.0], np.cumsum(0.5 * (rv[1:] + rv[:-1]) * dt)))
    kernels = np.empty(grid.M + 1)
    for j in range(grid.M + 1):
        s = nodes[j:]
        disc = np.exp(-(I[j:] - I[j]) + mu * (s - nodes[j]))
        kernels[j] = np.trapezoid(disc, s) if s.size > 1 else 0.0
    return kernels


def natural_borrowing_limit(
    r: RatePath,
    model: IncomeModel,
    income: np.ndarray,
    grid: TimeGrid,
    j: int,
    estimator=None,
    wealth: np.ndarray | None = None,
) -> np.ndarray:
    """Per-path borrowing limit at node ``j``.

    The limit is minus the discounted expected future income.  For GBM
    income the conditional mean is exact (``eta_t e^{mu (s-t)}``); for
    custom models conditional means are estimated by regression on the
    cross section, which requires the wealth state.
    """
    if isinstance(model.kind, GBM):
        return -income[:, j] * _nbl_kernels(r, grid, model.kind.mu)[j]
    if estimator is None:
        estimator = RegressionEstimator()
    if wealth is None:
        wealth = np.zeros_like(income)
    nodes = grid.nodes
    t_j = nodes[j]
    cond = np.empty((income.shape[0], grid.M + 1 - j))
    cond[:, 0] = income[:, j]
    for s in range(j + 1, grid.M + 1):
        cond[:, s - j] = _estimate_clipped(estimator, wealth[:, j], income[:, j], income[:, s])
    disc = np.array([np.exp(-r.integrate(t_j, s)) for s in nodes[j:]])
    return -np.trapezoid(cond * disc, nodes[j:], axis=1)


def nbl_surface(r: RatePath, model: IncomeModel, income: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Borrowing limits at every (path, node); GBM only (exact kernel)."""
    if not isinstance(model.kind, GBM):
        raise ConfigurationError("nbl_surface requires GBM income (exact conditional means)")
    return -income * _nbl_kernels(r, grid, model.kind.mu)[None, :]


# -- diagnostics and payoff ------------------------------------------


def euler_equation_residual(
    solution: LifecycleSolution,
    u1: UtilitySpec,
    disc: DiscountSpec,
    horizon_steps: int = 1,
    estimator=None,
):
    """Mean/max absolute Euler-equation residual across nodes.

    At each node the marginal-rate-of-substitution ratio
    ``u1'(c_t) / E[u1'(c_{t+h}) | F_t]`` is compared with the
    accumulation target ``exp(int_t^{t+h} (r - delta))``.

    The conditional expectation is fitted in log space: marginal
    utility spans several orders of magnitude across the cross section
    and a polynomial in levels cannot track it, while its logarithm is
    slowly varying.  The exponentiation bias is quadratic in the
    one-step conditional spread, which is O(dt) here, so it is far
    below the residuals being measured.
    """
    if estimator is None:
        estimator = RegressionEstimator()
    ens = solution.ensemble
    grid = ens.grid
    d = int(horizon_steps)
    nodes = grid.nodes
    per_node = []
    for j in range(grid.M + 1 - d):
        m_now = u1.marginal(ens.consumption[:, j])
        m_fut = u1.marginal(ens.consumption[:, j + d])
        w, eta = ens.state(j)
        cond = np.exp(_estimate_clipped(estimator, w, eta, np.log(np.maximum(m_fut, 1e-300))))
        target = discount_factor(solution.rate, disc.delta, nodes[j], nodes[j + d])
        per_node.append(float(np.mean(np.abs(m_now / cond - target))))
    per_node = np.array(per_node)
    return float(per_node.mean()), float(per_node.max()), per_node


def payoff_evaluate(
    ensemble: PathEnsemble,
    disc: DiscountSpec,
    u1: UtilitySpec,
    u2: UtilitySpec,
    penalty_coeff: float = 0.0,
) -> float:
    """Monte Carlo payoff of the ensemble's consumption/terminal wealth.

    Left-Riemann sum of discounted flow utility plus the bequest term,
    optionally minus a quadratic penalty on negative terminal wealth
    (a diagnostic knob, off by default: the solver's policy needs no
    penalty).
    """
    grid = ensemble.grid
    age = grid.nodes - grid.t0
    dt = grid.dt
    flow = np.exp(-disc.delta * age[:-1])[None, :] * u1(ensemble.consumption[:, :-1])
    per_path = flow.sum(axis=1) * dt
    w_L = ensemble.terminal_wealth
    per_path = per_path + disc.lam * np.exp(-disc.delta * grid.L) * u2(w_L)
    if penalty_coeff:
        per_path = per_path - penalty_coeff * np.maximum(-w_L, 0.0) ** 2
    return float(per_path.mean())


@dataclass(frozen=True)
class SweepRow:
    r: float
    mean_wealth: float
    stderr: float
    converged: bool


def expected_wealth_sweep(
    r_values,
    t_probe: float,
    u1: UtilitySpec,
    u2: UtilitySpec,
    disc: DiscountSpec,
    model: IncomeModel,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    initial_wealth_law=None,
    **solver_kwargs,
) -> list[SweepRow]:
    """Mean wealth at ``t_probe`` for each constant rate in ``r_values``."""
    j = int(round((t_probe - grid.t0) / grid.dt))
    j = min(max(j, 0), grid.M)
    rows = []
    for rv in r_values:
        sol = picard_solve(
            u1,
            u2,
            disc,
            RatePath.constant(rv, grid),
            model,
            grid,
            n_paths,
            seed,
            initial_wealth_law=initial_wealth_law,
            **solver_kwargs,
        )
        w = sol.ensemble.wealth[:, j]
        rows.append(
            SweepRow(
                r=float(rv),
                mean_wealth=float(w.mean()),
                stderr=float(w.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0,
                converged=sol.converged,
            )
        )
    return rows


def linear_bsde_value(
    r: RatePath,
    g: np.ndarray,
    ensemble: PathEnsemble,
    j: int,
    estimator=None,
) -> np.ndarray:
    """``y_{t_j} = exp(int_{t_j}^{L} r) * E[g | F_{t_j}]`` per path.

    With a deterministic rate the discount factor pulls out of the
    conditional expectation, which is the closed-form solution of the
    associated linear backward equation.
    """
    if estimator is None:
        estimator = RegressionEstimator()
    grid = ensemble.grid
    factor = discount_factor(r, 0.0, grid.nodes[j], grid.t_end)
    if j >= grid.M:
        cond = np.asarray(g, dtype=float)
    else:
        w, eta = ensemble.state(j)
        cond = _estimate_clipped(estimator, w, eta, np.asarray(g, dtype=float))
    return factor * cond
