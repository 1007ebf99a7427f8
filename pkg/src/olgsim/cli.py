"""Command-line entry point.

Subcommands ingest a JSON run configuration, orchestrate the solvers,
and persist deterministic artifacts: CSV tables (17 significant
digits, LF line endings) plus a JSON manifest carrying the config
hash, convergence summary and invariant flags.  Each run writes into
a directory named by the config hash prefix so identical configs map
to identical artifacts.

Exit codes: 0 success, 1 validation failure, 2 solver non-convergence,
64 configuration error.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import shutil
import sys
import tempfile
import time

import click
import numpy as np

from . import __version__
from .core import ConfigurationError, DiscountSpec, RatePath, TimeGrid
from .demography import (
    DemographicFlow,
    StationaryExponential,
    StationaryUniform,
    leibniz_derivative_check,
)
from .deterministic import solve_deterministic_crra
from .ensemble import PathEnsemble
from .equilibrium import (
    lifecycle_equilibrium_solve,
    olg_equilibrium_solve,
    stationary_rate_bisect,
)
from .income import (
    GBM,
    IncomeModel,
    LogNormalLaw,
    ParetoLaw,
    PointLaw,
    UniformLaw,
    simulate_income,
)
from .lifecycle import (
    expected_wealth_sweep,
    linear_bsde_value,
    nbl_surface,
    picard_solve,
)
from .regression import NestedMCEstimator, RegressionEstimator
from .utility import UtilitySpec

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CONFIG = 64


# -- configuration ----------------------------------------------------

DEFAULT_CONFIG = {
    "model": {
        "gamma1": 2.0,
        "gamma2": 2.0,
        "eps": 1e-3,
        "p": 2.0,
        "delta": 0.02,
        "lam": 100.0,
    },
    "income": {
        "kind": "gbm",
        "mu": 0.01,
        "sigma": 0.1,
        "initial": {"kind": "point", "value": 1.0},
    },
    "population": {
        "initial_wealth": {"kind": "point", "value": 10.0},
        "n_paths": 1000,
        "seed": 42,
    },
    "grid": {"t0": 0.0, "L": 60.0, "M": 600},
    "solver": {
        "rate": 0.03,
        "tol_scale": 1e-6,
        "damping": None,
        "k_max": 200,
        "degree": 3,
        "estimator": "regression",
        "scheme": "recursive",
        "quad_points": 5,
        "inner_iters": 3,
    },
    "equilibrium": {
        "K": 10.0,
        "window": [0.0, 5.0],
        "n_cohorts": 21,
        "calendar_steps": 20,
        "flow": {"kind": "uniform"},
        "bracket": [-0.8, 0.5],
        "theta_r": 0.5,
        "tol_eq": None,
        "r_init": 0.03,
        "k_max": 60,
    },
    "output": {
        "directory": "runs",
        "emit_paths": True,
        "sample_paths": 10,
        "snapshot_ages": [0.0, 30.0, 60.0],
        "nbl_static_times": [10.0, 30.0, 50.0],
        "nbl_eta_max": 4.0,
        "nbl_eta_points": 41,
    },
    "sweep": {"rates": [0.1, 0.2, 0.3, 0.4, 0.5], "t_probe": None},
}

_LAW_KEYS = {
    "point": {"value"},
    "uniform": {"lo", "hi"},
    "lognormal": {"m", "s"},
    "pareto": {"scale", "shape"},
}
_FLOW_KEYS = {"uniform": set(), "exponential": {"g"}}


def _check_kind_block(block: dict, schemas: dict, path: str) -> None:
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigurationError(f"{path} must be an object with a 'kind' key")
    kind = block["kind"]
    if kind not in schemas:
        raise ConfigurationError(
            f"{path}.kind must be one of {sorted(schemas)}, got {kind!r}"
        )
    unknown = set(block) - schemas[kind] - {"kind"}
    if unknown:
        raise ConfigurationError(f"unknown keys in {path}: {sorted(unknown)}")


# Blocks whose shape depends on their "kind" value; they replace
# wholesale on override instead of merging key by key.
_KIND_SWITCHED_PATHS = {"income.initial", "population.initial_wealth", "equilibrium.flow"}


def _merge_config(user: dict, default: dict, path: str = "") -> dict:
    """Overlay ``user`` on ``default``, rejecting unknown keys."""
    merged = copy.deepcopy(default)
    for key, value in user.items():
        where = f"{path}.{key}" if path else key
        if key not in default:
            raise ConfigurationError(f"unknown config key: {where}")
        if where in _KIND_SWITCHED_PATHS:
            merged[key] = copy.deepcopy(value)
        elif isinstance(default[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"{where} must be an object")
            merged[key] = _merge_config(value, default[key], where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(config_path: str | None, seed_override: int | None = None) -> dict:
    """Read, validate and resolve a run configuration."""
    user = {}
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                user = json.load(f)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigurationError("config root must be a JSON object")
    cfg = _merge_config(user, DEFAULT_CONFIG)
    if seed_override is not None:
        cfg["population"]["seed"] = int(seed_override)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: dict) -> None:
    _check_kind_block(cfg["income"]["initial"], _LAW_KEYS, "income.initial")
    _check_kind_block(
        cfg["population"]["initial_wealth"], _LAW_KEYS, "population.initial_wealth"
    )
    _check_kind_block(cfg["equilibrium"]["flow"], _FLOW_KEYS, "equilibrium.flow")
    if cfg["income"]["kind"] != "gbm":
        raise ConfigurationError("income.kind must be 'gbm'")
    g = cfg["grid"]
    if not g["L"] > 0:
        raise ConfigurationError(f"grid.L must be positive, got {g['L']}")
    if int(g["M"]) < 10:
        raise ConfigurationError(f"grid.M must be >= 10, got {g['M']}")
    if int(cfg["population"]["n_paths"]) < 1:
        raise ConfigurationError("population.n_paths must be >= 1")
    if cfg["income"]["sigma"] < 0:
        raise ConfigurationError("income.sigma must be >= 0")
    rates = [cfg["solver"]["rate"], cfg["equilibrium"]["r_init"], *cfg["equilibrium"]["bracket"], *cfg["sweep"]["rates"]]
    if not all(math.isfinite(float(x)) for x in rates):
        raise ConfigurationError("all configured rates must be finite")
    win = cfg["equilibrium"]["window"]
    if len(win) != 2 or win[1] < win[0]:
        raise ConfigurationError(f"equilibrium.window out of order: {win}")
    if cfg["solver"]["scheme"] not in ("recursive", "terminal"):
        raise ConfigurationError("solver.scheme must be 'recursive' or 'terminal'")
    if cfg["solver"]["estimator"] not in ("regression", "nested_mc"):
        raise ConfigurationError("solver.estimator must be 'regression' or 'nested_mc'")


def config_hash(command: str, cfg: dict) -> str:
    payload = json.dumps(
        {"command": command, "config": cfg}, sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# -- model construction ----------------------------------------------


def _build_law(block: dict):
    kind = block["kind"]
    if kind == "point":
        return PointLaw(float(block["value"]))
    if kind == "uniform":
        return UniformLaw(float(block["lo"]), float(block["hi"]))
    if kind == "lognormal":
        return LogNormalLaw(float(block["m"]), float(block["s"]))
    return ParetoLaw(float(block["scale"]), float(block["shape"]))


def _build_model(cfg: dict):
    m = cfg["model"]
    u1 = UtilitySpec(gamma=float(m["gamma1"]), eps=float(m["eps"]), p=float(m["p"]))
    u2 = UtilitySpec(gamma=float(m["gamma2"]), eps=float(m["eps"]), p=float(m["p"]))
    disc = DiscountSpec(delta=float(m["delta"]), lam=float(m["lam"]))
    inc = cfg["income"]
    model = IncomeModel(
        GBM(float(inc["mu"]), float(inc["sigma"])), _build_law(inc["initial"])
    )
    return u1, u2, disc, model


def _build_grid(cfg: dict) -> TimeGrid:
    g = cfg["grid"]
    return TimeGrid(float(g["t0"]), float(g["L"]), int(g["M"]))


def _build_flow(cfg: dict) -> DemographicFlow:
    eq = cfg["equilibrium"]
    block = eq["flow"]
    if block["kind"] == "uniform":
        kind = StationaryUniform()
    else:
        kind = StationaryExponential(float(block.get("g", 0.02)))
    return DemographicFlow(kind, float(cfg["grid"]["L"]), tuple(float(x) for x in eq["window"]))


def _solver_kwargs(cfg: dict, include_k_max: bool = True) -> dict:
    s = cfg["solver"]
    kw = {
        "tol_scale": float(s["tol_scale"]),
        "scheme": s["scheme"],
        "quad_points": int(s["quad_points"]),
        "inner_iters": int(s["inner_iters"]),
    }
    if s["damping"] is not None:
        kw["damping"] = float(s["damping"])
    if include_k_max:
        kw["k_max"] = int(s["k_max"])
    if s["estimator"] == "nested_mc":
        kw["estimator"] = NestedMCEstimator()
    else:
        kw["estimator"] = RegressionEstimator(degree=int(s["degree"]))
    return kw


# -- artifact helpers -------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(run_dir: str, manifest: dict) -> None:
    """Atomically persist the run manifest as JSON."""
    fd, tmp = tempfile.mkstemp(dir=run_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, os.path.join(run_dir, "manifest.json"))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _prepare_run_dir(out_dir: str, digest: str, force: bool) -> str:
    run_dir = os.path.join(out_dir, digest[:12])
    if os.path.exists(run_dir):
        if not force:
            raise ConfigurationError(
                f"run directory {run_dir} already exists; pass --force to overwrite"
            )
        shutil.rmtree(run_dir)
    os.makedirs(run_dir)
    return run_dir


def _base_manifest(command: str, cfg: dict, digest: str, started: float) -> dict:
    return {
        "config_hash": digest,
        "command": command,
        "seed": int(cfg["population"]["seed"]),
        "tool_version": __version__,
        "wall_clock_seconds": time.time() - started,
        "config": cfg,
    }


# -- command bodies ---------------------------------------------------


def _run_det_lifecycle(cfg: dict, run_dir: str) -> tuple[int, dict]:
    u1, _, disc, model = _build_model(cfg)
    grid = _build_grid(cfg)
    r = RatePath.constant(float(cfg["solver"]["rate"]), grid)
    w0 = _build_law(cfg["population"]["initial_wealth"]).mean
    eta0 = model.initial_law.mean
    mu = model.kind.mu
    det = solve_deterministic_crra(w0, eta0, mu, r, disc, float(cfg["model"]["gamma1"]), grid)
    ts = grid.nodes
    income = eta0 * np.exp(mu * (ts - grid.t0))
    write_csv(
        os.path.join(run_dir, "det_trajectories.csv"),
        ["t", "income", "consumption", "wealth"],
        zip(ts, income, det.consumption, det.wealth),
    )
    summary = {
        "converged": True,
        "terminal_wealth": det.terminal_wealth,
        "Theta_L": det.Theta_L,
    }
    return EXIT_OK, summary


def _ensemble_stats_rows(grid: TimeGrid, ens: PathEnsemble):
    qs = [0.05, 0.25, 0.5, 0.75, 0.95]
    cols = {"wealth": ens.wealth, "consumption": ens.consumption, "income": ens.income}
    header = ["t"]
    for name in cols:
        header += [f"{name}_mean", f"{name}_std"] + [f"{name}_q{int(q * 100):02d}" for q in qs]
    rows = []
    for j, t in enumerate(grid.nodes):
        row = [t]
        for arr in cols.values():
            v = arr[:, j]
            row += [v.mean(), v.std()] + list(np.quantile(v, qs))
        rows.append(row)
    return header, rows


def _run_sto_lifecycle(cfg: dict, run_dir: str) -> tuple[int, dict]:
    u1, u2, disc, model = _build_model(cfg)
    grid = _build_grid(cfg)
    r = RatePath.constant(float(cfg["solver"]["rate"]), grid)
    pop = cfg["population"]
    law = _build_law(pop["initial_wealth"])
    sol = picard_solve(
        u1, u2, disc, r, model, grid, int(pop["n_paths"]), int(pop["seed"]),
        initial_wealth_law=law, **_solver_kwargs(cfg),
    )
    ens = sol.ensemble
    header, rows = _ensemble_stats_rows(grid, ens)
    write_csv(os.path.join(run_dir, "ensemble_stats.csv"), header, rows)

    out = cfg["output"]
    k = min(int(out["sample_paths"]), ens.n_paths)
    if out["emit_paths"]:
        rows = []
        for p in range(k):
            for j, t in enumerate(grid.nodes):
                rows.append([p, t, ens.income[p, j], ens.consumption[p, j], ens.wealth[p, j]])
        write_csv(
            os.path.join(run_dir, "sample_paths.csv"),
            ["path", "t", "income", "consumption", "wealth"],
            rows,
        )

    limits = nbl_surface(r, model, ens.income, grid)
    write_csv(
        os.path.join(run_dir, "nbl.csv"),
        ["t", "nbl_mean"] + [f"nbl_path{p}" for p in range(k)],
        ([t, limits[:, j].mean()] + list(limits[:k, j]) for j, t in enumerate(grid.nodes)),
    )

    ages = sorted({min(max(float(a), 0.0), grid.L) for a in out["snapshot_ages"]})
    rows = []
    for age in ages:
        j = int(round(age / grid.dt))
        for p in range(ens.n_paths):
            rows.append([age, p, ens.wealth[p, j]])
    write_csv(os.path.join(run_dir, "wealth_snapshots.csv"), ["age", "path", "wealth"], rows)

    tol = float(cfg["solver"]["tol_scale"]) * (1.0 + abs(law.mean))
    summary = {
        "converged": bool(sol.converged),
        "iterations": int(sol.iterations),
        "final_contraction_ratio": float(sol.contraction_ratios[-1]) if len(sol.contraction_ratios) else None,
        "invariants": {
            "consumption_in_bounds": bool(
                np.all(ens.consumption >= 0.0) and np.all(ens.consumption <= sol.kappa_used)
            ),
            "terminal_wealth_min": float(ens.wealth[:, -1].min()),
            "nbl_violation_fraction": float(np.mean(ens.wealth < limits - tol)),
        },
    }
    if not sol.converged:
        write_csv(
            os.path.join(run_dir, "iterations.csv"),
            ["iteration", "contraction_ratio"],
            enumerate(sol.contraction_ratios),
        )
        return EXIT_NO_CONVERGENCE, summary
    return EXIT_OK, summary


def _run_nbl(cfg: dict, run_dir: str) -> tuple[int, dict]:
    _, _, _, model = _build_model(cfg)
    grid = _build_grid(cfg)
    r = RatePath.constant(float(cfg["solver"]["rate"]), grid)
    pop = cfg["population"]
    out = cfg["output"]
    income = simulate_income(model, grid, int(pop["n_paths"]), int(pop["seed"]))
    limits = nbl_surface(r, model, income, grid)
    k = min(int(out["sample_paths"]), income.shape[0])
    write_csv(
        os.path.join(run_dir, "nbl_dynamic.csv"),
        ["t", "nbl_mean"] + [f"nbl_path{p}" for p in range(k)],
        ([t, limits[:, j].mean()] + list(limits[:k, j]) for j, t in enumerate(grid.nodes)),
    )

    # Static panel: the limit is linear in current income, so evaluate
    # the per-time kernel on a unit-income row and scale by eta.
    times = [float(t) for t in out["nbl_static_times"]]
    cols = []
    for t in times:
        j = int(round((t - grid.t0) / grid.dt))
        j = min(max(j, 0), grid.M)
        unit = nbl_surface(r, model, np.ones((1, grid.M + 1)), grid)[0, j]
        cols.append(unit)
    etas = np.linspace(0.0, float(out["nbl_eta_max"]), int(out["nbl_eta_points"]))
    write_csv(
        os.path.join(run_dir, "nbl_static.csv"),
        ["eta"] + [f"nbl_t{t:g}" for t in times],
        ([eta] + [eta * c for c in cols] for eta in etas),
    )
    return EXIT_OK, {"converged": True}


def _run_equilibrium(cfg: dict, run_dir: str, mode: str) -> tuple[int, dict]:
    u1, u2, disc, model = _build_model(cfg)
    eq = cfg["equilibrium"]
    pop = cfg["population"]
    law = _build_law(pop["initial_wealth"])
    n_paths, seed = int(pop["n_paths"]), int(pop["seed"])
    K = float(eq["K"])
    solver_kw = _solver_kwargs(cfg, include_k_max=False)
    tol_eq = None if eq["tol_eq"] is None else float(eq["tol_eq"])

    if mode == "lifecycle":
        grid = _build_grid(cfg)
        result = lifecycle_equilibrium_solve(
            u1, u2, disc, model, grid, n_paths, seed, K, law,
            theta_r=float(eq["theta_r"]), tol_eq=tol_eq, k_max=int(eq["k_max"]),
            r_init=float(eq["r_init"]), **solver_kw,
        )
    else:
        flow = _build_flow(cfg)
        if mode == "olg":
            result = olg_equilibrium_solve(
                u1, u2, disc, model, flow, K, int(cfg["grid"]["M"]), n_paths, seed, law,
                n_cohorts=int(eq["n_cohorts"]), calendar_steps=int(eq["calendar_steps"]),
                theta_r=float(eq["theta_r"]), tol_eq=tol_eq, k_max=int(eq["k_max"]),
                r_init=float(eq["r_init"]), **solver_kw,
            )
        else:
            result = stationary_rate_bisect(
                u1, u2, disc, model, flow, K,
                tuple(float(x) for x in eq["bracket"]),
                int(cfg["grid"]["M"]), n_paths, seed, law,
                n_cohorts=int(eq["n_cohorts"]), **solver_kw,
            )

    write_csv(
        os.path.join(run_dir, "rate_path.csv"),
        ["t", "r"],
        zip(result.rate.grid.nodes, result.rate.values),
    )
    write_csv(
        os.path.join(run_dir, "clearing_residual.csv"),
        ["sup_residual", "K", "converged"],
        [[result.clearing_residual, result.K, result.converged]],
    )
    write_csv(
        os.path.join(run_dir, "iterations.csv"),
        ["iteration", "residual"],
        enumerate(np.asarray(result.residual_history, dtype=float)),
    )
    summary = {
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "clearing_residual": float(result.clearing_residual),
        "rate_mean": float(result.rate.values.mean()),
    }
    if "phi_residual" in result.diagnostics:
        summary["phi_residual"] = float(result.diagnostics["phi_residual"])
    return (EXIT_OK if result.converged else EXIT_NO_CONVERGENCE), summary


def _run_sweep(cfg: dict, run_dir: str) -> tuple[int, dict]:
    u1, u2, disc, model = _build_model(cfg)
    grid = _build_grid(cfg)
    pop = cfg["population"]
    law = _build_law(pop["initial_wealth"])
    rates = [float(x) for x in cfg["sweep"]["rates"]]
    t_probe = cfg["sweep"]["t_probe"]
    t_probe = grid.t0 + 0.5 * grid.L if t_probe is None else float(t_probe)
    rows = expected_wealth_sweep(
        rates, t_probe, u1, u2, disc, model, grid,
        int(pop["n_paths"]), int(pop["seed"]), initial_wealth_law=law,
        **_solver_kwargs(cfg),
    )
    write_csv(
        os.path.join(run_dir, "sweep.csv"),
        ["r", "mean_wealth", "stderr", "converged"],
        ([row.r, row.mean_wealth, row.stderr, row.converged] for row in rows),
    )
    return EXIT_OK, {"converged": all(row.converged for row in rows), "rows": len(rows)}


# -- validation suite -------------------------------------------------


def _validate_checks(cfg: dict):
    """Yield (name, passed, detail) tuples for the invariant suite."""
    u1, u2, disc, model = _build_model(cfg)
    grid = _build_grid(cfg)
    rate = float(cfg["solver"]["rate"])
    pop = cfg["population"]
    law = _build_law(pop["initial_wealth"])
    n_paths = min(int(pop["n_paths"]), 1000)
    seed = int(pop["seed"])

    # Utility: inverse marginal stays within [0, kappa] and inverts.
    ys = np.geomspace(1e-6, 1e6, 41)
    xs = u1.inverse_marginal(ys)
    ok = bool(np.all(xs >= 0) and np.all(xs <= u1.kappa))
    back = u1.marginal(np.clip(xs, 1e-12, None))
    interior = (xs > 1e-9) & (xs < 0.99 * u1.kappa)
    rel = np.max(np.abs(back[interior] - ys[interior]) / ys[interior]) if interior.any() else 0.0
    yield "utility_inverse_marginal", ok and rel < 1e-6, f"max rel roundtrip {rel:.2e}"

    # Deterministic solver: grid refinement changes values by O(dt).
    g1 = TimeGrid(0.0, 5.0, 50)
    g2 = TimeGrid(0.0, 5.0, 100)
    d1 = solve_deterministic_crra(10.0, 1.0, model.kind.mu, RatePath.constant(rate, g1), disc, 2.0, g1)
    d2 = solve_deterministic_crra(10.0, 1.0, model.kind.mu, RatePath.constant(rate, g2), disc, 2.0, g2)
    diff = abs(d1.terminal_wealth - d2.terminal_wealth)
    yield "deterministic_refinement", diff < 10.0 * g1.dt, f"|w_L(M) - w_L(2M)| = {diff:.2e}"

    # Borrowing limit: closed-form GBM value at t=0 and zero at L.
    g60 = TimeGrid(0.0, 60.0, 600)
    ones = np.ones((1, 601))
    m_ref = IncomeModel(GBM(0.01, model.kind.sigma), PointLaw(1.0))
    surf = nbl_surface(RatePath.constant(0.03, g60), m_ref, ones, g60)
    v0, vL = surf[0, 0], surf[0, -1]
    ok = abs(v0 - (-34.9403)) / 34.9403 < 1e-3 and vL == 0.0
    yield "nbl_closed_form", ok, f"t=0 value {v0:.4f}, terminal {vL}"

    # Linear backward equation with deterministic terminal data.
    ens_grid = TimeGrid(0.0, 60.0, 60)
    inc = simulate_income(m_ref, ens_grid, 200, seed)
    ens = PathEnsemble(ens_grid, 200, seed, inc)
    ens.wealth = np.zeros_like(inc)
    y0 = linear_bsde_value(RatePath.constant(0.03, ens_grid), np.ones(200), ens, 0)
    err = np.max(np.abs(y0 - np.exp(1.8)))
    yield "linear_bsde_oracle", err < 1e-12, f"max |y0 - e^1.8| = {err:.2e}"

    # Demographic flows: densities normalize and the moving-window
    # derivative identity holds.
    win = tuple(float(x) for x in cfg["equilibrium"]["window"])
    ok_norm = True
    worst = 0.0
    for kind in (StationaryUniform(), StationaryExponential(0.02)):
        flow = DemographicFlow(kind, 5.0, win)
        for t in np.linspace(win[0], win[1], 20):
            err = abs(flow.normalization(float(t)) - 1.0)
            worst = max(worst, err)
            ok_norm = ok_norm and err <= 1e-8
    yield "demography_normalization", ok_norm, f"max |int n - 1| = {worst:.2e}"

    flow = DemographicFlow(StationaryExponential(0.02), 5.0, win)
    analytic, fd = leibniz_derivative_check(lambda t, b: (t - b) ** 2 + 0.5 * np.asarray(b), flow, 0.5 * (win[0] + win[1]))
    err = abs(analytic - fd)
    yield "leibniz_identity", err <= 1e-6, f"|analytic - fd| = {err:.2e}"

    # Picard contraction on the configured grid: must converge with
    # ratios below one past the warm-up iterations.
    sol = picard_solve(
        u1, u2, disc, RatePath.constant(rate, grid), model, grid, n_paths, seed,
        initial_wealth_law=law, **_solver_kwargs(cfg),
    )
    ratios = np.asarray(sol.contraction_ratios)
    tail_ok = bool(len(ratios) > 2 and np.all(ratios[2:] < 1.0))
    yield (
        "picard_contraction",
        bool(sol.converged) and tail_ok,
        f"converged={sol.converged} iters={sol.iterations} max tail ratio "
        f"{ratios[2:].max() if len(ratios) > 2 else float('nan'):.3f}",
    )

    ens = sol.ensemble
    ok = bool(np.all(ens.consumption >= 0.0) and np.all(ens.consumption <= sol.kappa_used))
    yield "consumption_bounds", ok, f"c range [{ens.consumption.min():.3g}, {ens.consumption.max():.3g}]"

    if model.kind.sigma == 0.0:
        det = solve_deterministic_crra(
            law.mean, model.initial_law.mean, model.kind.mu,
            RatePath.constant(rate, grid), disc, float(cfg["model"]["gamma1"]), grid,
        )
        c = ens.consumption.mean(axis=0)
        rel = np.max(np.abs(c - det.consumption) / np.maximum(np.abs(det.consumption), 1e-12))
        tol = 1e-2 + grid.dt
        yield "sigma_zero_limit", rel <= tol, f"max rel consumption error {rel:.2e} (tol {tol:.2g})"


def _run_validate(cfg: dict) -> int:
    failures = 0
    click.echo(f"{'check':30s} {'result':6s} detail")
    for name, passed, detail in _validate_checks(cfg):
        click.echo(f"{name:30s} {'pass' if passed else 'FAIL':6s} {detail}")
        if not passed:
            failures += 1
    click.echo(f"{failures} failure(s)" if failures else "all checks passed")
    return EXIT_VALIDATION if failures else EXIT_OK


# -- click wiring -----------------------------------------------------


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None, help="JSON run configuration.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None, help="Output root (overrides config).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Seed override.")(fn)
    fn = click.option("--force", is_flag=True, help="Overwrite an existing run directory.")(fn)
    return fn


def _execute(command: str, config_path, out_dir, seed, force, body) -> None:
    started = time.time()
    try:
        cfg = load_config(config_path, seed)
    except ConfigurationError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    digest = config_hash(command, cfg)
    root = out_dir if out_dir is not None else cfg["output"]["directory"]
    os.makedirs(root, exist_ok=True)
    try:
        run_dir = _prepare_run_dir(root, digest, force)
    except ConfigurationError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        code, summary = body(cfg, run_dir)
    except ConfigurationError as exc:
        shutil.rmtree(run_dir, ignore_errors=True)
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except Exception as exc:
        shutil.rmtree(run_dir, ignore_errors=True)
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    manifest = _base_manifest(command, cfg, digest, started)
    manifest["convergence"] = summary
    write_manifest(run_dir, manifest)
    click.echo(run_dir)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__)
def main():
    """Life-cycle and overlapping-generations solvers."""


@main.command("det-lifecycle")
@_common_options
def det_lifecycle(config_path, out_dir, seed, force):
    """Closed-form noiseless life-cycle trajectories."""
    _execute("det-lifecycle", config_path, out_dir, seed, force, _run_det_lifecycle)


@main.command("sto-lifecycle")
@_common_options
def sto_lifecycle(config_path, out_dir, seed, force):
    """Monte-Carlo life-cycle solve with ensemble statistics."""
    _execute("sto-lifecycle", config_path, out_dir, seed, force, _run_sto_lifecycle)


@main.command("nbl")
@_common_options
def nbl(config_path, out_dir, seed, force):
    """Natural borrowing limit panels (dynamic and static)."""
    _execute("nbl", config_path, out_dir, seed, force, _run_nbl)


@main.command("equilibrium")
@click.argument("mode", type=click.Choice(["lifecycle", "olg", "stationary"]))
@_common_options
def equilibrium(mode, config_path, out_dir, seed, force):
    """Market-clearing interest rate solvers."""
    _execute(
        f"equilibrium-{mode}", config_path, out_dir, seed, force,
        lambda cfg, run_dir: _run_equilibrium(cfg, run_dir, mode),
    )


@main.command("sweep")
@_common_options
def sweep(config_path, out_dir, seed, force):
    """Expected terminal-ish wealth across interest rates."""
    _execute("sweep", config_path, out_dir, seed, force, _run_sweep)


@main.command("validate")
@_common_options
def validate(config_path, out_dir, seed, force):
    """Run the cross-module invariant suite."""
    try:
        cfg = load_config(config_path, seed)
    except ConfigurationError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(_run_validate(cfg))


if __name__ == "__main__":
    main()
