"""Figure rendering from the CLI's CSV artifacts.

Read-only consumers of the CSV contract: each kind validates its input
schema, bins or overlays the columns, and writes a PNG.  No solver
logic lives here.  Rendering is deterministic for identical inputs —
fixed styling, fixed DPI, and no timestamp metadata in the image.

Invocation: ``plot <kind> --in <csv...> --out <png>``.
"""

from __future__ import annotations

import csv
import os
import sys

import click
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

EXIT_OK = 0
EXIT_DATA = 1

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}
# Strip the library version string so byte content never varies with
# the rendering environment's package versions.
_PNG_METADATA = {"Software": None}


class PlotDataError(Exception):
    """Raised for missing files, missing columns, or empty tables."""


def read_table(path: str, required: tuple[str, ...] = ()) -> dict[str, np.ndarray]:
    """Load a CSV into named float columns, failing fast on schema gaps."""
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise PlotDataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise PlotDataError(f"{path} has no header row")
    header, body = rows[0], rows[1:]
    missing = [c for c in required if c not in header]
    if missing:
        raise PlotDataError(f"{path} is missing columns {missing}; found {header}")
    if not body:
        raise PlotDataError(f"{path} has a header but no data rows")
    data = np.asarray(body, dtype=float)
    return {name: data[:, j] for j, name in enumerate(header)}


def _columns_like(table: dict[str, np.ndarray], prefix: str) -> list[str]:
    return [name for name in table if name.startswith(prefix)]


def _save(fig, out_path: str) -> None:
    fig.savefig(out_path, format="png", metadata=_PNG_METADATA)
    plt.close(fig)


# -- renderers --------------------------------------------------------


def render_trajectories(paths: list[str], out_path: str) -> None:
    """Income, consumption and wealth over the life cycle.

    Accepts either the ensemble statistics table (mean with 5%-95%
    quantile bands) or the noiseless trajectory table (plain lines);
    multiple inputs overlay.
    """
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2), constrained_layout=True)
    fields = ("income", "consumption", "wealth")
    for path in paths:
        table = read_table(path, required=("t",))
        label = os.path.splitext(os.path.basename(path))[0]
        for ax, field in zip(axes, fields):
            if field in table:
                ax.plot(table["t"], table[field], lw=1.2, label=label)
            elif f"{field}_mean" in table:
                ax.plot(table["t"], table[f"{field}_mean"], lw=1.2, label=f"{label} mean")
                lo, hi = f"{field}_q05", f"{field}_q95"
                if lo in table and hi in table:
                    ax.fill_between(table["t"], table[lo], table[hi], alpha=0.25)
            else:
                raise PlotDataError(
                    f"{path} has neither '{field}' nor '{field}_mean' columns"
                )
    for ax, field in zip(axes, fields):
        ax.set_xlabel("t")
        ax.set_title(field)
        ax.legend(fontsize=7)
    _save(fig, out_path)


def render_nbl_dynamic(paths: list[str], out_path: str) -> None:
    """Borrowing-limit trajectories along simulated income paths."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6), constrained_layout=True)
    for path in paths:
        table = read_table(path, required=("t", "nbl_mean"))
        for name in _columns_like(table, "nbl_path"):
            ax.plot(table["t"], table[name], lw=0.6, alpha=0.5, color="tab:gray")
        ax.plot(table["t"], table["nbl_mean"], lw=1.8, color="tab:blue", label="mean limit")
    ax.set_xlabel("t")
    ax.set_ylabel("borrowing limit")
    ax.legend(fontsize=7)
    _save(fig, out_path)


def render_nbl_static(paths: list[str], out_path: str) -> None:
    """Borrowing limit against current income at fixed times."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6), constrained_layout=True)
    for path in paths:
        table = read_table(path, required=("eta",))
        cols = _columns_like(table, "nbl_t")
        if not cols:
            raise PlotDataError(f"{path} has no 'nbl_t*' columns")
        for name in cols:
            ax.plot(table["eta"], table[name], lw=1.4, label=f"t={name[len('nbl_t'):]}")
    ax.set_xlabel("current income")
    ax.set_ylabel("borrowing limit")
    ax.legend(fontsize=7)
    _save(fig, out_path)


def render_wealth_hist(paths: list[str], out_path: str) -> None:
    """Wealth distributions at the snapshot ages, one panel per age."""
    tables = [read_table(path, required=("age", "path", "wealth")) for path in paths]
    ages = sorted({float(a) for table in tables for a in np.unique(table["age"])})
    fig, axes = plt.subplots(
        1, len(ages), figsize=(3.5 * len(ages), 3.2), constrained_layout=True,
        squeeze=False,
    )
    for ax, age in zip(axes[0], ages):
        for path, table in zip(paths, tables):
            w = table["wealth"][table["age"] == age]
            if len(w):
                ax.hist(w, bins=40, alpha=0.6, label=os.path.basename(path))
        ax.set_title(f"age {age:g}")
        ax.set_xlabel("wealth")
    axes[0][0].set_ylabel("count")
    _save(fig, out_path)


def render_sweep(paths: list[str], out_path: str) -> None:
    """Expected wealth against the interest rate with error bars."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6), constrained_layout=True)
    for path in paths:
        table = read_table(path, required=("r", "mean_wealth", "stderr"))
        ax.errorbar(
            table["r"], table["mean_wealth"], yerr=3.0 * table["stderr"],
            fmt="o-", lw=1.2, ms=3, capsize=2,
            label=os.path.splitext(os.path.basename(path))[0],
        )
    ax.set_xlabel("interest rate")
    ax.set_ylabel("expected wealth")
    ax.legend(fontsize=7)
    _save(fig, out_path)


def render_rate_path(paths: list[str], out_path: str) -> None:
    """Equilibrium interest-rate paths over calendar time."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6), constrained_layout=True)
    for path in paths:
        table = read_table(path, required=("t", "r"))
        ax.plot(
            table["t"], table["r"], lw=1.4,
            label=os.path.splitext(os.path.basename(path))[0],
        )
    ax.set_xlabel("t")
    ax.set_ylabel("r")
    ax.legend(fontsize=7)
    _save(fig, out_path)


RENDERERS = {
    "trajectories": render_trajectories,
    "nbl_dynamic": render_nbl_dynamic,
    "nbl_static": render_nbl_static,
    "wealth_hist": render_wealth_hist,
    "sweep": render_sweep,
    "rate_path": render_rate_path,
}


@click.command("plot")
@click.argument("kind", type=click.Choice(sorted(RENDERERS)))
@click.option("--in", "inputs", multiple=True, required=True,
              type=click.Path(), help="Input CSV (repeatable).")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output PNG path.")
def main(kind: str, inputs: tuple[str, ...], out_path: str) -> None:
    """Render a figure from solver CSV artifacts."""
    with plt.rc_context(_STYLE):
        try:
            RENDERERS[kind](list(inputs), out_path)
        except PlotDataError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
    click.echo(out_path)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
