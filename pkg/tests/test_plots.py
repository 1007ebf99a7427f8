import json
import os

import pytest
from click.testing import CliRunner

from olgsim.cli import main as cli_main
from olgsim.plots import PlotDataError, main as plot_main, read_table

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

DESK = {
    "grid": {"L": 5.0, "M": 20},
    "population": {"n_paths": 150, "seed": 7},
    "output": {
        "sample_paths": 3,
        "snapshot_ages": [0.0, 2.5, 5.0],
        "nbl_static_times": [1.0, 3.0],
        "nbl_eta_points": 9,
    },
    "sweep": {"rates": [0.1, 0.3, 0.5]},
}

HEAVY_TAILED = {
    **DESK,
    "income": {"initial": {"kind": "lognormal", "m": 0.0, "s": 0.3}},
    "population": {
        "n_paths": 150,
        "seed": 7,
        "initial_wealth": {"kind": "pareto", "scale": 10.0, "shape": 3.0},
    },
}


def _cli(args):
    result = CliRunner().invoke(cli_main, args)
    assert result.exit_code == 0, result.output
    return result.output.strip().splitlines()[-1]


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """Desk-scale CLI runs providing one CSV of every plotted schema."""
    tmp = tmp_path_factory.mktemp("artifacts")
    cfg = tmp / "cfg.json"
    cfg.write_text(json.dumps(DESK))
    heavy_cfg = tmp / "heavy.json"
    heavy_cfg.write_text(json.dumps(HEAVY_TAILED))

    sto = _cli(["sto-lifecycle", "--config", str(cfg), "--out", str(tmp / "sto")])
    det = _cli(["det-lifecycle", "--config", str(cfg), "--out", str(tmp / "det")])
    nbl = _cli(["nbl", "--config", str(cfg), "--out", str(tmp / "nbl")])
    swp = _cli(["sweep", "--config", str(cfg), "--out", str(tmp / "swp")])
    eq = _cli(["equilibrium", "lifecycle", "--config", str(cfg), "--out", str(tmp / "eq")])
    heavy = _cli(["sto-lifecycle", "--config", str(heavy_cfg), "--out", str(tmp / "heavy")])
    return {
        "ensemble_stats": os.path.join(sto, "ensemble_stats.csv"),
        "det_trajectories": os.path.join(det, "det_trajectories.csv"),
        "nbl_dynamic": os.path.join(nbl, "nbl_dynamic.csv"),
        "nbl_static": os.path.join(nbl, "nbl_static.csv"),
        "sweep": os.path.join(swp, "sweep.csv"),
        "rate_path": os.path.join(eq, "rate_path.csv"),
        "wealth_snapshots": os.path.join(heavy, "wealth_snapshots.csv"),
        "dir": str(tmp),
    }


def render(kind, inputs, out):
    return CliRunner().invoke(
        plot_main, [kind] + [x for p in inputs for x in ("--in", p)] + ["--out", out]
    )


CASES = [
    ("trajectories", "ensemble_stats"),
    ("trajectories", "det_trajectories"),
    ("nbl_dynamic", "nbl_dynamic"),
    ("nbl_static", "nbl_static"),
    ("wealth_hist", "wealth_snapshots"),
    ("sweep", "sweep"),
    ("rate_path", "rate_path"),
]


class TestRenderAllKinds:
    @pytest.mark.parametrize("kind,source", CASES)
    def test_produces_png(self, artifacts, tmp_path, kind, source):
        out = str(tmp_path / f"{kind}_{source}.png")
        result = render(kind, [artifacts[source]], out)
        assert result.exit_code == 0, result.output
        raw = open(out, "rb").read()
        assert raw.startswith(PNG_SIGNATURE)
        assert len(raw) > 1000

    def test_multiple_inputs_overlay(self, artifacts, tmp_path):
        out = str(tmp_path / "overlay.png")
        result = render(
            "trajectories",
            [artifacts["ensemble_stats"], artifacts["det_trajectories"]],
            out,
        )
        assert result.exit_code == 0, result.output
        assert os.path.getsize(out) > 1000


class TestDeterminism:
    def test_repeat_render_byte_identical(self, artifacts, tmp_path):
        blobs = []
        for name in ("a.png", "b.png"):
            out = str(tmp_path / name)
            result = render("sweep", [artifacts["sweep"]], out)
            assert result.exit_code == 0, result.output
            blobs.append(open(out, "rb").read())
        assert blobs[0] == blobs[1]


class TestFailFast:
    def test_missing_file(self, tmp_path):
        result = render("rate_path", [str(tmp_path / "absent.csv")], str(tmp_path / "o.png"))
        assert result.exit_code == 1
        assert "cannot read" in result.output

    def test_missing_column(self, artifacts, tmp_path):
        # sweep schema lacks the rate-path columns
        result = render("rate_path", [artifacts["sweep"]], str(tmp_path / "o.png"))
        assert result.exit_code == 1
        assert "missing columns" in result.output

    def test_header_only_csv(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("t,r\n")
        result = render("rate_path", [str(path)], str(tmp_path / "o.png"))
        assert result.exit_code == 1
        assert "no data rows" in result.output

    def test_empty_file(self, tmp_path):
        path = tmp_path / "zero.csv"
        path.write_text("")
        result = render("rate_path", [str(path)], str(tmp_path / "o.png"))
        assert result.exit_code == 1

    def test_read_table_reports_found_header(self, tmp_path):
        path = tmp_path / "odd.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(PlotDataError, match="missing columns"):
            read_table(str(path), required=("t",))
