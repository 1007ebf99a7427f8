import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from olgsim.cli import config_hash, load_config, main

DESK = {
    "grid": {"L": 5.0, "M": 20},
    "population": {"n_paths": 120, "seed": 7},
    "output": {
        "sample_paths": 3,
        "snapshot_ages": [0.0, 2.5, 5.0],
        "nbl_static_times": [1.0, 3.0],
        "nbl_eta_points": 5,
    },
    "sweep": {"rates": [0.1, 0.3]},
}


@pytest.fixture()
def runner():
    return CliRunner()


def write_cfg(tmp_path, overrides=None, name="cfg.json"):
    cfg = json.loads(json.dumps(DESK))
    for key, block in (overrides or {}).items():
        if isinstance(block, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(block)
        else:
            cfg[key] = block
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run_ok(runner, args):
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


class TestConfigHandling:
    def test_unknown_top_level_key_rejected(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"surprise": {"x": 1}})
        result = runner.invoke(main, ["det-lifecycle", "--config", cfg, "--out", str(tmp_path / "o")])
        assert result.exit_code == 64

    def test_unknown_nested_key_rejected(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"solver": {"warp": 9}})
        result = runner.invoke(main, ["det-lifecycle", "--config", cfg, "--out", str(tmp_path / "o")])
        assert result.exit_code == 64

    def test_unknown_law_key_rejected(self, runner, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {"population": {"initial_wealth": {"kind": "point", "value": 1.0, "mode": 3}}},
        )
        result = runner.invoke(main, ["det-lifecycle", "--config", cfg, "--out", str(tmp_path / "o")])
        assert result.exit_code == 64

    def test_malformed_json_rejected(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        result = runner.invoke(main, ["det-lifecycle", "--config", str(path)])
        assert result.exit_code == 64

    def test_window_order_enforced(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"equilibrium": {"window": [3.0, 1.0]}})
        result = runner.invoke(main, ["det-lifecycle", "--config", cfg])
        assert result.exit_code == 64

    def test_seed_override_lands_in_resolved_config(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        assert load_config(cfg_path)["population"]["seed"] == 7
        assert load_config(cfg_path, seed_override=99)["population"]["seed"] == 99

    def test_hash_depends_on_command_and_config(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        other = load_config(write_cfg(tmp_path, {"population": {"seed": 8}}, name="b.json"))
        assert config_hash("sweep", cfg) != config_hash("nbl", cfg)
        assert config_hash("sweep", cfg) != config_hash("sweep", other)


class TestManifest:
    def test_round_trip_and_directory_name(self, runner, tmp_path):
        cfg = write_cfg(tmp_path)
        out = str(tmp_path / "out")
        result = run_ok(runner, ["det-lifecycle", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        with open(os.path.join(run_dir, "manifest.json")) as f:
            manifest = json.load(f)
        digest = config_hash(manifest["command"], manifest["config"])
        assert manifest["config_hash"] == digest
        assert os.path.basename(run_dir) == digest[:12]
        assert manifest["seed"] == 7
        assert manifest["convergence"]["converged"] is True

    def test_existing_run_dir_requires_force(self, runner, tmp_path):
        cfg = write_cfg(tmp_path)
        out = str(tmp_path / "out")
        run_ok(runner, ["det-lifecycle", "--config", cfg, "--out", out])
        again = runner.invoke(main, ["det-lifecycle", "--config", cfg, "--out", out])
        assert again.exit_code == 64
        forced = runner.invoke(main, ["det-lifecycle", "--config", cfg, "--out", out, "--force"])
        assert forced.exit_code == 0


class TestDetLifecycle:
    def test_trajectories_written_and_terminal_wealth_positive(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"grid": {"L": 60.0, "M": 120}})
        out = str(tmp_path / "out")
        result = run_ok(runner, ["det-lifecycle", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        header, rows = read_csv(os.path.join(run_dir, "det_trajectories.csv"))
        assert header == ["t", "income", "consumption", "wealth"]
        assert len(rows) == 121
        assert float(rows[-1][3]) > 0.0

    def test_zero_endowment_yields_zero_trajectories(self, runner, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {
                "income": {"initial": {"kind": "point", "value": 0.0}},
                "population": {"initial_wealth": {"kind": "point", "value": 0.0}},
            },
        )
        out = str(tmp_path / "out")
        result = run_ok(runner, ["det-lifecycle", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        _, rows = read_csv(os.path.join(run_dir, "det_trajectories.csv"))
        data = np.array(rows, dtype=float)
        np.testing.assert_allclose(data[:, 1:], 0.0, atol=1e-12)


class TestStoLifecycle:
    def test_single_noiseless_path_equals_ensemble_mean(self, runner, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {"income": {"sigma": 0.0}, "population": {"n_paths": 1}},
        )
        out = str(tmp_path / "out")
        result = run_ok(runner, ["sto-lifecycle", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        sh, srows = read_csv(os.path.join(run_dir, "ensemble_stats.csv"))
        ph, prows = read_csv(os.path.join(run_dir, "sample_paths.csv"))
        w_mean = np.array([float(r[sh.index("wealth_mean")]) for r in srows])
        w_path = np.array([float(r[ph.index("wealth")]) for r in prows])
        np.testing.assert_array_equal(w_mean, w_path)

    def test_artifact_set_and_snapshot_count(self, runner, tmp_path):
        cfg = write_cfg(tmp_path)
        out = str(tmp_path / "out")
        result = run_ok(runner, ["sto-lifecycle", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        for name in ("ensemble_stats.csv", "sample_paths.csv", "nbl.csv", "wealth_snapshots.csv", "manifest.json"):
            assert os.path.exists(os.path.join(run_dir, name)), name
        _, rows = read_csv(os.path.join(run_dir, "wealth_snapshots.csv"))
        assert len(rows) == 3 * 120  # one row per snapshot age per path


class TestNbl:
    def test_static_panel_linear_in_eta(self, runner, tmp_path):
        cfg = write_cfg(tmp_path)
        out = str(tmp_path / "out")
        result = run_ok(runner, ["nbl", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        header, rows = read_csv(os.path.join(run_dir, "nbl_static.csv"))
        data = np.array(rows, dtype=float)
        eta = data[:, 0]
        for col in range(1, data.shape[1]):
            # values scale linearly with current income, zero at eta=0
            assert data[0, col] == 0.0
            np.testing.assert_allclose(data[1:, col], eta[1:] * data[-1, col] / eta[-1], rtol=1e-12)


class TestEquilibriumCommand:
    def test_lifecycle_mode_writes_rate_path(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"population": {"n_paths": 200}})
        out = str(tmp_path / "out")
        result = run_ok(runner, ["equilibrium", "lifecycle", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        header, rows = read_csv(os.path.join(run_dir, "rate_path.csv"))
        assert header == ["t", "r"]
        assert len(rows) == 21
        _, crows = read_csv(os.path.join(run_dir, "clearing_residual.csv"))
        assert crows[0][2] == "1"  # converged flag serialized as 1


class TestSweep:
    def test_empty_rate_list_writes_header_only(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"sweep": {"rates": []}})
        out = str(tmp_path / "out")
        result = run_ok(runner, ["sweep", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        header, rows = read_csv(os.path.join(run_dir, "sweep.csv"))
        assert header == ["r", "mean_wealth", "stderr", "converged"]
        assert rows == []

    def test_mean_wealth_increases_with_rate(self, runner, tmp_path):
        cfg = write_cfg(tmp_path, {"sweep": {"rates": [0.1, 0.4]}})
        out = str(tmp_path / "out")
        result = run_ok(runner, ["sweep", "--config", cfg, "--out", out])
        run_dir = result.output.strip().splitlines()[-1]
        _, rows = read_csv(os.path.join(run_dir, "sweep.csv"))
        assert float(rows[0][1]) < float(rows[1][1])


class TestValidateCommand:
    def test_passes_on_reference_configuration(self, runner, tmp_path):
        cfg = write_cfg(tmp_path)
        result = runner.invoke(main, ["validate", "--config", cfg])
        assert result.exit_code == 0, result.output
        assert "all checks passed" in result.output

    def test_fails_beyond_contraction_regime(self, runner, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {
                "grid": {"L": 500.0, "M": 150},
                "population": {"n_paths": 150},
                "solver": {"k_max": 30},
            },
        )
        result = runner.invoke(main, ["validate", "--config", cfg])
        assert result.exit_code == 1
        assert "picard_contraction" in result.output
        assert "FAIL" in result.output


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("fmt")
    cfg = write_cfg(tmp)
    result = CliRunner().invoke(
        main, ["sto-lifecycle", "--config", cfg, "--out", str(tmp / "out")]
    )
    assert result.exit_code == 0, result.output
    return result.output.strip().splitlines()[-1]


class TestArtifactFormat:
    def test_lf_line_endings(self, run_dir):
        raw = open(os.path.join(run_dir, "ensemble_stats.csv"), "rb").read()
        assert b"\r" not in raw

    def test_floats_round_trip_exactly(self, run_dir):
        header, rows = read_csv(os.path.join(run_dir, "ensemble_stats.csv"))
        for field in rows[len(rows) // 2]:
            assert format(float(field), ".17g") == field


class TestDeterminism:
    def test_repeat_runs_byte_identical(self, runner, tmp_path):
        cfg = write_cfg(tmp_path)
        dirs = []
        for sub in ("a", "b"):
            result = run_ok(runner, ["sto-lifecycle", "--config", cfg, "--out", str(tmp_path / sub)])
            dirs.append(result.output.strip().splitlines()[-1])
        for name in ("ensemble_stats.csv", "sample_paths.csv", "nbl.csv", "wealth_snapshots.csv"):
            a = open(os.path.join(dirs[0], name), "rb").read()
            b = open(os.path.join(dirs[1], name), "rb").read()
            assert a == b, name

    def test_independent_of_thread_count(self, tmp_path):
        cfg = write_cfg(tmp_path)
        outputs = []
        for threads, sub in (("1", "t1"), ("8", "t8")):
            env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads)
            out = str(tmp_path / sub)
            proc = subprocess.run(
                [sys.executable, "-m", "olgsim.cli", "sto-lifecycle", "--config", cfg, "--out", out],
                capture_output=True, text=True, env=env,
            )
            assert proc.returncode == 0, proc.stderr
            run_dir = proc.stdout.strip().splitlines()[-1]
            outputs.append(open(os.path.join(run_dir, "ensemble_stats.csv"), "rb").read())
        assert outputs[0] == outputs[1]
