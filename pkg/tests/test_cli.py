"""CLI behaviour: subcommands, flags, exit codes, deterministic outputs."""

import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "slra.cli"]

TINY_CONFIG = """
users = 2
spreading_gain = 4
antennas = 1
channel_taps = 5
ranks = 1, 2
rank = 2
branches = 2
iterations = 1
packet = 80
training = 30
runs = 2
algos = glrds, full_rls
"""


def _run(*args):
    return subprocess.run(CLI + list(args), capture_output=True, text=True)


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return path


class TestUsage:
    def test_no_subcommand_is_usage_error(self):
        proc = _run()
        assert proc.returncode != 0

    def test_unknown_subcommand(self):
        proc = _run("frobnicate")
        assert proc.returncode != 0
        assert "usage" in (proc.stderr + proc.stdout).lower()

    def test_unknown_flag(self):
        proc = _run("mse-vs-rank", "--bogus")
        assert proc.returncode != 0

    def test_missing_config_file(self, tmp_path):
        proc = _run("mse-vs-rank", "--config", str(tmp_path / "nope.cfg"))
        assert proc.returncode != 0
        assert "not found" in proc.stderr

    def test_bad_algo_rejected(self, tiny_config):
        proc = _run("mse-vs-rank", "--config", str(tiny_config),
                    "--algo", "glrds,wat")
        assert proc.returncode != 0
        assert "unknown algorithm" in proc.stderr


class TestExperimentCommands:
    def test_mse_writes_csv_and_figure(self, tiny_config, tmp_path):
        out = tmp_path / "mse.csv"
        proc = _run("mse-vs-rank", "--config", str(tiny_config),
                    "--seed", "3", "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
        assert (tmp_path / "mse.png").exists()
        header = [ln for ln in out.read_text().splitlines()
                  if not ln.startswith("#")][0]
        assert header == "x,algo,metric,mean,stderr,runs,seed"

    def test_no_fig_flag(self, tiny_config, tmp_path):
        out = tmp_path / "mse.csv"
        proc = _run("mse-vs-rank", "--config", str(tiny_config),
                    "--out", str(out), "--no-fig")
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
        assert not (tmp_path / "mse.png").exists()

    def test_ber_command(self, tiny_config, tmp_path):
        out = tmp_path / "ber.csv"
        proc = _run("ber-vs-symbols", "--config", str(tiny_config),
                    "--out", str(out), "--no-fig")
        assert proc.returncode == 0, proc.stderr
        rows = [ln for ln in out.read_text().splitlines()
                if ln and not ln.startswith("#")]
        assert len(rows) == 1 + 2 * 80  # header + two algos per symbol

    def test_seeded_runs_byte_identical(self, tiny_config, tmp_path):
        blobs = []
        for name in ("one.csv", "two.csv"):
            out = tmp_path / name
            proc = _run("mse-vs-rank", "--config", str(tiny_config),
                        "--seed", "7", "--runs", "2", "--out", str(out),
                        "--no-fig")
            assert proc.returncode == 0, proc.stderr
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_runs_override_recorded(self, tiny_config, tmp_path):
        out = tmp_path / "mse.csv"
        _run("mse-vs-rank", "--config", str(tiny_config), "--runs", "3",
             "--out", str(out), "--no-fig")
        rows = [ln for ln in out.read_text().splitlines()
                if ln and not ln.startswith("#")][1:]
        assert all(ln.split(",")[5] == "3" for ln in rows)


class TestConfigResolution:
    def test_paper_scale_sets_run_count(self, tiny_config):
        import argparse
        from slra.cli import PAPER_SCALE_RUNS, _resolve_config

        args = argparse.Namespace(config=str(tiny_config), seed=None, runs=None,
                                  out=None, algo=None, paper_scale=True)
        config = _resolve_config(args)
        assert config.runs == PAPER_SCALE_RUNS

    def test_cli_overrides_win_over_config(self, tiny_config):
        import argparse
        from slra.cli import _resolve_config

        args = argparse.Namespace(config=str(tiny_config), seed=99, runs=5,
                                  out=None, algo="glrds", paper_scale=False)
        config = _resolve_config(args)
        assert config.seed == 99
        assert config.runs == 5
        assert config.algos == ("glrds",)


class TestSelftestCommand:
    def test_clean_build_passes(self, tmp_path):
        out = tmp_path / "checks.csv"
        proc = _run("selftest", "--out", str(out))
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "selftest: PASS" in proc.stdout
        lines = out.read_text().splitlines()
        assert lines[0] == "check,status"
        assert all(ln.endswith(",pass") for ln in lines[1:])

    def test_selftest_output_deterministic(self, tmp_path):
        blobs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            proc = _run("selftest", "--out", str(out))
            assert proc.returncode == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
