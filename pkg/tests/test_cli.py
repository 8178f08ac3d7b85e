import csv
import json

import pytest

from wavecascade import artifacts
from wavecascade.cli import (EXIT_DATA, EXIT_FAIL, EXIT_OK, EXIT_USAGE, cmd_analyze, cmd_run,
                             main, parse_axis)
from wavecascade.config import from_dict, load_config, set_key
from wavecascade.exceptions import ConfigError, DataError

SMALL = """\
[grid]
kind = "geometric"
omega_min = 1.0
omega_max = 256.0
n = 16

[initial]
c_in = 0.001

[step]
t_end = 0.01
dt_init = 1e-4
snapshot_stride = 5

[diagnostics]
levels = [2, 4, 6]
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(SMALL)
    return p


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestValidate:
    def test_remark_passes(self, cfg_path, capsys):
        assert main(["validate", "--config", str(cfg_path)]) == EXIT_OK
        assert "3θ+2ϖ₁ ≤ 0" in capsys.readouterr().out

    def test_failing_constraint(self, tmp_path, capsys):
        p = write(tmp_path, SMALL + "\n[exponents]\nvarpi1 = 0.0\n")
        assert main(["validate", "--config", str(p)]) == EXIT_FAIL
        out = capsys.readouterr().out
        assert "3θ+2ϖ₁ ≤ 0" in out and "FAIL" in out

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "none.toml")]) == EXIT_USAGE

    def test_unknown_key(self, tmp_path):
        p = write(tmp_path, SMALL.replace("n = 16", "n = 16\ncells = 3"))
        assert main(["validate", "--config", str(p)]) == EXIT_USAGE


class TestRun:
    def test_t_end_zero(self, tmp_path, cfg_path):
        out = tmp_path / "r0"
        p = write(tmp_path, SMALL.replace("t_end = 0.01", "t_end = 0.0"))
        assert main(["run", "--config", str(p), "--out", str(out)]) == EXIT_OK
        manifest, traj = artifacts.load_run(out)
        assert manifest["status"] == "ok"
        assert len(manifest["snapshots"]) == 1 and len(traj.snapshots) == 1

    def test_rerun_bit_identical(self, tmp_path, cfg_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg_path), "--out", str(a)]) == EXIT_OK
        assert main(["run", "--config", str(cfg_path), "--out", str(b), "--workers", "3"]) == 0
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes(), f

    def test_artifacts_consistent(self, tmp_path, cfg_path):
        out = tmp_path / "r"
        code, manifest = cmd_run(load_config(cfg_path), out)
        assert code == EXIT_OK
        m, traj = artifacts.load_run(out)
        assert m["ledger"]["steps"] == len(traj.series) - 1
        assert m["ledger"]["max_relative_energy_drift"] <= 1e-12
        assert json.loads((out / "report.json").read_text())["Tstar"] == manifest["Tstar"]
        assert traj.final.time == pytest.approx(0.01, rel=1e-15)

    def test_invalid_refused(self, tmp_path):
        out = tmp_path / "bad"
        p = write(tmp_path, SMALL + "\n[exponents]\nvarpi1 = 0.0\n")
        assert main(["run", "--config", str(p), "--out", str(out)]) == EXIT_FAIL
        assert not out.exists()

    def test_invalid_allowed(self, tmp_path):
        out = tmp_path / "forced"
        p = write(tmp_path, SMALL.replace("t_end = 0.01", "t_end = 0.0")
                  + "\n[exponents]\nvarpi1 = 0.0\n")
        assert main(["run", "--config", str(p), "--out", str(out), "--allow-invalid"]) == 0
        manifest = artifacts.read_manifest(out)
        assert not manifest["constraints"]["all_satisfied"]


class TestAnalyze:
    @pytest.fixture
    def run_dir(self, tmp_path, cfg_path):
        out = tmp_path / "run"
        assert cmd_run(load_config(cfg_path), out)[0] == EXIT_OK
        return out

    def test_reproduces_report(self, run_dir, tmp_path):
        out = tmp_path / "an"
        assert main(["analyze", str(run_dir), "--out", str(out)]) == EXIT_OK
        assert (out / "report.json").read_bytes() == (run_dir / "report.json").read_bytes()
        assert (out / "report_series.csv").read_bytes() == (
            run_dir / "report_series.csv").read_bytes()

    def test_lambda_only_changes_concentration(self, run_dir):
        base = cmd_analyze(run_dir).to_dict()
        other = cmd_analyze(run_dir, lam=0.05).to_dict()
        assert other["lambda"] == 0.05
        assert other["Tstar"] == base["Tstar"] and other["times"] == base["times"]
        for key, lv in base["levels"].items():
            olv = other["levels"][key]
            assert olv["partition"] == lv["partition"]
            assert olv["measures"]["M"] == lv["measures"]["M"]
            # only the C22 term carries a lambda factor, to the fourth power
            f = (0.05 / base["lambda"]) ** 4
            for a, b in zip(lv["flux_terms"], olv["flux_terms"]):
                assert b[0] == a[0] and b[2] == a[2]
                assert b[1] == pytest.approx(a[1] * f, rel=1e-12)

    def test_empty_dir(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main(["analyze", str(tmp_path / "empty")]) == EXIT_DATA
        with pytest.raises(DataError):
            artifacts.load_run(tmp_path / "empty")

    def test_corrupt_trajectory(self, run_dir):
        (run_dir / artifacts.TRAJECTORY).write_text("garbage\n")
        with pytest.raises(DataError):
            artifacts.load_run(run_dir)


class TestSweep:
    def test_single_point_matches_run(self, tmp_path, cfg_path):
        sw = tmp_path / "sw"
        assert main(["sweep", "--config", str(cfg_path), "--out", str(sw),
                     "--axis", "initial.c_in=0.001"]) == EXIT_OK
        single = tmp_path / "single"
        cmd_run(load_config(cfg_path), single)
        a, b = sw / "point_0000", single
        for f in ("trajectory.csv", "report.json"):
            assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_cin_axis_marks_cascade(self, tmp_path, cfg_path):
        sw = tmp_path / "sw"
        p = write(tmp_path, SMALL.replace("t_end = 0.01", "t_end = 0.0"))
        assert main(["sweep", "--config", str(p), "--out", str(sw), "--workers", "2",
                     "--axis", "c_in=0.0005,0.004"]) == EXIT_OK
        text = (sw / "sweep.csv").read_text().splitlines()
        assert text[0].startswith("# schema:")
        rows = list(csv.DictReader(text[1:]))
        assert [r["c_in"] for r in rows] == ["0.0005", "0.004"]
        assert [r["immediate_cascade"] for r in rows] == ["True", "False"]
        assert all(r["status"] == "ok" for r in rows)

    def test_empty_axis(self, tmp_path, cfg_path):
        assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "x"),
                     "--axis", "initial.c_in="]) == EXIT_USAGE
        assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "x")]) == 2

    def test_parse_axis(self):
        assert parse_axis("step.method=euler,heun") == ("step.method", ["euler", "heun"])
        assert parse_axis("grid.n = 8, 16") == ("grid.n", [8, 16])
        with pytest.raises(ConfigError):
            parse_axis("nothing")


class TestConfig:
    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            from_dict({"gird": {}})

    def test_set_key(self):
        doc = {}
        set_key(doc, "grid.n", 8)
        set_key(doc, "c_in", 0.002)
        assert doc == {"grid": {"n": 8}, "initial": {"c_in": 0.002}}
        with pytest.raises(ConfigError):
            set_key(doc, "no_such_key", 1)

    def test_defaults_filled(self, cfg_path):
        cfg = load_config(cfg_path)
        assert cfg.raw["diagnostics"]["sigma"] == 0.001
        assert cfg.raw["diagnostics"]["levels"] == [2, 4, 6]
        assert from_dict(cfg.raw).raw == cfg.raw
