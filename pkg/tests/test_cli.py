import json
import math
import os

import numpy as np
import pytest

from sdfest import cli

from conftest import REPO_ROOT


def run_cli(*argv):
    return cli.main(list(argv))


def write_config(tmp_path, name="cfg.json", **overrides):
    data = {
        "schema_version": 1,
        "M": 10,
        "n": 20,
        "parent": "paper-quintic",
        "estimators": [{"type": "natural"}, {"type": "grouped", "size": 2}],
        "replicates": 3,
        "seed": 7,
    }
    data.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestEval:
    def test_limit_F_support_end(self, capsys):
        assert run_cli("eval", "--limit-F", "1.875") == 0
        assert capsys.readouterr().out.strip() == "1"

    def test_limit_g_peak(self, capsys):
        assert run_cli("eval", "--limit-g", "0.5") == 0
        assert capsys.readouterr().out.strip() == "1.875"

    def test_mixture_two_cells(self, capsys):
        assert run_cli("eval", "--mixture", "2", "2", "1") == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == 2.0 * math.exp(-1.0)
        assert out == "0.73575888234288467"  # 17 significant digits

    def test_malformed_number_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("eval", "--limit-F", "abc")
        assert exc.value.code == 2

    def test_mixture_rejects_fractional_m(self, capsys):
        assert run_cli("eval", "--mixture", "2.5", "2", "1") == 2


class TestSimulate:
    def test_missing_config_exit_2_names_path(self, capsys):
        assert run_cli("simulate", "--config", "/no/such/file.json") == 2
        assert "/no/such/file.json" in capsys.readouterr().err

    def test_unknown_key_exit_2_names_key(self, tmp_path, capsys):
        path = write_config(tmp_path, bogus_key=1)
        assert run_cli("simulate", "--config", path) == 2
        assert "bogus_key" in capsys.readouterr().err

    def test_misspelled_estimator_key_exit_2(self, tmp_path, capsys):
        path = write_config(
            tmp_path, estimators=[{"type": "kernel", "kernel": "box", "bandwith": 5}]
        )
        assert run_cli("simulate", "--config", path) == 2
        assert "bandwith" in capsys.readouterr().err

    def test_wrong_schema_version_exit_2(self, tmp_path):
        path = write_config(tmp_path, schema_version=2)
        assert run_cli("simulate", "--config", path) == 2

    def test_writes_expected_files(self, tmp_path, capsys):
        path = write_config(tmp_path)
        out = tmp_path / "out"
        assert run_cli("simulate", "--config", path, "--out", str(out)) == 0
        assert {p.name for p in out.iterdir()} == {
            "replicates.csv",
            "sdf_knots.csv",
            "density_knots.csv",
        }
        table = capsys.readouterr().out
        assert "natural" in table and "grouped:2" in table

    def test_quiet_suppresses_stdout(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert run_cli("simulate", "--config", path, "--out", str(tmp_path / "o"), "--quiet") == 0
        assert capsys.readouterr().out == ""

    def test_seed_override_changes_rows_not_schema(self, tmp_path):
        path = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("simulate", "--config", path, "--out", str(out1), "--quiet") == 0
        assert run_cli("simulate", "--config", path, "--out", str(out2), "--seed", "8", "--quiet") == 0
        rows1 = (out1 / "replicates.csv").read_text().splitlines()
        rows2 = (out2 / "replicates.csv").read_text().splitlines()
        assert rows1[0] == rows2[0]  # same header
        assert rows1 != rows2

    def test_byte_identical_reruns(self, tmp_path):
        path = write_config(tmp_path, eval_grid=[0.5, 1.0], coupling=True)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert run_cli("simulate", "--config", path, "--out", str(out), "--quiet") == 0
        for name in os.listdir(out1):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_tabulated_parent(self, tmp_path):
        table = tmp_path / "cdf.csv"
        table.write_text("0.0,0.0\n0.25,0.5\n1.0,1.0\n")
        path = write_config(tmp_path, parent={"tabulated": "cdf.csv"})
        assert run_cli("simulate", "--config", path, "--out", str(tmp_path / "t"), "--quiet") == 0

    def test_unwritable_out_dir_exit_1(self, tmp_path):
        path = write_config(tmp_path)
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        assert run_cli("simulate", "--config", path, "--out", str(blocker), "--quiet") == 1


class TestSweep:
    def test_shipped_config_parses(self):
        base, scales = cli.load_sweep_config(
            os.path.join(REPO_ROOT, "configs", "consistency_sweep.json")
        )
        assert scales == [1, 4, 16]
        assert base.M == 250 and base.n == 500

    def test_single_scale(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            M=50,
            n=100,
            estimators=[{"type": "natural"}],
            scales=[1],
        )
        out = tmp_path / "sw"
        assert run_cli("sweep", "--config", path, "--out", str(out)) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "scale,M,n,estimator,median_l1,mean_l1,stderr_l1"
        assert len(lines) == 2

    def test_schedule_violation_exit_2(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            M=50,
            n=100,
            estimators=[{"type": "grouped", "size": 10}],
            scales=[1, 4],
        )
        assert run_cli("sweep", "--config", path) == 2
        assert "shrink" in capsys.readouterr().err

    def test_scenario_keys_rejected_in_sweep(self, tmp_path):
        path = write_config(tmp_path, scales=[1], coupling=True)
        assert run_cli("sweep", "--config", path) == 2


class TestCoupleCheck:
    def test_zero_draws_trivial_success(self, capsys):
        assert run_cli("couple-check", "--M", "10", "--n", "20", "--draws", "0") == 0
        assert "violations=0" in capsys.readouterr().out

    def test_small_run_no_violations(self, capsys):
        assert run_cli(
            "couple-check", "--M", "100", "--n", "200", "--draws", "50", "--seed", "3"
        ) == 0
        out = capsys.readouterr().out
        assert "violations=0" in out and "median=" in out

    def test_bad_arguments_exit_2(self):
        assert run_cli("couple-check", "--M", "0", "--n", "20", "--draws", "1") == 2


def test_defaults_json_in_sync():
    with open(os.path.join(REPO_ROOT, "defaults.json"), encoding="utf-8") as fh:
        committed = json.load(fh)
    assert committed == cli.DEFAULTS
