"""Tests for the command-line interface."""

import json
import subprocess
import sys

CLI = [sys.executable, "-m", "titeprog.cli"]


def run_cli(*args, **kw):
    return subprocess.run(
        CLI + list(args), capture_output=True, text=True, timeout=600, **kw
    )


class TestSkeletonCommand:
    def test_prints_four_decimals(self):
        res = run_cli("skeleton", "--target", "0.25", "--halfwidth", "0.10",
                      "--nu", "3", "--k", "5")
        assert res.returncode == 0
        assert res.stdout.split() == ["0.0108", "0.0817", "0.2500", "0.4643", "0.6541"]

    def test_halfwidth_at_least_target_rejected(self):
        res = run_cli("skeleton", "--target", "0.25", "--halfwidth", "0.3",
                      "--nu", "3", "--k", "5")
        assert res.returncode == 1
        assert "halfwidth" in res.stderr

    def test_anchor_at_first_dose(self):
        res = run_cli("skeleton", "--target", "0.25", "--halfwidth", "0.10",
                      "--nu", "1", "--k", "5")
        assert res.returncode == 0
        assert res.stdout.split()[0] == "0.2500"

    def test_missing_flag_is_usage_error(self):
        res = run_cli("skeleton", "--target", "0.25")
        assert res.returncode == 1


CONFIG = """
# tiny smoke study
n = 6
phi = 0.5
replicates = {reps}
seed = 99
strategies = B, C
scenarios = tox3-const60
round_to_week = true
workers = 1
"""


class TestSimulateCommand:
    def test_config_run_writes_artifacts(self, tmp_path):
        cfg = tmp_path / "study.cfg"
        cfg.write_text(CONFIG.format(reps=3), encoding="utf-8")
        out = tmp_path / "out"
        res = run_cli("simulate", str(cfg), "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert (out / "results.csv").exists()
        assert (out / "selection.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seed"] == 99
        assert manifest["study"]["replicates"] == 3
        header = (out / "results.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == ("scenario_label,tox_row,prog_row,strategy,phi,N,"
                          "PCS,POS,mean_added,pct_added,mean_duration,mc_se_pcs")

    def test_single_replicate_no_aggregation_error(self, tmp_path):
        cfg = tmp_path / "study.cfg"
        cfg.write_text(CONFIG.format(reps=1), encoding="utf-8")
        res = run_cli("simulate", str(cfg), "--out", str(tmp_path / "o"))
        assert res.returncode == 0, res.stderr

    def test_same_command_twice_byte_identical(self, tmp_path):
        cfg = tmp_path / "study.cfg"
        cfg.write_text(CONFIG.format(reps=4), encoding="utf-8")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run_cli("simulate", str(cfg), "--out", str(out1)).returncode == 0
        assert run_cli("simulate", str(cfg), "--out", str(out2)).returncode == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        assert (out1 / "selection.csv").read_bytes() == (out2 / "selection.csv").read_bytes()

    def test_rerun_from_manifest_reproduces_results(self, tmp_path):
        cfg = tmp_path / "study.cfg"
        cfg.write_text(CONFIG.format(reps=4), encoding="utf-8")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run_cli("simulate", str(cfg), "--out", str(out1)).returncode == 0
        res = run_cli("simulate", str(out1 / "manifest.json"), "--out", str(out2))
        assert res.returncode == 0, res.stderr
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()

    def test_unknown_config_is_usage_error(self, tmp_path):
        res = run_cli("simulate", str(tmp_path / "missing.cfg"))
        assert res.returncode == 1

    def test_unreadable_config_is_data_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this is ; not = a | config\nnope", encoding="utf-8")
        res = run_cli("simulate", str(cfg), "--out", str(tmp_path / "o"))
        assert res.returncode == 2

    def test_scenario_file_loaded(self, tmp_path):
        scn = tmp_path / "custom.scn"
        scn.write_text(
            "label = custom1\ntox_probs = 0.05 0.1 0.25 0.4 0.55\n"
            "prog_probs = 0.6 0.6 0.6 0.6 0.6\n",
            encoding="utf-8",
        )
        cfg = tmp_path / "study.cfg"
        cfg.write_text(
            "n = 4\nreplicates = 2\nstrategies = B\nscenarios =\n"
            f"scenario_files = {scn.name}\nworkers = 1\n",
            encoding="utf-8",
        )
        res = run_cli("simulate", str(cfg), "--out", str(tmp_path / "o"))
        assert res.returncode == 0, res.stderr
        body = (tmp_path / "o" / "results.csv").read_text(encoding="utf-8")
        assert "custom1" in body

    def test_bad_replicates_flag(self, tmp_path):
        cfg = tmp_path / "study.cfg"
        cfg.write_text(CONFIG.format(reps=2), encoding="utf-8")
        res = run_cli("simulate", str(cfg), "--replicates", "0")
        assert res.returncode == 1


class TestServeCommand:
    def test_corrupt_store_exits_with_data_error(self, tmp_path):
        store = tmp_path / "store"
        store.mkdir()
        (store / "abc.meta.json").write_text(
            json.dumps({
                "trial_id": "abc",
                "design": {"num_doses": 5, "target": 0.25, "window": 8.0,
                           "sample_size": 18, "phi": 0.5},
                "strategy": "B",
                "skeleton": [0.0108, 0.0817, 0.25, 0.4643, 0.6541],
            }),
            encoding="utf-8",
        )
        (store / "abc.events.jsonl").write_text("{broken\n", encoding="utf-8")
        res = run_cli("serve", "--store", str(store), "--port", "8123")
        assert res.returncode == 2
        assert "line 1" in res.stderr
