"""End-to-end CLI behaviour: command wiring, exit codes, manifests and
reproducibility of artifacts."""

import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cleer.cli import main
from cleer.data import load_segments


def run_cli(args):
    return main(list(args)) or 0


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def small_segd(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "small.segd"
    code = run_cli(["gen-data", "--n-per-class", "9", "--t", "32", "--c", "3",
                    "--channels", "0", "--snr-db", "20", "--seed", "3",
                    "--out", str(path)])
    assert code == 0
    return path


class TestGenData:
    def test_emits_loadable_segd(self, small_segd):
        ds = load_segments(small_segd)
        assert ds.n == 27 and ds.t == 32 and ds.c == 3

    def test_seed_repeat_identical_hash(self, tmp_path):
        a, b = tmp_path / "a.segd", tmp_path / "b.segd"
        for out in (a, b):
            assert run_cli(["gen-data", "--n-per-class", "4", "--t", "16",
                            "--c", "2", "--channels", "0", "--seed", "11",
                            "--out", str(out)]) == 0
        assert sha256(a) == sha256(b)

    def test_manifest_written(self, small_segd):
        manifest = json.loads((small_segd.parent / "small.segd.manifest.json")
                              .read_text())
        assert manifest["command"] == "gen-data"
        assert manifest["seed"] == 3
        assert str(small_segd) in manifest["outputs"]
        assert manifest["outputs"][str(small_segd)] == sha256(small_segd)

    def test_env_var_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CLEER_SEED", "21")
        out = tmp_path / "env.segd"
        assert run_cli(["gen-data", "--n-per-class", "4", "--t", "16",
                        "--c", "2", "--channels", "0", "--out", str(out)]) == 0
        manifest = json.loads((tmp_path / "env.segd.manifest.json").read_text())
        assert manifest["seed"] == 21


TRAIN_FLAGS = ["--epochs", "1", "--batch-size", "8", "--k-folds", "3",
               "--hidden-dim", "8", "--repr-dim", "12", "--n-blocks", "2",
               "--conv-channels", "8", "--fc-dims", "6", "--seed", "5"]


class TestTrain:
    def test_train_writes_reports_and_checkpoints(self, small_segd, tmp_path):
        out = tmp_path / "run"
        assert run_cli(["train", "--data", str(small_segd),
                        "--out-dir", str(out)] + TRAIN_FLAGS) == 0
        assert (out / "metrics.csv").exists()
        assert (out / "fold_reports.json").exists()
        for fold in range(3):
            assert (out / f"fold{fold}.ckpt").exists()
        reports = json.loads((out / "fold_reports.json").read_text())
        assert 0.0 <= reports["mean_accuracy"] <= 1.0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["train"]["epochs"] == 1

    def test_truncated_segd_gives_exit_3(self, small_segd, tmp_path):
        broken = tmp_path / "broken.segd"
        broken.write_bytes(small_segd.read_bytes()[:-10])
        code = run_cli(["train", "--data", str(broken),
                        "--out-dir", str(tmp_path / "x")] + TRAIN_FLAGS)
        assert code == 3

    def test_missing_file_gives_exit_3(self, tmp_path):
        code = run_cli(["train", "--data", str(tmp_path / "none.segd"),
                        "--out-dir", str(tmp_path / "y")] + TRAIN_FLAGS)
        assert code == 3

    def test_config_file_precedence(self, small_segd, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "epochs": 1, "batch_size": 8, "k_folds": 3, "hidden_dim": 8,
            "repr_dim": 12, "n_blocks": 2, "conv_channels": 8,
            "fc_dims": "6", "seed": 5, "mode": "classifier_only"}))
        out = tmp_path / "run_cfg"
        # flag overrides file: k_folds 3 in file, flag omitted -> file wins;
        # epochs flag overrides nothing here but seed flag overrides file
        assert run_cli(["train", "--data", str(small_segd), "--config",
                        str(cfg_path), "--out-dir", str(out),
                        "--seed", "9"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["train"]["mode"] == "classifier_only"
        assert manifest["config"]["train"]["seed"] == 9
        assert manifest["config"]["train"]["k_folds"] == 3

    def test_reproducible_metrics_csv(self, small_segd, tmp_path):
        outs = [tmp_path / "r1", tmp_path / "r2"]
        for out in outs:
            assert run_cli(["train", "--data", str(small_segd),
                            "--out-dir", str(out)] + TRAIN_FLAGS) == 0
        assert ((outs[0] / "metrics.csv").read_bytes()
                == (outs[1] / "metrics.csv").read_bytes())


class TestOtherCommands:
    def test_preprocess_roundtrip(self, small_segd, tmp_path):
        out = tmp_path / "filtered.segd"
        assert run_cli(["preprocess", "--data", str(small_segd),
                        "--out", str(out), "--low-hz", "1",
                        "--high-hz", "30", "--notch-hz", "50"]) == 0
        filtered = load_segments(out)
        original = load_segments(small_segd)
        assert filtered.data.shape == original.data.shape
        # common average reference leaves channel means at zero
        means = filtered.data.astype(np.float64).mean(axis=2)
        np.testing.assert_allclose(means, 0.0, atol=1e-5)

    def test_preprocess_invalid_band_gives_exit_2(self, small_segd, tmp_path):
        # dataset is sampled at 200 Hz, so a 120 Hz edge is beyond Nyquist
        code = run_cli(["preprocess", "--data", str(small_segd),
                        "--out", str(tmp_path / "f.segd"),
                        "--low-hz", "80", "--high-hz", "120"])
        assert code == 2

    def test_ablate_emits_csv(self, small_segd, tmp_path):
        out = tmp_path / "channels.csv"
        assert run_cli(["ablate", "--data", str(small_segd), "--out", str(out),
                        "--epochs", "1", "--k-folds", "3", "--batch-size", "8",
                        "--hidden-dim", "6", "--repr-dim", "8",
                        "--n-blocks", "1", "--conv-channels", "6",
                        "--fc-dims", "4", "--seed", "2"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "channel_index,channel_name,mean_accuracy"
        assert len(lines) == 1 + 3

    def test_gradcheck_passes(self, tmp_path):
        report = tmp_path / "gc.json"
        assert run_cli(["gradcheck", "--seed", "0",
                        "--report", str(report)]) == 0
        payload = json.loads(report.read_text())
        assert payload and all(v["passed"] for v in payload.values())

    def test_export_reprs(self, small_segd, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli(["train", "--data", str(small_segd),
                        "--out-dir", str(run_dir)] + TRAIN_FLAGS) == 0
        out = tmp_path / "reprs.csv"
        assert run_cli(["export-reprs", "--data", str(small_segd),
                        "--ckpt", str(run_dir / "fold0.ckpt"),
                        "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 27 + 1
        assert len(lines[1].split(",")) == 12 + 2

    def test_compare_flag_emits_mode_table(self, small_segd, tmp_path):
        out = tmp_path / "cmp"
        assert run_cli(["train", "--data", str(small_segd), "--out-dir",
                        str(out), "--compare"] + TRAIN_FLAGS) == 0
        table = (out / "mode_comparison.csv").read_text().splitlines()
        assert len(table) == 4


class TestProcessLevel:
    def test_unknown_flag_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "cleer.cli", "gen-data", "--bogus", "1"],
            capture_output=True)
        assert proc.returncode == 2

    def test_help_lists_defaults(self):
        proc = subprocess.run(
            [sys.executable, "-m", "cleer.cli", "train", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "default 50" in proc.stdout
        assert "default 0.001" in proc.stdout

    def test_error_json_on_stderr(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "cleer.cli", "train", "--data",
             str(tmp_path / "missing.segd"), "--out-dir", str(tmp_path / "o")],
            capture_output=True, text=True)
        assert proc.returncode == 3
        payload = json.loads(proc.stderr.strip().splitlines()[-1])
        assert payload["exit_code"] == 3
