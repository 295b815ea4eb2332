from __future__ import annotations

import contextlib
import io
import json
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

from cmos_forecast.cli import main
from cmos_forecast.data import write_csv
from cmos_forecast.synth import gen_sine

REPO_ROOT = Path(__file__).resolve().parents[1]


def _run(argv: list[str]) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


class CliScriptIntegrationTests(unittest.TestCase):
    def test_synth_then_period(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            data = Path(tmp) / "sine.csv"
            synth = [sys.executable, str(REPO_ROOT / "run_cmos.py"), "synth", "--length", "2400", "--period", "24", "--channels", "2", "--out", str(data)]
            proc = subprocess.run(synth, cwd=REPO_ROOT, check=True, capture_output=True, text=True)
            self.assertEqual(json.loads(proc.stdout)["steps"], 2400)
            self.assertTrue(data.exists())

            period = [sys.executable, str(REPO_ROOT / "run_cmos.py"), "period", "--dataset", str(data), "--max-lag", "60"]
            proc = subprocess.run(period, cwd=REPO_ROOT, check=True, capture_output=True, text=True)
        lines = proc.stdout.splitlines()
        self.assertEqual(lines[0], "p=24")
        self.assertTrue(lines[1].startswith("acf_value="))
        self.assertEqual(lines[2], "lag,acf")

    def test_missing_config_file_exits_nonzero(self) -> None:
        cmd = [sys.executable, str(REPO_ROOT / "run_cmos.py"), "train", "--config", "/nonexistent/run.json"]
        proc = subprocess.run(cmd, cwd=REPO_ROOT, capture_output=True, text=True)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("/nonexistent/run.json", proc.stderr)


class CliRunIntegrationTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.work = Path(cls._tmp.name)
        cls.data = write_csv(gen_sine(600, 24, n_channels=2, name="sine"), cls.work / "sine.csv")
        cls.model_flags = [
            "--dataset", str(cls.data),
            "--lookback", "48",
            "--horizon", "24",
            "--chunk-size", "8",
            "--experts", "2",
            "--kernel-size", "8",
            "--lr", "0.01",
            "--deterministic",
            "--quiet",
        ]
        cls.run_dir = cls.work / "run"
        code, out, err = _run(["train", *cls.model_flags, "--pi", "--epochs", "2", "--seeds", "1", "2", "--out", str(cls.run_dir)])
        if code != 0:
            raise AssertionError(f"train failed: {err}")
        cls.report = json.loads(out)

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    def test_train_writes_run_directory(self) -> None:
        for name in (
            "config.json",
            "metrics.json",
            "history.csv",
            "checkpoint.cmos",
            "history_seed1.csv",
            "history_seed2.csv",
            "checkpoint_seed1.cmos",
            "checkpoint_seed2.cmos",
        ):
            self.assertTrue((self.run_dir / name).exists(), msg=name)
        metrics = json.loads((self.run_dir / "metrics.json").read_text(encoding="utf-8"))
        self.assertEqual(metrics["seeds"], [1, 2])
        self.assertEqual(metrics["pi_period"], 24)
        self.assertTrue(metrics["pi_enabled"])
        self.assertEqual(len(metrics["mse_by_step"]), 24)
        self.assertEqual(metrics["dataset_meta"]["steps"], 600)
        self.assertEqual(self.report["mean_mse"], metrics["mean_mse"])

    def test_echoed_config_reproduces_run(self) -> None:
        rerun_dir = self.work / "rerun"
        code, _, err = _run(["train", "--config", str(self.run_dir / "config.json"), "--out", str(rerun_dir), "--quiet"])
        self.assertEqual(code, 0, msg=err)
        first = json.loads((self.run_dir / "metrics.json").read_text(encoding="utf-8"))
        second = json.loads((rerun_dir / "metrics.json").read_text(encoding="utf-8"))
        self.assertEqual(first["per_seed"], second["per_seed"])
        self.assertEqual(first["mean_mse"], second["mean_mse"])
        self.assertEqual((self.run_dir / "checkpoint.cmos").read_bytes(), (rerun_dir / "checkpoint.cmos").read_bytes())

    def test_evaluate_checkpoint(self) -> None:
        out_dir = self.work / "eval"
        code, out, err = _run(
            ["evaluate", "--dataset", str(self.data), "--checkpoint", str(self.run_dir / "checkpoint.cmos"), "--out", str(out_dir), "--quiet"]
        )
        self.assertEqual(code, 0, msg=err)
        report = json.loads(out)
        self.assertEqual(report["mean_mse"], self.report["per_seed"][0]["mse"])
        self.assertIn("val_mse", report)
        self.assertTrue((out_dir / "metrics.json").exists())

    def test_inspect_exports_matrices(self) -> None:
        out_dir = self.work / "inspect"
        code, out, err = _run(
            ["inspect", "--dataset", str(self.data), "--checkpoint", str(self.run_dir / "checkpoint.cmos"), "--out", str(out_dir), "--svg", "--quiet"]
        )
        self.assertEqual(code, 0, msg=err)
        names = sorted(Path(path).name for path in json.loads(out)["files"])
        self.assertEqual(names, ["mixing_weights.csv", "theta_0.csv", "theta_0.svg", "theta_1.csv", "theta_1.svg"])

    def test_grid_skips_invalid_cells(self) -> None:
        out_dir = self.work / "grid"
        code, out, err = _run(
            [
                "grid",
                *self.model_flags,
                "--epochs", "1",
                "--seeds", "1",
                "--lookback-grid", "48",
                "--chunk-grid", "5", "8",
                "--expert-grid", "2",
                "--lr-grid", "0.01",
                "--out", str(out_dir),
            ]
        )
        self.assertEqual(code, 0, msg=err)
        report = json.loads(out)
        self.assertEqual(report["grid"]["cells"], 1)
        self.assertEqual([cell["S"] for cell in report["grid"]["skipped"]], [5])
        self.assertEqual(report["S"], 8)
        records = (out_dir / "grid.jsonl").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(records), 1)

    def test_ablate_variants(self) -> None:
        out_dir = self.work / "ablate"
        code, out, err = _run(
            ["ablate", *self.model_flags, "--epochs", "1", "--seeds", "1", "--variants", "full", "no_chunk", "private_line", "--out", str(out_dir)]
        )
        self.assertEqual(code, 0, msg=err)
        document = json.loads(out)
        self.assertEqual(sorted(document["variants"]), ["full", "no_chunk", "private_line"])
        self.assertTrue((out_dir / "ablation" / "no_chunk" / "metrics.json").exists())
        self.assertEqual(document["variants"]["private_line"]["param_count"]["allocator_part"], 0)

    def test_theorem_suites(self) -> None:
        code, out, _ = _run(["theorem", "--trials", "400", "--grad-instances", "3", "--quiet"])
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertTrue(payload["theorem"]["passed"])
        self.assertTrue(payload["gradcheck"]["passed"])

    def test_unknown_flag_is_a_usage_error(self) -> None:
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                main(["train", "--bogus"])
        self.assertEqual(ctx.exception.code, 2)

    def test_missing_dataset(self) -> None:
        code, _, err = _run(["train", "--dataset", str(self.work / "absent.csv"), "--out", str(self.work / "x"), "--quiet"])
        self.assertEqual(code, 1)
        self.assertIn("dataset not found", err)

    def test_horizon_set_writes_one_run_per_horizon(self) -> None:
        out_dir = self.work / "horizons"
        code, out, err = _run(["train", *self.model_flags, "--horizons", "8", "24", "--epochs", "1", "--seeds", "1", "--out", str(out_dir)])
        self.assertEqual(code, 0, msg=err)
        document = json.loads(out)
        self.assertEqual(document["horizons"], [8, 24])
        per_horizon = []
        for H in (8, 24):
            report = json.loads((out_dir / f"H{H}" / "metrics.json").read_text(encoding="utf-8"))
            self.assertEqual(report["H"], H)
            self.assertEqual(document["per_horizon"][str(H)]["mean_mse"], report["mean_mse"])
            echoed = json.loads((out_dir / f"H{H}" / "config.json").read_text(encoding="utf-8"))
            self.assertEqual((echoed["horizon"], echoed["horizons"]), (H, []))
            per_horizon.append(report["mean_mse"])
        self.assertAlmostEqual(document["mean_mse"], sum(per_horizon) / 2, places=12)
        self.assertEqual(json.loads((out_dir / "metrics.json").read_text(encoding="utf-8")), document)

    def test_mistyped_config_value_is_a_handled_error(self) -> None:
        config_path = self.work / "bad.json"
        config_path.write_text(json.dumps({"dataset": str(self.data), "lookback": "abc"}), encoding="utf-8")
        code, _, err = _run(["train", "--config", str(config_path), "--out", str(self.work / "bad"), "--quiet"])
        self.assertEqual(code, 1)
        self.assertTrue(err.startswith("error: "))
        self.assertIn("lookback must be an integer", err)
        self.assertNotIn("Traceback", err)

    def test_theorem_rejects_empty_suites(self) -> None:
        for flag in ("--max-dim", "--trials"):
            code, _, err = _run(["theorem", flag, "0", "--quiet"])
            self.assertEqual(code, 1)
            self.assertIn(f"{flag} must be >= 1", err)


if __name__ == "__main__":
    unittest.main()
