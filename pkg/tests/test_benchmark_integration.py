from __future__ import annotations

import os
import tempfile
import unittest
from pathlib import Path

from cmos_forecast.constants import BENCHMARK_DATASETS
from cmos_forecast.data import load_csv, train_span
from cmos_forecast.models import RunConfig, SplitSpec
from cmos_forecast.periodicity import estimate_period
from cmos_forecast.pipeline import ExperimentPipeline

_RAW_DIR = os.getenv("CMOS_DATA_DIR", "").strip()
DATA_DIR = Path(_RAW_DIR).expanduser() if _RAW_DIR else None

# desk-scale protocol: one fixed config per dataset instead of the full sweep
BENCHMARK_RUN = {
    "lookback": 336,
    "horizon": 96,
    "chunk_size": 24,
    "experts": 4,
    "kernel_size": 8,
    "lr": 8e-4,
    "epochs": 30,
    "patience": 5,
    "seeds": [1, 2, 3, 4, 5],
    "deterministic": True,
}


def _benchmark(name: str) -> Path | None:
    if DATA_DIR is None:
        return None
    path = DATA_DIR / f"{name}.csv"
    return path if path.is_file() else None


@unittest.skipUnless(DATA_DIR is not None, "set CMOS_DATA_DIR to run benchmark checks")
class BenchmarkDatasetIntegrationTests(unittest.TestCase):
    def _load(self, name: str):
        path = _benchmark(name)
        if path is None:
            self.skipTest(f"{name}.csv not present under {DATA_DIR}")
        return load_csv(path)

    def test_ett_hourly_shape_and_period(self) -> None:
        ds = self._load("ETTh1")
        expected = BENCHMARK_DATASETS["ETTh1"]
        self.assertEqual((ds.n_steps, ds.n_channels), (expected["steps"], expected["channels"]))
        self.assertEqual(ds.sample_interval, "1h")
        estimate = estimate_period(ds, 200, train_span(ds, SplitSpec.for_dataset(ds.name)))
        self.assertEqual(estimate.period, 24)

    def test_ett_minute_period(self) -> None:
        ds = self._load("ETTm1")
        self.assertEqual(ds.sample_interval, "15min")
        self.assertEqual(estimate_period(ds, 200).period, 96)

    def test_electricity_shape(self) -> None:
        ds = self._load("Electricity")
        expected = BENCHMARK_DATASETS["Electricity"]
        self.assertEqual((ds.n_steps, ds.n_channels), (expected["steps"], expected["channels"]))
        self.assertEqual(SplitSpec.for_dataset(ds.name).style, "standard")


@unittest.skipUnless(DATA_DIR is not None, "set CMOS_DATA_DIR to run benchmark checks")
class BenchmarkAccuracyIntegrationTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.work = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def _pipeline(self, name: str, label: str, **overrides) -> ExperimentPipeline:
        path = _benchmark(name)
        if path is None:
            self.skipTest(f"{name}.csv not present under {DATA_DIR}")
        payload = {**BENCHMARK_RUN, "dataset": str(path), "pi": True, "out": str(self.work / f"{name}-{label}"), **overrides}
        return ExperimentPipeline(RunConfig.from_dict(payload))

    def test_etth1_test_error(self) -> None:
        report = self._pipeline("ETTh1", "full").train()
        self.assertLessEqual(report["mean_mse"], 0.381)
        self.assertLessEqual(report["mean_mae"], 0.403)

    def test_etth2_test_error(self) -> None:
        report = self._pipeline("ETTh2", "full").train()
        self.assertLessEqual(report["mean_mse"], 0.294)

    def test_injection_helps_on_etth2(self) -> None:
        with_injection = self._pipeline("ETTh2", "pi").train()
        without_injection = self._pipeline("ETTh2", "no-pi", pi=False).train()
        self.assertLessEqual(with_injection["mean_mse"], without_injection["mean_mse"])

    def test_ablation_ordering(self) -> None:
        present = [name for name in ("ETTh1", "ETTh2", "ETTm2") if _benchmark(name) is not None]
        if len(present) < 2:
            self.skipTest("ablation ordering needs at least two of ETTh1, ETTh2, ETTm2")
        ordered = 0
        for name in present:
            document = self._pipeline(name, "ablation", variants=["full", "no_chunk", "no_cormix"]).ablate()
            scores = {variant: entry["mean_mse"] for variant, entry in document["variants"].items()}
            if scores["full"] <= scores["no_cormix"] and scores["full"] <= scores["no_chunk"]:
                ordered += 1
        self.assertGreaterEqual(ordered, min(2, len(present)))


if __name__ == "__main__":
    unittest.main()
