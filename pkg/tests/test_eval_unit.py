from __future__ import annotations

import unittest

import numpy as np

from cmos_forecast.ablation import apply_variant, run_ablation
from cmos_forecast.data import split, window_origins, windows
from cmos_forecast.evaluate import evaluate, score_windows
from cmos_forecast.gradcheck import random_tiny_config, run_theorem_fuzz
from cmos_forecast.metrics import check_averaging_theorem, count_params, noise_sensitivity
from cmos_forecast.model import ShapeError, init_params
from cmos_forecast.models import CmosConfig, ConfigError, DataError, SplitRange, SplitSpec, TrainConfig
from cmos_forecast.synth import gen_sine


class ParamCountUnitTests(unittest.TestCase):
    def test_long_horizon_budget(self) -> None:
        count = count_params(CmosConfig(L=720, H=720, S=24, K=4, c=8, N=7))
        self.assertEqual(count.correlation_part, 3600)
        self.assertEqual(count.aggregators_part, 56)
        self.assertEqual(count.allocator_part, 716)
        self.assertEqual(count.total, 4372)
        self.assertLess(count.total / (2 * 720 * 720), 0.01)

    def test_point_wise_single_matrix(self) -> None:
        count = count_params(CmosConfig(L=96, H=24, S=1, K=1, c=8, N=1))
        self.assertEqual(count.correlation_part, 24 * 96)
        self.assertEqual(count.total, 24 * 96 + 8 + 23)

    def test_private_line_has_no_gate(self) -> None:
        count = count_params(CmosConfig(L=48, H=24, S=8, K=1, c=8, N=5, channel_strategy="private_line"))
        self.assertEqual(count.correlation_part, 5 * 3 * 6)
        self.assertEqual(count.aggregators_part, 0)
        self.assertEqual(count.allocator_part, 0)

    def test_matches_allocated_arrays(self) -> None:
        rng = np.random.default_rng(12)
        for _ in range(50):
            cfg = random_tiny_config(rng)
            count = count_params(cfg)
            params = init_params(cfg, seed=0)
            self.assertEqual(count.total_with_bias, params.size)
            self.assertEqual(count.total, params.size - params.bias.size)


class NoiseSensitivityUnitTests(unittest.TestCase):
    def test_examples(self) -> None:
        self.assertEqual(noise_sensitivity(np.array([1.0, 1.0]), 1.0), 2.0)
        self.assertEqual(noise_sensitivity(np.array([3.0, 4.0]), 0.5), 6.25)
        self.assertEqual(noise_sensitivity(np.array([1.0, 2.0]), 0.0), 0.0)

    def test_negative_sigma(self) -> None:
        with self.assertRaises(ValueError):
            noise_sensitivity(np.ones(2), -1.0)

    def test_averaged_chunk_is_never_more_sensitive(self) -> None:
        rng = np.random.default_rng(8)
        for _ in range(200):
            S = int(rng.integers(2, 9))
            theta = rng.standard_normal(S)
            averaged = np.array([theta.mean()])
            self.assertLessEqual(noise_sensitivity(averaged, 0.3), noise_sensitivity(theta, 0.3) + 1e-15)


class AveragingTheoremUnitTests(unittest.TestCase):
    def test_uniform_weights(self) -> None:
        check = check_averaging_theorem(np.array([1.0, 2.0, 3.0]), np.ones(3))
        self.assertAlmostEqual(check.lhs, 4.0)
        self.assertEqual(check.rhs, 14.0)
        self.assertTrue(check.holds)
        self.assertFalse(check.equality)
        self.assertEqual(set(check.to_dict()), {"lhs", "rhs", "holds", "equality"})

    def test_single_shared_index_is_equality(self) -> None:
        check = check_averaging_theorem(np.array([0.0, 5.0, 0.0]), np.array([0.0, 2.0, 0.0]))
        self.assertEqual(check.lhs, check.rhs)
        self.assertTrue(check.holds)
        self.assertTrue(check.equality)

    def test_zero_coefficients_are_equality(self) -> None:
        check = check_averaging_theorem(np.zeros(4), np.array([0.1, 0.0, 2.0, 1.0]))
        self.assertTrue(check.holds)
        self.assertTrue(check.equality)

    def test_one_hot_weight_with_spread_coefficients_is_strict(self) -> None:
        check = check_averaging_theorem(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        self.assertEqual((check.lhs, check.rhs), (1.0, 2.0))
        self.assertFalse(check.equality)

    def test_invalid_weights(self) -> None:
        with self.assertRaises(ValueError):
            check_averaging_theorem(np.ones(2), np.zeros(2))
        with self.assertRaises(ValueError):
            check_averaging_theorem(np.ones(2), np.array([1.0, -0.5]))
        with self.assertRaises(ShapeError):
            check_averaging_theorem(np.ones(2), np.ones(3))

    def test_fuzz_suite(self) -> None:
        report = run_theorem_fuzz(trials=10_000, max_dim=16, seed=0)
        self.assertEqual(report.violations, 0)
        self.assertEqual(report.equality_mismatches, 0)
        self.assertGreater(report.equality_cases, 0)
        self.assertTrue(report.passed)


class ScoreWindowsUnitTests(unittest.TestCase):
    def setUp(self) -> None:
        self.dataset = gen_sine(300, 12, n_channels=3)
        self.span = SplitRange(0, 300, 0)

    def test_zero_predictor_scores_mean_square_of_targets(self) -> None:
        metrics = score_windows(self.dataset, self.span, 24, 12, lambda batch: np.zeros_like(batch.target))
        targets = np.concatenate([b.target for b in windows(self.dataset, self.span, 24, 12, batch_size=1000)])
        self.assertAlmostEqual(metrics.mse, float(np.mean(targets**2)), places=12)
        self.assertAlmostEqual(metrics.mae, float(np.mean(np.abs(targets))), places=12)
        self.assertEqual(metrics.n_windows, window_origins(self.span, 24, 12).size)
        self.assertEqual(len(metrics.mse_by_step), 12)

    def test_perfect_oracle(self) -> None:
        metrics = score_windows(self.dataset, self.span, 24, 12, lambda batch: batch.target)
        self.assertLess(metrics.mse, 1e-10)
        self.assertEqual(metrics.mae, 0.0)

    def test_reference_series_supplies_the_targets(self) -> None:
        noisy = self.dataset.with_values(self.dataset.values + 0.5)
        echo = score_windows(noisy, self.span, 24, 12, lambda batch: batch.target)
        against_clean = score_windows(noisy, self.span, 24, 12, lambda batch: batch.target, reference=self.dataset)
        self.assertEqual(echo.mse, 0.0)
        self.assertAlmostEqual(against_clean.mse, 0.25, places=12)
        self.assertAlmostEqual(against_clean.mae, 0.5, places=12)
        with self.assertRaises(DataError):
            score_windows(noisy, self.span, 24, 12, lambda batch: batch.target, reference=gen_sine(200, 12, n_channels=3))

    def test_batch_size_does_not_change_scores(self) -> None:
        cfg = CmosConfig(L=24, H=12, S=4, K=2, c=4, N=3)
        params = init_params(cfg, seed=3)
        small = evaluate(params, cfg, self.dataset, self.span, batch_size=7)
        large = evaluate(params, cfg, self.dataset, self.span, batch_size=256)
        self.assertAlmostEqual(small.mse, large.mse, places=12)
        np.testing.assert_allclose(small.mae_by_step, large.mae_by_step, rtol=1e-12)

    def test_wrong_prediction_shape(self) -> None:
        with self.assertRaises(ShapeError):
            score_windows(self.dataset, self.span, 24, 12, lambda batch: batch.target[:, :, :-1])


class AblationUnitTests(unittest.TestCase):
    def setUp(self) -> None:
        self.cfg = CmosConfig(L=48, H=24, S=8, K=4, c=8, N=2, pi_enabled=True, pi_period=24)

    def test_variant_configs(self) -> None:
        self.assertIs(apply_variant(self.cfg, "full"), self.cfg)
        self.assertEqual(apply_variant(self.cfg, "no_chunk").S, 1)
        self.assertEqual(apply_variant(self.cfg, "no_cormix").K, 1)
        self.assertEqual(apply_variant(self.cfg, "one_bus").K, 1)
        no_pi = apply_variant(self.cfg, "no_pi")
        self.assertFalse(no_pi.pi_enabled)
        self.assertIsNone(no_pi.pi_period)
        private = apply_variant(self.cfg, "private_line")
        self.assertEqual(private.channel_strategy, "private_line")
        self.assertEqual(private.n_matrices, 2)

    def test_variants_keep_other_fields(self) -> None:
        changed = apply_variant(self.cfg, "no_chunk")
        self.assertEqual((changed.L, changed.H, changed.K, changed.c, changed.N), (48, 24, 4, 8, 2))

    def test_unknown_variant(self) -> None:
        with self.assertRaises(ConfigError):
            apply_variant(self.cfg, "no_gate")

    def test_run_ablation_smoke(self) -> None:
        dataset = gen_sine(480, 24, n_channels=2)
        splits = split(dataset, SplitSpec.for_dataset(dataset.name), 48, 24)
        train_cfg = TrainConfig(lr0=1e-2, epochs=1, batch_size=64, seeds=(1, 2))
        for variant in ("no_chunk", "private_line"):
            summary = run_ablation(dataset, self.cfg, variant, train_cfg, splits=splits)
            self.assertEqual([run.seed for run in summary.runs], [1, 2])
            self.assertTrue(np.isfinite(summary.metrics.mse))


if __name__ == "__main__":
    unittest.main()
