from __future__ import annotations

import unittest

import numpy as np

from cmos_forecast.gradcheck import (
    compare_gradients,
    numerical_grad,
    perturb,
    random_batch,
    random_tiny_config,
    run_gradcheck,
)
from cmos_forecast.model import forward, init_params, loss_and_grad
from cmos_forecast.models import CmosConfig, WindowBatch


class LossAndGradUnitTests(unittest.TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(21)

    def test_perfect_prediction_has_zero_loss_and_gradient(self) -> None:
        cfg = CmosConfig(L=8, H=4, S=2, K=2, c=4, N=2)
        params = init_params(cfg, seed=1)
        lookback = self.rng.standard_normal((3, 2, 8))
        pred, _ = forward(lookback, params, cfg)
        batch = WindowBatch(lookback=lookback, target=pred, origin_indices=np.arange(3))
        loss, grads = loss_and_grad(batch, params, cfg)
        self.assertEqual(loss, 0.0)
        for name, grad in grads.items():
            np.testing.assert_array_equal(grad, np.zeros_like(grad), err_msg=name)

    def test_mixing_gradients_match_finite_differences(self) -> None:
        cfg = CmosConfig(L=8, H=4, S=2, K=3, c=4, N=2)
        params = perturb(init_params(cfg, seed=2), self.rng)
        err, name = compare_gradients(random_batch(cfg, self.rng, size=3), params, cfg)
        self.assertLess(err, 1e-4, msg=f"worst parameter {name}")

    def test_private_line_gradients_match_finite_differences(self) -> None:
        cfg = CmosConfig(L=8, H=4, S=2, K=1, c=2, N=3, channel_strategy="private_line")
        params = perturb(init_params(cfg, seed=3), self.rng)
        batch = random_batch(cfg, self.rng)
        err, name = compare_gradients(batch, params, cfg)
        self.assertLess(err, 1e-4, msg=f"worst parameter {name}")
        _, grads = loss_and_grad(batch, params, cfg)
        self.assertEqual(grads.kernels.size, 0)
        self.assertEqual(grads.allocator.size, 0)

    def test_point_wise_layout_gradients(self) -> None:
        cfg = CmosConfig(L=6, H=3, S=1, K=2, c=2, N=1)
        params = perturb(init_params(cfg, seed=4), self.rng)
        err, _ = compare_gradients(random_batch(cfg, self.rng), params, cfg)
        self.assertLess(err, 1e-4)

    def test_numerical_grad_keeps_parameter_shapes(self) -> None:
        cfg = CmosConfig(L=4, H=2, S=2, K=2, c=2, N=1)
        params = init_params(cfg, seed=0)
        numeric = numerical_grad(random_batch(cfg, self.rng), params, cfg)
        for (name, a), (_, b) in zip(params.items(), numeric.items()):
            self.assertEqual(a.shape, b.shape, msg=name)

    def test_duplicated_batch_gives_same_gradient(self) -> None:
        cfg = CmosConfig(L=8, H=4, S=2, K=2, c=2, N=2)
        params = perturb(init_params(cfg, seed=5), self.rng)
        batch = random_batch(cfg, self.rng, size=2)
        doubled = WindowBatch(
            lookback=np.concatenate([batch.lookback, batch.lookback]),
            target=np.concatenate([batch.target, batch.target]),
            origin_indices=np.arange(4),
        )
        loss, grads = loss_and_grad(batch, params, cfg)
        loss2, grads2 = loss_and_grad(doubled, params, cfg)
        self.assertAlmostEqual(loss, loss2, places=12)
        for (name, a), (_, b) in zip(grads.items(), grads2.items()):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14, err_msg=name)

    def test_random_tiny_configs_are_valid(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(200):
            cfg = random_tiny_config(rng)
            self.assertEqual(cfg.L % cfg.S, 0)
            self.assertEqual(cfg.H % cfg.S, 0)
            self.assertLessEqual(cfg.c, cfg.L)


class GradCheckSuiteUnitTests(unittest.TestCase):
    def test_hundred_random_instances_pass(self) -> None:
        report = run_gradcheck(instances=100, seed=0)
        self.assertTrue(report.passed, msg=str(report.to_dict()))
        self.assertEqual(report.instances, 100)
        self.assertLess(report.max_rel_error, 1e-4)

    def test_report_serializes_pass_flag(self) -> None:
        payload = run_gradcheck(instances=2, seed=9).to_dict()
        self.assertIn("passed", payload)
        self.assertEqual(payload["instances"], 2)


if __name__ == "__main__":
    unittest.main()
