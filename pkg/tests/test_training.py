import numpy as np
import pytest

from aiqn import DomainError, Gaussian, Rng, TrainingError, create_model
from aiqn.training import (OptimizerState, TrainConfig, adam_step, grad_check,
                           make_gradcheck_batch, polyak_update, rmsprop_step,
                           sgd_step, train)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = {"w": np.array([1.0, -2.0])}
        state = OptimizerState.zeros_like(params)
        adam_step(params, {"w": np.zeros(2)}, state, 0.1)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_first_step_is_signed_lr(self):
        # Hand evaluation at t=1: m_hat = g, v_hat = g^2, step = lr * sign(g).
        params = {"w": np.array([0.0])}
        state = OptimizerState.zeros_like(params)
        adam_step(params, {"w": np.array([1.0])}, state, 0.1)
        assert params["w"][0] == pytest.approx(-0.1, rel=1e-6)

    def test_deterministic(self):
        def run():
            params = {"w": np.linspace(-1, 1, 5)}
            state = OptimizerState.zeros_like(params)
            for i in range(10):
                adam_step(params, {"w": np.sin(np.arange(5) + i)}, state, 0.01)
            return params["w"].copy()

        np.testing.assert_array_equal(run(), run())

    def test_nan_gradient_aborts(self):
        params = {"w": np.zeros(2)}
        state = OptimizerState.zeros_like(params)
        with pytest.raises(TrainingError):
            adam_step(params, {"w": np.array([1.0, np.nan])}, state, 0.1)


def test_rmsprop_and_sgd_move_downhill():
    for step_fn in (rmsprop_step, sgd_step):
        params = {"w": np.array([1.0])}
        state = OptimizerState.zeros_like(params)
        step_fn(params, {"w": np.array([2.0])}, state, 0.01)
        assert params["w"][0] < 1.0


class TestPolyak:
    def test_w_zero_copies_params(self):
        avg = polyak_update({"w": np.array([5.0])}, {"w": np.array([2.0])}, 0.0)
        assert avg["w"][0] == 2.0

    def test_fixed_point(self):
        p = {"w": np.array([3.0])}
        avg = polyak_update({"w": np.array([3.0])}, p, 0.9)
        assert avg["w"][0] == 3.0

    def test_halfway(self):
        avg = polyak_update({"w": np.array([0.0])}, {"w": np.array([2.0])}, 0.5)
        assert avg["w"][0] == 1.0

    def test_geometric_convergence_to_frozen_params(self):
        w = 0.9
        avg = {"w": np.array([0.0])}
        p = {"w": np.array([1.0])}
        gap0 = 1.0
        for k in range(1, 50):
            polyak_update(avg, p, w)
            gap = abs(avg["w"][0] - 1.0)
            assert gap <= gap0 * w ** k * (1 + 1e-12)

    def test_validates_weight(self):
        with pytest.raises(DomainError):
            polyak_update({"w": np.zeros(1)}, {"w": np.zeros(1)}, 1.0)


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            TrainConfig(steps=0)
        with pytest.raises(DomainError):
            TrainConfig(optimizer="adagrad")
        with pytest.raises(DomainError):
            TrainConfig(lr=0.0)
        with pytest.raises(DomainError):
            TrainConfig(polyak=1.0)

    def test_lr_schedule(self):
        cfg = TrainConfig(lr=1e-4, lr_boundaries=(100, 200), lr_values=(3e-5, 1e-5))
        assert cfg.lr_at(1) == 1e-4
        assert cfg.lr_at(100) == 3e-5
        assert cfg.lr_at(199) == 3e-5
        assert cfg.lr_at(500) == 1e-5


class TestTrainLoop:
    def _quick(self, seed=0, steps=300, **kwargs):
        model = create_model(1, [16, 16], head_width=16, seed=7)
        data = Gaussian(0, 1).sample(Rng(1), 512).reshape(-1, 1)
        cfg = TrainConfig(lr=1e-3, batch_size=32, steps=steps, polyak=0.99,
                          seed=seed, **kwargs)
        return train(model, data, cfg)

    def test_runs_and_learns(self):
        ckpt, log = self._quick(steps=600)
        losses = [row.loss for row in log if row.metric_name == ""]
        assert len(losses) == 600
        assert np.mean(losses[-100:]) < np.mean(losses[:100])

    def test_metrics_log_deterministic(self):
        _, log1 = self._quick(seed=3)
        _, log2 = self._quick(seed=3)
        assert [r.as_csv() for r in log1] == [r.as_csv() for r in log2]

    def test_different_seed_differs(self):
        _, log1 = self._quick(seed=3)
        _, log2 = self._quick(seed=4)
        assert [r.as_csv() for r in log1] != [r.as_csv() for r in log2]

    def test_eval_rows_present(self):
        _, log = self._quick(steps=200, eval_interval=100, eval_samples=64)
        evals = [r for r in log if r.metric_name == "w1_mean"]
        assert [r.step for r in evals] == [100, 200]
        assert all(r.metric_value is not None for r in evals)

    def test_rejects_dimension_mismatch(self):
        model = create_model(2, [8], seed=1)
        with pytest.raises(DomainError):
            train(model, np.zeros((10, 3)), TrainConfig(steps=1))

    def test_rejects_empty_dataset(self):
        model = create_model(1, [8], seed=1)
        with pytest.raises(DomainError):
            train(model, np.zeros((0, 1)), TrainConfig(steps=1))

    def test_nan_aborts_with_last_good(self):
        model = create_model(1, seed=2)
        data = np.ones((32, 1))
        # An absurd learning rate overflows the readout sum within a few steps.
        cfg = TrainConfig(lr=5e307, optimizer="sgd", batch_size=8, steps=100,
                          polyak=0.9, kappa=0.0, seed=0)
        with pytest.raises(TrainingError) as exc:
            train(model, data, cfg)
        assert exc.value.last_good is not None
        for p in exc.value.last_good.params.values():
            assert np.all(np.isfinite(p))

    def test_shared_tau_training_runs(self):
        from aiqn import TauMode
        model = create_model(2, [8], seed=5, tau_mode=TauMode.SHARED)
        data = Rng(6).normals((64, 2))
        ckpt, log = train(model, data, TrainConfig(steps=20, batch_size=8, seed=1,
                                                   polyak=0.9))
        assert len(log) == 20

    def test_loss_trend_nonincreasing_in_windows(self):
        # Smoothed training loss over 500-step windows should trend down
        # within a 10% noise margin on the scalar Gaussian task.
        model = create_model(1, [64, 64], seed=11)
        data = Gaussian(3, 2).sample(Rng(12), 4096).reshape(-1, 1)
        cfg = TrainConfig(lr=1e-3, batch_size=64, steps=5000, polyak=0.999, seed=13)
        _, log = train(model, data, cfg)
        losses = np.array([r.loss for r in log if r.metric_name == ""])
        windows = losses.reshape(10, 500).mean(axis=1)
        for a, b in zip(windows, windows[1:]):
            assert b <= a * 1.10


class TestGradCheck:
    def test_small_model_tight(self):
        model = create_model(2, [8], head_width=6, seed=21)
        err, addr = grad_check(model, make_gradcheck_batch(model, 3, seed=22))
        assert err <= 1e-5, addr

    def test_quadratic_branch_readout_is_exact(self):
        # The loss is exactly quadratic in the readout parameters when every
        # error stays inside the Huber region, so central differences carry
        # no truncation error there.
        from aiqn import LossConfig, aiqn_backward, aiqn_forward

        model = create_model(2, [8], head_width=6, seed=40)
        rng = Rng(41)
        x = rng.normals((3, 2))
        tau = rng.uniforms((3, 2)) * 0.9 + 0.05
        target = aiqn_forward(model, x, tau) + 0.01  # |u| well inside kappa
        cfg = LossConfig(kappa=1.0)
        _, grads = aiqn_backward(model, x, tau, target, cfg)
        h = 1e-5
        for name in ("out.w", "out.b"):
            flat = model.params[name].ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + h
                lp, _ = aiqn_backward(model, x, tau, target, cfg)
                flat[idx] = orig - h
                lm, _ = aiqn_backward(model, x, tau, target, cfg)
                flat[idx] = orig
                fd = (lp - lm) / (2 * h)
                an = grads[name].ravel()[idx]
                assert abs(fd - an) / max(abs(fd), abs(an), 1e-5) <= 1e-7

    def test_default_architecture_small(self):
        model = create_model(4, seed=23)  # default [64, 64]
        err, _ = grad_check(model, make_gradcheck_batch(model, 4, seed=24))
        assert err <= 1e-4

    def test_corruption_is_localized(self):
        model = create_model(2, [6], head_width=4, seed=25)
        batch = make_gradcheck_batch(model, 3, seed=26)
        err, addr = grad_check(model, batch, corrupt=("trunk0.bf", 2, 1e-2))
        assert err > 1e-3
        assert addr == "trunk0.bf[2]"

    def test_subset_selection_on_large_model(self):
        model = create_model(8, [32, 32], seed=27)
        total = model.param_count()
        assert total > 200
        err, _ = grad_check(model, make_gradcheck_batch(model, 2, seed=28),
                            max_params=50)
        assert err <= 1e-4
