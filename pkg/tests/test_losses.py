import numpy as np
import pytest

from aiqn import (DomainError, Gaussian, LossConfig, Rng, batch_quantile_loss,
                  huber_qr_loss, qr_loss, qr_loss_grad)


def test_qr_loss_hand_values():
    assert qr_loss(0.0, 0.3) == 0.0
    assert qr_loss(1.0, 0.5) == 0.5
    assert qr_loss(-1.0, 0.5) == 0.5
    assert qr_loss(-1.0, 0.9) == (0.9 - 1.0) * -1.0
    assert qr_loss(1.0, 0.9) == 0.9


def test_huber_hand_values():
    assert huber_qr_loss(0.5, 0.7, 1.0) == 0.7 * 0.25 / 2.0
    assert huber_qr_loss(-2.0, 0.7, 1.0) == pytest.approx(0.3 * (2.0 - 0.5), abs=1e-15)
    assert huber_qr_loss(0.0, 0.3, 0.5) == 0.0
    assert huber_qr_loss(0.0, 0.9, 0.002) == 0.0


def test_grad_hand_values():
    assert qr_loss_grad(1.0, 0.3, 0.0) == 0.3
    assert qr_loss_grad(0.0, 0.3, 1.0) == 0.0
    assert qr_loss_grad(-2.0, 0.7, 1.0) == pytest.approx(-0.3, abs=1e-15)
    # Pinball subgradient convention at u == 0: indicator is 1.
    assert qr_loss_grad(0.0, 0.3, 0.0) == 0.3 - 1.0


def test_nonnegative_and_zero_iff_zero_error():
    rng = Rng(11)
    u = rng.normals(1000)
    tau = rng.uniforms(1000) * 0.98 + 0.01
    vals = qr_loss(u, tau)
    assert np.all(vals >= 0)
    assert np.all(vals[np.abs(u) > 1e-12] > 0)


def test_huber_pinball_consistency_identity():
    # For |u| >= kappa the Huber loss equals pinball minus w * kappa / 2 exactly.
    rng = Rng(12)
    n = 10 ** 4
    u = rng.normals(n) * 3
    tau = rng.uniforms(n)
    kappa = rng.uniforms(n) * 0.5 + 1e-3
    big = np.abs(u) >= kappa
    w = np.abs(tau - (u <= 0))
    lhs = huber_qr_loss(u[big], tau[big], kappa[big])
    rhs = qr_loss(u[big], tau[big]) - w[big] * kappa[big] / 2.0
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_huber_converges_to_pinball():
    for u, tau in [(0.4, 0.2), (-0.7, 0.9), (1.5, 0.5)]:
        gap = abs(huber_qr_loss(u, tau, 1e-8) - qr_loss(u, tau))
        assert gap < 1e-8


def test_huber_continuity_at_kink():
    for tau in (0.1, 0.5, 0.9):
        for kappa in (0.002, 0.3, 1.0):
            for sgn in (-1, 1):
                below = huber_qr_loss(sgn * kappa * (1 - 1e-9), tau, kappa)
                above = huber_qr_loss(sgn * kappa * (1 + 1e-9), tau, kappa)
                assert abs(below - above) < 1e-8
                gb = qr_loss_grad(sgn * kappa * (1 - 1e-9), tau, kappa)
                ga = qr_loss_grad(sgn * kappa * (1 + 1e-9), tau, kappa)
                assert abs(gb - ga) < 1e-8


def test_gradient_matches_finite_differences():
    rng = Rng(13)
    checked = 0
    while checked < 100:
        u = float(rng.normals(1)[0] * 2)
        tau = 0.02 + 0.96 * rng.uniform()
        kappa = 1e-3 + rng.uniform()
        # Stay away from the kinks at u == 0 and |u| == kappa.
        if abs(u) < 1e-3 or abs(abs(u) - kappa) < 1e-3:
            continue
        h = 1e-6
        for k in (0.0, kappa):
            if k == 0.0:
                fd = (qr_loss(u + h, tau) - qr_loss(u - h, tau)) / (2 * h)
            else:
                fd = (huber_qr_loss(u + h, tau, k) - huber_qr_loss(u - h, tau, k)) / (2 * h)
            an = qr_loss_grad(u, tau, k)
            assert abs(fd - an) / max(abs(fd), abs(an), 1e-8) < 1e-8
        checked += 1


def test_empirical_median_minimizes_pinball():
    sample = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    grid = np.arange(0.0, 6.0 + 1e-9, 0.01)
    means = [np.mean(qr_loss(sample - q, 0.5)) for q in grid]
    assert grid[int(np.argmin(means))] == pytest.approx(3.0, abs=1e-12)


def test_monte_carlo_minimizer_matches_gaussian_quantile():
    # tau = 0.9 quantile of N(0,1) recovered by brute-force grid search.
    z = Rng(14).normals(10 ** 6)
    grid = np.arange(1.0, 1.6 + 1e-9, 0.005)
    means = [np.mean(qr_loss(z - q, 0.9)) for q in grid]
    q_star = grid[int(np.argmin(means))]
    assert abs(q_star - Gaussian(0, 1).quantile(0.9)) < 0.02


def test_batch_loss_and_gradient():
    cfg = LossConfig(kappa=1.0)
    pred = np.zeros((1, 1))
    target = np.full((1, 1), 0.5)
    tau = np.full((1, 1), 0.7)
    loss, grad = batch_quantile_loss(pred, target, tau, cfg)
    assert loss == pytest.approx(0.0875, abs=1e-15)
    assert grad[0, 0] == pytest.approx(-0.35, abs=1e-15)


def test_batch_loss_zero_at_optimum():
    rng = Rng(15)
    x = rng.normals((4, 3))
    tau = rng.uniforms((4, 3))
    loss, grad = batch_quantile_loss(x, x, tau, LossConfig(kappa=0.002))
    assert loss == 0.0
    np.testing.assert_array_equal(grad, np.zeros_like(grad))


def test_batch_loss_mean_reduction():
    rng = Rng(16)
    pred = rng.normals((3, 2))
    target = rng.normals((3, 2))
    tau = rng.uniforms((3, 2))
    loss1, _ = batch_quantile_loss(pred, target, tau, LossConfig(0.01))
    loss2, _ = batch_quantile_loss(np.tile(pred, (2, 1)), np.tile(target, (2, 1)),
                                   np.tile(tau, (2, 1)), LossConfig(0.01))
    assert loss1 == pytest.approx(loss2, rel=1e-12)


def test_batch_loss_validation():
    cfg = LossConfig()
    with pytest.raises(DomainError):
        batch_quantile_loss(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)), cfg)
    with pytest.raises(DomainError):
        batch_quantile_loss(np.zeros((2, 2)), np.zeros((2, 2)), np.full((2, 2), 1.5), cfg)
    with pytest.raises(DomainError):
        LossConfig(kappa=-1.0)
