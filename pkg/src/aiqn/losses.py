"""Quantile regression (pinball) and Huber quantile losses.

All functions accept floats or numpy arrays; the error u is understood as
(target - prediction), positive for underestimation.  The indicator in the
asymmetric weight treats u == 0 as "overestimation" (indicator 1), which
only affects the subgradient convention of the pure pinball loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class LossConfig:
    """kappa is the Huber threshold; kappa == 0 selects the pure pinball loss."""

    kappa: float = 0.002

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise DomainError(f"kappa must be finite and >= 0, got {self.kappa}")


def _asym_weight(u, tau):
    """|tau - indicator(u <= 0)|: underestimation weight tau, otherwise 1-tau."""
    return np.abs(tau - (np.asarray(u, dtype=np.float64) <= 0.0))


def qr_loss(u, tau):
    """Pinball loss (tau - indicator(u <= 0)) * u; nonnegative for tau in [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    value = (tau - (u <= 0.0)) * u
    return float(value) if value.ndim == 0 else value


def huber_qr_loss(u, tau, kappa):
    """Pinball loss with the kink smoothed quadratically inside |u| <= kappa."""
    if np.any(np.asarray(kappa) <= 0):
        raise DomainError("huber_qr_loss needs kappa > 0; use qr_loss for kappa == 0")
    u = np.asarray(u, dtype=np.float64)
    w = _asym_weight(u, tau)
    au = np.abs(u)
    value = np.where(au <= kappa, w * u * u / (2.0 * kappa), w * (au - 0.5 * kappa))
    return float(value) if value.ndim == 0 else value


def qr_loss_grad(u, tau, kappa=0.0):
    """d loss / d u for the pinball (kappa == 0) or Huber quantile loss."""
    u = np.asarray(u, dtype=np.float64)
    if np.all(np.asarray(kappa) == 0):
        grad = tau - (u <= 0.0) * 1.0
    else:
        w = _asym_weight(u, tau)
        grad = np.where(np.abs(u) <= kappa, w * u / kappa, w * np.sign(u))
    return float(grad) if grad.ndim == 0 else grad


def batch_quantile_loss(pred: np.ndarray, target: np.ndarray, tau: np.ndarray,
                        cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Training objective over a batch: mean over rows of the per-dimension sum.

    Returns (loss, d loss / d pred).  The mean (rather than sum) reduction
    over the batch keeps learning rates transferable across batch sizes.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if not (pred.shape == target.shape == tau.shape) or pred.ndim != 2:
        raise DomainError(
            f"batch_quantile_loss needs equal [B, n] shapes, got "
            f"{pred.shape}/{target.shape}/{tau.shape}")
    if np.any(tau < 0.0) or np.any(tau > 1.0):
        raise DomainError("tau entries must lie in [0, 1]")
    b = pred.shape[0]
    u = target - pred
    if cfg.kappa == 0.0:
        per = qr_loss(u, tau)
    else:
        per = huber_qr_loss(u, tau, cfg.kappa)
    loss = float(np.sum(per) / b)
    grad = -qr_loss_grad(u, tau, cfg.kappa) / b
    return loss, grad
