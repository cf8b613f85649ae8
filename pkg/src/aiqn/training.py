"""Optimizers, Polyak averaging, the training loop, and gradient checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TrainingError
from .losses import LossConfig
from .network import AiqnModel, TauMode, aiqn_backward
from .rng import Rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-8

OPTIMIZERS = ("adam", "rmsprop", "sgd")


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-4
    # Optional piecewise-constant schedule: lr applies before the first
    # boundary step, lr_values[i] from boundary i on.
    lr_boundaries: tuple[int, ...] = ()
    lr_values: tuple[float, ...] = ()
    kappa: float = 0.002
    batch_size: int = 64
    steps: int = 20000
    polyak: float = 0.9999
    eval_interval: int = 0
    eval_samples: int = 256
    tau_samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if not self.lr > 0:
            raise DomainError(f"learning rate must be > 0, got {self.lr}")
        if self.batch_size < 1 or self.steps < 1 or self.tau_samples < 1:
            raise DomainError("batch_size, steps and tau_samples must be >= 1")
        if not 0.0 <= self.polyak < 1.0:
            raise DomainError(f"polyak weight must lie in [0, 1), got {self.polyak}")
        if len(self.lr_boundaries) != len(self.lr_values):
            raise DomainError("lr_boundaries and lr_values must have equal length")

    def lr_at(self, step: int) -> float:
        lr = self.lr
        for boundary, value in zip(self.lr_boundaries, self.lr_values):
            if step >= boundary:
                lr = value
        return lr


@dataclass
class OptimizerState:
    """Per-parameter first/second moment accumulators plus a step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "OptimizerState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def _check_finite(grads: dict[str, np.ndarray]):
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {name!r}")


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    """Standard bias-corrected Adam update, in place."""
    _check_finite(grads)
    state.step += 1
    t = state.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return params, state


def rmsprop_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    _check_finite(grads)
    state.step += 1
    for name, p in params.items():
        g = grads[name]
        v = state.v[name]
        v *= RMSPROP_RHO
        v += (1.0 - RMSPROP_RHO) * g * g
        p -= lr * g / (np.sqrt(v) + RMSPROP_EPS)
    return params, state


def sgd_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    _check_finite(grads)
    state.step += 1
    for name, p in params.items():
        p -= lr * grads[name]
    return params, state


_STEP_FNS = {"adam": adam_step, "rmsprop": rmsprop_step, "sgd": sgd_step}


def polyak_update(avg: dict, params: dict, w: float):
    """avg <- w * avg + (1 - w) * params, elementwise in place."""
    if not 0.0 <= w < 1.0:
        raise DomainError(f"polyak weight must lie in [0, 1), got {w}")
    for name, p in params.items():
        a = avg[name]
        a *= w
        a += (1.0 - w) * p
    return avg


@dataclass
class MetricsRow:
    step: int
    loss: float
    metric_name: str = ""
    metric_value: float | None = None

    def as_csv(self) -> str:
        value = "" if self.metric_value is None else repr(float(self.metric_value))
        return f"{self.step},{repr(float(self.loss))},{self.metric_name},{value}"


def train(model: AiqnModel, dataset: np.ndarray, cfg: TrainConfig,
          context: np.ndarray | None = None):
    """Run quantile-regression training and return (Checkpoint, metrics log).

    Per step: a with-replacement minibatch, fresh uniform quantile levels per
    (example, dimension) -- or per example in shared-tau mode -- one
    backward pass, one optimizer step, one Polyak update.  Evaluation and
    sampling downstream always read the Polyak average.  A non-finite loss
    aborts with the last finite parameters attached to the error.
    """
    from .checkpoint import Checkpoint  # deferred: checkpoint imports training types
    from .sampling import eval_w1_mean

    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise DomainError(f"dataset must be a nonempty [m, n] array, got shape {dataset.shape}")
    if dataset.shape[1] != model.n:
        raise DomainError(f"dataset dimension {dataset.shape[1]} != model dimension {model.n}")
    m = dataset.shape[0]

    root = Rng(cfg.seed)
    idx_stream, tau_stream, eval_stream = root.split(3)
    params = model.params
    avg = model.clone_params()
    state = OptimizerState.zeros_like(params)
    loss_cfg = LossConfig(kappa=cfg.kappa)
    log: list[MetricsRow] = []

    def snapshot(step: int) -> Checkpoint:
        return Checkpoint.from_training(model, avg, state, cfg, step)

    for step in range(1, cfg.steps + 1):
        idx = idx_stream.integers(cfg.batch_size, m)
        xb = dataset[idx]
        ctx_b = context[idx] if context is not None else None
        if cfg.tau_samples > 1:
            xb = np.tile(xb, (cfg.tau_samples, 1))
            if ctx_b is not None:
                ctx_b = np.tile(ctx_b, (cfg.tau_samples, 1))
        rows = xb.shape[0]
        if model.tau_mode is TauMode.SHARED:
            tau = np.broadcast_to(tau_stream.uniforms((rows, 1)), (rows, model.n)).copy()
        else:
            tau = tau_stream.uniforms((rows, model.n))

        try:
            loss, grads = aiqn_backward(model, xb, tau, xb, loss_cfg, ctx=ctx_b)
        except DomainError as exc:
            raise TrainingError(f"forward/backward failed at step {step}: {exc}",
                                last_good=snapshot(step - 1), step=step) from exc
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}",
                                last_good=snapshot(step - 1), step=step)
        try:
            _STEP_FNS[cfg.optimizer](params, grads, state, cfg.lr_at(step))
        except TrainingError as exc:
            raise TrainingError(f"{exc} at step {step}",
                                last_good=snapshot(step - 1), step=step) from exc
        polyak_update(avg, params, cfg.polyak)

        log.append(MetricsRow(step=step, loss=loss))
        if cfg.eval_interval and step % cfg.eval_interval == 0:
            w1 = eval_w1_mean(model, dataset, avg, eval_stream, cfg.eval_samples)
            log.append(MetricsRow(step=step, loss=loss,
                                  metric_name="w1_mean", metric_value=w1))

    return snapshot(cfg.steps), log


def grad_check(model: AiqnModel, batch, eps: float = 1e-5, max_params: int = 200,
               seed: int = 0, corrupt=None,
               loss_cfg: LossConfig | None = None) -> tuple[float, str]:
    """Max relative error between analytic and central-FD gradients.

    Checks every parameter entry for small models, or a seeded random subset
    of max_params entries for large ones.  The default loss uses a wide
    Huber region so FD probes never straddle a kink.  `corrupt=(name,
    flat_index, delta)` perturbs one analytic gradient entry, for validating
    that the check localizes faults.  Returns (max relative error, worst
    address).
    """
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    x, tau, target, ctx = batch
    cfg = LossConfig(kappa=0.1) if loss_cfg is None else loss_cfg
    _, grads = aiqn_backward(model, x, tau, target, cfg, ctx=ctx)
    if corrupt is not None:
        name, idx, delta = corrupt
        grads[name].ravel()[idx] += delta

    addresses = [(name, idx) for name, p in model.params.items()
                 for idx in range(p.size)]
    if len(addresses) > max_params:
        rng = Rng(seed)
        pick = rng.uniforms(len(addresses)).argsort()[:max_params]
        addresses = [addresses[i] for i in sorted(pick)]
    if corrupt is not None and (corrupt[0], corrupt[1]) not in addresses:
        addresses.append((corrupt[0], corrupt[1]))

    worst, worst_addr = 0.0, ""
    for name, idx in addresses:
        flat = model.params[name].ravel()
        orig = flat[idx]
        flat[idx] = orig + eps
        lp, _ = aiqn_backward(model, x, tau, target, cfg, ctx=ctx)
        flat[idx] = orig - eps
        lm, _ = aiqn_backward(model, x, tau, target, cfg, ctx=ctx)
        flat[idx] = orig
        fd = (lp - lm) / (2 * eps)
        an = grads[name].ravel()[idx]
        # The 1e-5 floor keeps FD roundoff on near-zero gradients (about
        # eps_machine * loss / eps in absolute terms) below the tolerance.
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-5)
        if rel > worst:
            worst, worst_addr = float(rel), f"{name}[{idx}]"
    return worst, worst_addr


def make_gradcheck_batch(model: AiqnModel, batch_size: int = 4, seed: int = 123):
    """Synthetic batch with quantile levels away from 0/1."""
    rng = Rng(seed)
    x = rng.normals((batch_size, model.n)) * 0.5
    tau = rng.uniforms((batch_size, model.n)) * 0.9 + 0.05
    target = rng.normals((batch_size, model.n)) * 0.5
    ctx = rng.normals((batch_size, model.context_width)) if model.context_width else None
    return x, tau, target, ctx
