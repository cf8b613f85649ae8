"""Autoregressive generation, inpainting, and model-vs-data metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import AnalyticDist
from .divergences import (QuantileFn, frechet_distance, moment_summary,
                          quantile_divergence, wasserstein1_empirical)
from .errors import DomainError
from .network import AiqnModel, TauMode, aiqn_forward, dquantile_dtau
from .rng import Rng


@dataclass
class SampleRequest:
    count: int
    seed: int = 0
    tau_mode_override: TauMode | None = None
    context: np.ndarray | None = None
    clamp: tuple[float, float] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise DomainError(f"count must be >= 1, got {self.count}")


@dataclass
class InpaintRequest:
    """Prefix values cover the first k positions in the model's ordering
    (a contiguous prefix; raster-scan top rows for images)."""

    prefix: np.ndarray
    count: int
    seed: int = 0

    def __post_init__(self):
        self.prefix = np.asarray(self.prefix, dtype=np.float64).ravel()
        if self.count < 1:
            raise DomainError(f"count must be >= 1, got {self.count}")


def _draw_taus(model: AiqnModel, count: int, seed: int, mode: TauMode) -> np.ndarray:
    """One tau row per sample from that sample's own split stream, so samples
    are reproducible independently of batch layout."""
    streams = Rng(seed).split(count)
    tau = np.empty((count, model.n))
    if mode is TauMode.SHARED:
        for i, stream in enumerate(streams):
            tau[i, :] = stream.uniform()
    else:
        for i, stream in enumerate(streams):
            tau[i, :] = stream.uniforms(model.n)
    return tau


def _autoregressive_fill(model: AiqnModel, x: np.ndarray, tau: np.ndarray,
                         start_rank: int, ctx, clamp, params) -> np.ndarray:
    """Fill positions of rank > start_rank in ordering, one forward pass per
    dimension, each reading only already-filled positions."""
    for r in range(start_rank, model.n):
        pos = int(model.ordering[r])
        out = aiqn_forward(model, x, tau, ctx=ctx, params=params)
        values = out[:, pos]
        if clamp is not None:
            values = np.clip(values, clamp[0], clamp[1])
        x[:, pos] = values
    return x


def sample(model: AiqnModel, req: SampleRequest,
           params: dict | None = None) -> np.ndarray:
    """Generate req.count samples by the autoregressive recursion.

    Raw outputs are unclamped unless the request sets a range, so metrics
    see the model's true output law.
    """
    mode = req.tau_mode_override or model.tau_mode
    tau = _draw_taus(model, req.count, req.seed, mode)
    if model.tau_mode is TauMode.SHARED and mode is TauMode.PER_DIMENSION:
        raise DomainError("cannot override a shared-tau model to per-dimension")
    ctx = None
    if req.context is not None:
        ctx = np.tile(np.asarray(req.context, dtype=np.float64).ravel(),
                      (req.count, 1))
    x = np.zeros((req.count, model.n))
    return _autoregressive_fill(model, x, tau, 0, ctx, req.clamp, params)


def inpaint(model: AiqnModel, req: InpaintRequest,
            params: dict | None = None) -> np.ndarray:
    """Complete samples whose first k ordering positions are fixed verbatim.

    Every completion draws fresh quantile levels for the free positions.
    """
    k = req.prefix.size
    if not 1 <= k <= model.n - 1:
        raise DomainError(f"prefix length must lie in [1, {model.n - 1}], got {k}")
    tau = _draw_taus(model, req.count, req.seed, model.tau_mode)
    x = np.zeros((req.count, model.n))
    x[:, model.ordering[:k]] = req.prefix[None, :]
    return _autoregressive_fill(model, x, tau, k, None, None, params)


def eval_w1_mean(model: AiqnModel, data: np.ndarray, params: dict,
                 rng: Rng, count: int) -> float:
    """Mean over dimensions of the empirical W1 between fresh model samples
    and a data subsample of equal size (the training-loop eval metric)."""
    count = min(count, data.shape[0])
    sample_seed = int(rng.uniforms(1)[0] * 2 ** 53)
    samples = sample(model, SampleRequest(count=count, seed=sample_seed), params=params)
    idx = rng.integers(count, data.shape[0])
    sub = data[idx]
    return float(np.mean([wasserstein1_empirical(samples[:, j], sub[:, j])
                          for j in range(model.n)]))


def split_half_noise_floor(data: np.ndarray, rng: Rng, repeats: int = 8,
                           metric: str = "w1") -> float:
    """Mean metric value between random half-splits of the data: the
    resolution limit below which model-vs-data differences are noise."""
    data = np.asarray(data, dtype=np.float64)
    m = data.shape[0] // 2
    if m < 1:
        raise DomainError("need at least 2 rows for a split-half floor")
    values = []
    for _ in range(repeats):
        perm = np.argsort(rng.uniforms(data.shape[0]))
        a, b = data[perm[:m]], data[perm[m:2 * m]]
        if metric == "w1":
            values.append(np.mean([wasserstein1_empirical(a[:, j], b[:, j])
                                   for j in range(data.shape[1])]))
        elif metric == "frechet":
            values.append(frechet_distance(moment_summary(a), moment_summary(b)))
        else:
            raise DomainError(f"unknown noise-floor metric {metric!r}")
    return float(np.mean(values))


@dataclass
class MetricRow:
    metric: str
    value: float
    samples: int
    seed: int

    def as_csv(self) -> str:
        return f"{self.metric},{repr(float(self.value))},{self.samples},{self.seed}"


def model_marginal_quantile_fn(model: AiqnModel, params: dict | None,
                               samples: np.ndarray, dim: int) -> QuantileFn:
    """Marginal quantile map for one dimension.

    The first dimension in the ordering is unconditional, so its quantile
    function is the model map itself; later dimensions fall back to the
    empirical quantile of generated samples.
    """
    if int(model.masks.input_ranks[dim]) == 1:
        def fn(tau: float) -> float:
            x = np.zeros((1, model.n))
            t = np.full((1, model.n), 0.5)
            t[0, dim] = tau
            return float(aiqn_forward(model, x, t, params=params)[0, dim])

        return QuantileFn(fn)
    return QuantileFn.from_samples(samples[:, dim])


def eval_suite(model: AiqnModel, data: np.ndarray,
               feature_map=None, analytic: list[AnalyticDist] | None = None,
               seed: int = 0, sample_count: int | None = None,
               params: dict | None = None,
               qdiv_tol: float = 1e-6) -> list[MetricRow]:
    """Model-vs-data metric table.

    Per-dimension empirical W1 on equal subsample sizes, Frechet distance on
    raw vectors (or on feature_map outputs), and, when analytic marginals
    are supplied, the per-marginal quantile divergence of the learned
    quantile map against each.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 100:
        raise DomainError(f"eval needs a [m >= 100, n] dataset, got shape {data.shape}")
    if data.shape[1] != model.n:
        raise DomainError(f"dataset dimension {data.shape[1]} != model dimension {model.n}")
    m = data.shape[0]
    s = min(m, 10000) if sample_count is None else min(sample_count, m)

    samples = sample(model, SampleRequest(count=s, seed=seed), params=params)
    sub = data
    if m > s:
        idx_rng = Rng(seed).split(2)[1]
        sub = data[np.argsort(idx_rng.uniforms(m))[:s]]

    rows = []
    w1s = [wasserstein1_empirical(samples[:, j], sub[:, j]) for j in range(model.n)]
    for j, w in enumerate(w1s):
        rows.append(MetricRow(f"w1_dim{j}", w, s, seed))
    rows.append(MetricRow("w1_mean", float(np.mean(w1s)), s, seed))

    if feature_map is not None:
        fa, fb = feature_map(samples), feature_map(sub)
        rows.append(MetricRow("frechet_feature",
                              frechet_distance(moment_summary(fa), moment_summary(fb)),
                              s, seed))
    rows.append(MetricRow("frechet_raw",
                          frechet_distance(moment_summary(samples), moment_summary(sub)),
                          s, seed))

    if analytic is not None:
        if len(analytic) != model.n:
            raise DomainError(f"need one analytic marginal per dimension, got {len(analytic)}")
        for j, dist in enumerate(analytic):
            qfn = model_marginal_quantile_fn(model, params, samples, j)
            rows.append(MetricRow(f"qdiv_dim{j}",
                                  quantile_divergence(dist, qfn, qdiv_tol), s, seed))
    return rows


def quantile_density_report(model: AiqnModel, x_prefix: np.ndarray,
                            tau_grid: np.ndarray, dim: int,
                            params: dict | None = None,
                            fd_h: float = 1e-4) -> list[dict]:
    """Rows of (tau, exact derivative, finite difference, implied density).

    The exact column comes from the analytic tau-derivative; the finite
    difference recomputes it from two forward passes with h shrunk near the
    interval ends; the implied density is the reciprocal where the
    derivative exceeds 1e-8 (None marks it unavailable).
    """
    tau_grid = np.asarray(tau_grid, dtype=np.float64).ravel()
    if np.any(tau_grid <= 0.0) or np.any(tau_grid >= 1.0):
        raise DomainError("tau grid must lie strictly inside (0, 1)")
    if not 0 <= dim < model.n:
        raise DomainError(f"dim must lie in [0, {model.n - 1}], got {dim}")
    x_prefix = np.asarray(x_prefix, dtype=np.float64).ravel()
    x_row = np.zeros(model.n)
    x_row[model.ordering[:x_prefix.size]] = x_prefix

    t = tau_grid.size
    x = np.tile(x_row, (t, 1))
    tau = np.full((t, model.n), 0.5)
    tau[:, dim] = tau_grid
    exact = dquantile_dtau(model, x, tau, dim, params=params)

    # Shared-tau models broadcast column 0, so perturb the column the
    # forward pass actually reads.
    fd_col = 0 if model.tau_mode is TauMode.SHARED else dim
    h = np.minimum(fd_h, np.minimum(tau_grid, 1.0 - tau_grid) / 2.0)
    tp, tm = tau.copy(), tau.copy()
    tp[:, fd_col] = tau_grid + h
    tm[:, fd_col] = tau_grid - h
    fd = (aiqn_forward(model, x, tp, params=params)[:, dim]
          - aiqn_forward(model, x, tm, params=params)[:, dim]) / (2 * h)

    rows = []
    for i, tau_i in enumerate(tau_grid):
        density = 1.0 / exact[i] if exact[i] > 1e-8 else None
        rows.append({"tau": float(tau_i), "exact": float(exact[i]),
                     "finite_difference": float(fd[i]), "implied_density": density})
    return rows
