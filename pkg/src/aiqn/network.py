"""Masked autoregressive quantile networks.

The model maps (partial sample x, quantile levels tau, optional context) to
per-dimension conditional quantile estimates.  It has two wiring systems:

* an x-trunk of gated blocks whose affine maps carry degree masks, so sample
  information flows only from lower-ranked to higher-ranked dimensions under
  the configured ordering;
* a per-position head per block: a gated unit that reads the trunk through
  the degree-masked output rule, plus weight-shared projections of the
  rescaled quantile level (2*tau - 1) and of the context vector.  The
  quantile projection is applied with position i's level when computing
  output i and nowhere else, so d out_i / d tau_j == 0 for j != i.

The head channel is what lets the first dimension in the ordering (which by
construction sees no sample input at all) still realize a deep, nonlinear
quantile function of its own tau.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .losses import LossConfig, batch_quantile_loss
from .rng import Rng


class TauMode(str, enum.Enum):
    """`shared` uses one tau for every output (comonotonic coupling);
    `per-dimension` draws an independent tau per output."""

    PER_DIMENSION = "per-dimension"
    SHARED = "shared"


@dataclass
class MaskSet:
    """Connectivity masks for one architecture.

    input_ranks[j] is the 1-based rank of input j under the ordering.
    hidden_degrees[k][u] is the degree of unit u in trunk layer k.
    hidden_masks[k] has shape [fan_in, H_k] and gates the trunk affines;
    out_masks[k] has shape [H_k, n] and gates what position i's head may
    read from trunk layer k (units of degree < rank(i) only).
    """

    input_ranks: np.ndarray
    hidden_degrees: list[np.ndarray]
    hidden_masks: list[np.ndarray]
    out_masks: list[np.ndarray]


def build_masks(n: int, hidden_sizes: list[int], ordering: np.ndarray,
                rng: Rng) -> MaskSet:
    """Draw degree-based autoregressive masks.

    Hidden degrees are uniform over {1, ..., max(1, n-1)}.  Input j connects
    to a unit iff the unit's degree >= rank(j); unit-to-unit connections
    require nondecreasing degree; position i may read units of degree
    < rank(i).  With n == 1 the single output is unconditional, so every
    sample-side mask is zero.
    """
    if n < 1 or any(h < 1 for h in hidden_sizes):
        raise DomainError(f"need n >= 1 and hidden sizes >= 1, got n={n}, {hidden_sizes}")
    ordering = np.asarray(ordering, dtype=np.int64)
    if sorted(ordering.tolist()) != list(range(n)):
        raise DomainError(f"ordering must be a permutation of 0..{n - 1}, got {ordering}")
    max_deg = max(1, n - 1)
    degrees = [1 + rng.integers(h, max_deg) for h in hidden_sizes]
    return masks_from_degrees(n, ordering, degrees)


def masks_from_degrees(n: int, ordering: np.ndarray, degrees: list[np.ndarray],
                       autoregressive: bool = True) -> MaskSet:
    """Rebuild a MaskSet from stored hidden degrees (checkpoint loading)."""
    ordering = np.asarray(ordering, dtype=np.int64)
    ranks = np.empty(n, dtype=np.int64)
    ranks[ordering] = np.arange(1, n + 1)
    degrees = [np.asarray(d, dtype=np.int64) for d in degrees]
    hidden_masks, out_masks = [], []
    prev = ranks
    for deg in degrees:
        hidden_masks.append((deg[None, :] >= prev[:, None]).astype(np.float64))
        out_masks.append((deg[:, None] < ranks[None, :]).astype(np.float64))
        prev = deg
    if n == 1 or not autoregressive:
        hidden_masks = [np.zeros_like(m) for m in hidden_masks]
        out_masks = [np.zeros_like(m) for m in out_masks]
    return MaskSet(input_ranks=ranks, hidden_degrees=degrees,
                   hidden_masks=hidden_masks, out_masks=out_masks)


def default_hidden_sizes(n: int) -> list[int]:
    """2 gated blocks of width 64 up to n == 16, 3 of width 256 beyond."""
    return [64, 64] if n <= 16 else [256, 256, 256]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic; overwrites its input buffer."""
    e = np.exp(-np.abs(z))
    num = np.where(z >= 0.0, 1.0, e)
    e += 1.0
    np.divide(num, e, out=z)
    return z


def _glorot(rng: Rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return (rng.uniforms(shape) * 2.0 - 1.0) * limit


@dataclass
class AiqnModel:
    """Parameters plus masks for one quantile network.

    Value-object semantics: forward/backward never mutate the model; the
    training loop replaces parameter arrays through the optimizer.
    """

    n: int
    ordering: np.ndarray
    hidden_sizes: list[int]
    head_width: int
    context_width: int
    tau_mode: TauMode
    autoregressive: bool
    masks: MaskSet
    params: dict[str, np.ndarray]
    # Per trunk layer: unit indices grouped by degree value, ascending, for
    # the cumulative-by-degree evaluation of the head reads.
    _degree_segments: list[list[np.ndarray]] = field(default_factory=list)
    _rank_to_position: np.ndarray | None = None

    def __post_init__(self):
        if not self._degree_segments:
            if self.autoregressive:
                self._degree_segments = [
                    [np.flatnonzero(deg == m) for m in range(1, self.n)]
                    for deg in self.masks.hidden_degrees
                ]
            else:
                # No sample-side wiring at all: head reads are empty too.
                self._degree_segments = [[] for _ in self.masks.hidden_degrees]
        if self._rank_to_position is None:
            self._rank_to_position = np.asarray(self.ordering, dtype=np.int64)

    @property
    def num_blocks(self) -> int:
        return len(self.hidden_sizes)

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def create_model(n: int, hidden_sizes: list[int] | None = None,
                 head_width: int | None = None,
                 ordering: np.ndarray | None = None,
                 tau_mode: TauMode = TauMode.PER_DIMENSION,
                 autoregressive: bool = True,
                 context_width: int = 0,
                 seed: int = 0) -> AiqnModel:
    """Build a model with Glorot-uniform weights on unmasked entries and zero
    biases.  Masked entries are fixed at zero from initialization on."""
    if hidden_sizes is None:
        hidden_sizes = default_hidden_sizes(n)
    if head_width is None:
        head_width = hidden_sizes[-1]
    if ordering is None:
        ordering = np.arange(n)
    ordering = np.asarray(ordering, dtype=np.int64)
    if head_width < 1 or context_width < 0:
        raise DomainError(f"bad head width {head_width} or context width {context_width}")
    rng = Rng(seed)
    mask_rng, init_rng = rng.split(2)
    masks = build_masks(n, hidden_sizes, ordering, mask_rng)
    if not autoregressive:
        masks = masks_from_degrees(n, ordering, masks.hidden_degrees, autoregressive=False)

    d, c = head_width, context_width
    params: dict[str, np.ndarray] = {}
    fan_prev = n
    for k, h in enumerate(hidden_sizes):
        m = masks.hidden_masks[k]
        params[f"trunk{k}.wf"] = _glorot(init_rng, fan_prev, h, (fan_prev, h)) * m
        params[f"trunk{k}.wg"] = _glorot(init_rng, fan_prev, h, (fan_prev, h)) * m
        params[f"trunk{k}.bf"] = np.zeros(h)
        params[f"trunk{k}.bg"] = np.zeros(h)
        params[f"head{k}.pf"] = _glorot(init_rng, h, d, (h, d))
        params[f"head{k}.pg"] = _glorot(init_rng, h, d, (h, d))
        params[f"head{k}.tf"] = _glorot(init_rng, 1, d, (d,))
        params[f"head{k}.tg"] = _glorot(init_rng, 1, d, (d,))
        if c:
            params[f"head{k}.cf"] = _glorot(init_rng, c, d, (c, d))
            params[f"head{k}.cg"] = _glorot(init_rng, c, d, (c, d))
        params[f"head{k}.bf"] = np.zeros(d)
        params[f"head{k}.bg"] = np.zeros(d)
        fan_prev = h
    total = len(hidden_sizes) * d
    params["out.w"] = _glorot(init_rng, total, 1, (n, total))
    params["out.b"] = np.zeros(n)
    return AiqnModel(n=n, ordering=ordering, hidden_sizes=list(hidden_sizes),
                     head_width=d, context_width=c, tau_mode=tau_mode,
                     autoregressive=autoregressive, masks=masks, params=params)


def _validate_batch(model: AiqnModel, x, tau, ctx):
    x = np.asarray(x, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n or tau.shape != x.shape:
        raise DomainError(f"expected x and tau of shape [B, {model.n}], got {x.shape} and {tau.shape}")
    if np.any(tau < 0.0) or np.any(tau > 1.0):
        raise DomainError("tau entries must lie in [0, 1]")
    if not np.all(np.isfinite(x)):
        raise DomainError("x contains non-finite entries")
    if model.context_width:
        if ctx is None:
            raise DomainError(f"model expects a context of width {model.context_width}")
        ctx = np.asarray(ctx, dtype=np.float64)
        if ctx.shape != (x.shape[0], model.context_width):
            raise DomainError(f"context shape {ctx.shape} != ({x.shape[0]}, {model.context_width})")
    elif ctx is not None:
        raise DomainError("model has no context inputs")
    return x, tau, ctx


def _head_read(t: np.ndarray, p: np.ndarray, segments: list[np.ndarray],
               position_for_level: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Masked read of trunk activations into per-position head features.

    Position i may read units of degree < rank(i), i.e. the union of degree
    groups 1..rank(i)-1, so the read is a running sum over degree groups:
    after folding in group m it equals the row for the position of rank
    m + 1.  Writes [B, n, d] into `out` (zeros for the rank-1 position).
    """
    b, d = t.shape[0], p.shape[1]
    n = position_for_level.shape[0]
    running = np.zeros((b, d))
    out[:, position_for_level[0], :] = 0.0
    for m, seg in enumerate(segments, start=1):
        if seg.size:
            running += t[:, seg] @ p[seg, :]
        if m < n:
            out[:, position_for_level[m], :] = running
    # Levels past the last segment (models with no sample-side wiring).
    for m in range(len(segments) + 1, n):
        out[:, position_for_level[m], :] = 0.0
    return out


def _head_read_backward(ds: np.ndarray, t: np.ndarray, p: np.ndarray,
                        segments: list[np.ndarray],
                        position_for_level: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint of _head_read: gradients w.r.t. trunk activations and p.

    A unit of degree m contributes to every position of rank > m, so its
    adjoint is the suffix sum (over ranks, descending) of the per-position
    gradients; the suffix accumulates in a single [B, d] buffer.
    """
    dt = np.zeros_like(t)
    dp = np.zeros_like(p)
    n = position_for_level.shape[0]
    suffix = ds[:, position_for_level[n - 1], :].copy() if n > 1 else None
    for m in range(len(segments), 0, -1):
        seg = segments[m - 1]
        if seg.size:
            dt[:, seg] = suffix @ p[seg, :].T
            dp[seg, :] = t[:, seg].T @ suffix
        if m > 1:
            suffix += ds[:, position_for_level[m - 1], :]
    return dt, dp


def aiqn_forward(model: AiqnModel, x, tau, ctx=None, params: dict | None = None,
                 want_cache: bool = False):
    """Teacher-forced forward pass: output i estimates the conditional
    quantile of dimension i at level tau_i given the preceding dimensions.

    In shared tau mode, column 0 of tau is broadcast to every position.
    Returns [B, n], unbounded (no output nonlinearity).
    """
    x, tau, ctx = _validate_batch(model, x, tau, ctx)
    p = model.params if params is None else params
    if model.tau_mode is TauMode.SHARED:
        tau = np.broadcast_to(tau[:, :1], tau.shape)
    tau_r = 2.0 * tau - 1.0  # linear rescale to [-1, 1]

    cache = {"x": x, "tau_r": tau_r, "ctx": ctx, "blocks": []}
    b, n, d = x.shape[0], model.n, model.head_width
    tau_col = tau_r[:, :, None]
    s_cat = np.empty((b, n, model.num_blocks * d))
    t = x
    for k in range(model.num_blocks):
        mk = model.masks.hidden_masks[k]
        pf = t @ (p[f"trunk{k}.wf"] * mk)
        pf += p[f"trunk{k}.bf"]
        pg = t @ (p[f"trunk{k}.wg"] * mk)
        pg += p[f"trunk{k}.bg"]
        tf, sg = np.tanh(pf, out=pf), _sigmoid(pg)
        t_next = tf * sg

        segs = model._degree_segments[k]
        af = _head_read(t_next, p[f"head{k}.pf"], segs, model._rank_to_position,
                        np.empty((b, n, d)))
        af += tau_col * p[f"head{k}.tf"]
        af += p[f"head{k}.bf"]
        ag = _head_read(t_next, p[f"head{k}.pg"], segs, model._rank_to_position,
                        np.empty((b, n, d)))
        ag += tau_col * p[f"head{k}.tg"]
        ag += p[f"head{k}.bg"]
        if model.context_width:
            af += (ctx @ p[f"head{k}.cf"])[:, None, :]
            ag += (ctx @ p[f"head{k}.cg"])[:, None, :]
        haf, hag = np.tanh(af, out=af), _sigmoid(ag)
        s = s_cat[:, :, k * d:(k + 1) * d]
        np.multiply(haf, hag, out=s)
        if want_cache:
            cache["blocks"].append(
                {"t_prev": t, "tf": tf, "sg": sg, "t": t_next,
                 "haf": haf, "hag": hag})
        t = t_next

    out = np.einsum("biq,iq->bi", s_cat, p["out.w"]) + p["out.b"]
    if not np.all(np.isfinite(out)):
        raise DomainError("forward pass produced non-finite outputs")
    if want_cache:
        cache["s_cat"] = s_cat
        return out, cache
    return out


def aiqn_backward(model: AiqnModel, x, tau, target, cfg: LossConfig, ctx=None,
                  params: dict | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Loss plus exact reverse-mode gradients for every parameter.

    Gradients of masked trunk entries are identically zero.
    """
    p = model.params if params is None else params
    out, cache = aiqn_forward(model, x, tau, ctx=ctx, params=p, want_cache=True)
    target = np.asarray(target, dtype=np.float64)
    tau_arr = np.asarray(tau, dtype=np.float64)
    if model.tau_mode is TauMode.SHARED:
        tau_arr = np.broadcast_to(tau_arr[:, :1], tau_arr.shape)
    loss, dout = batch_quantile_loss(out, target, tau_arr, cfg)

    grads = {k: np.zeros_like(v) for k, v in p.items()}
    s_cat = cache["s_cat"]
    grads["out.w"] = np.einsum("bi,biq->iq", dout, s_cat)
    grads["out.b"] = dout.sum(axis=0)
    ds_cat = dout[:, :, None] * p["out.w"][None, :, :]

    d = model.head_width
    tau_r, ctx_arr = cache["tau_r"], cache["ctx"]
    dt_next = None  # gradient flowing into trunk activation t^k from layer k+1
    for k in range(model.num_blocks - 1, -1, -1):
        blk = cache["blocks"][k]
        ds = ds_cat[:, :, k * d:(k + 1) * d]
        haf, hag = blk["haf"], blk["hag"]
        dshag = ds * hag
        daf = dshag - dshag * haf * haf          # ds * hag * (1 - haf^2)
        dag = dshag * haf
        dag -= dag * hag                          # ds * haf * hag * (1 - hag)

        grads[f"head{k}.bf"] = daf.sum(axis=(0, 1))
        grads[f"head{k}.bg"] = dag.sum(axis=(0, 1))
        grads[f"head{k}.tf"] = np.einsum("bid,bi->d", daf, tau_r)
        grads[f"head{k}.tg"] = np.einsum("bid,bi->d", dag, tau_r)
        if model.context_width:
            grads[f"head{k}.cf"] = ctx_arr.T @ daf.sum(axis=1)
            grads[f"head{k}.cg"] = ctx_arr.T @ dag.sum(axis=1)

        segs = model._degree_segments[k]
        dt_f, dpf_ = _head_read_backward(daf, blk["t"], p[f"head{k}.pf"], segs,
                                         model._rank_to_position)
        dt_g, dpg_ = _head_read_backward(dag, blk["t"], p[f"head{k}.pg"], segs,
                                         model._rank_to_position)
        grads[f"head{k}.pf"] = dpf_
        grads[f"head{k}.pg"] = dpg_
        dt = dt_f + dt_g
        if dt_next is not None:
            dt = dt + dt_next

        tf, sg, t_prev = blk["tf"], blk["sg"], blk["t_prev"]
        dpf = dt * sg * (1.0 - tf * tf)
        dpg = dt * tf * sg * (1.0 - sg)
        mk = model.masks.hidden_masks[k]
        grads[f"trunk{k}.wf"] = (t_prev.T @ dpf) * mk
        grads[f"trunk{k}.wg"] = (t_prev.T @ dpg) * mk
        grads[f"trunk{k}.bf"] = dpf.sum(axis=0)
        grads[f"trunk{k}.bg"] = dpg.sum(axis=0)
        dt_next = dpf @ (p[f"trunk{k}.wf"] * mk).T + dpg @ (p[f"trunk{k}.wg"] * mk).T

    return loss, grads


def dquantile_dtau(model: AiqnModel, x, tau, dim: int, ctx=None,
                   params: dict | None = None) -> np.ndarray:
    """Exact d output[dim] / d tau[dim] per batch row, in one extra pass.

    This is the quantile-density (sparsity) direction: the reciprocal of the
    modeled conditional density at the corresponding quantile value.
    """
    if not 0 <= dim < model.n:
        raise DomainError(f"dim must lie in [0, {model.n - 1}], got {dim}")
    p = model.params if params is None else params
    _, cache = aiqn_forward(model, x, tau, ctx=ctx, params=p, want_cache=True)
    d = model.head_width
    total = np.zeros(cache["x"].shape[0])
    for k in range(model.num_blocks):
        blk = cache["blocks"][k]
        haf = blk["haf"][:, dim, :]
        hag = blk["hag"][:, dim, :]
        ds_dtau_r = ((1.0 - haf * haf) * hag * p[f"head{k}.tf"]
                     + haf * hag * (1.0 - hag) * p[f"head{k}.tg"])
        total = total + ds_dtau_r @ p["out.w"][dim, k * d:(k + 1) * d]
    return 2.0 * total  # chain rule through the [-1, 1] rescale
