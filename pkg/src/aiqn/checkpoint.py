"""Checkpoint serialization.

Little-endian container: magic "AIQN", u32 format version, a length-prefixed
text metadata block of key=value lines, then named parameter tensors, each a
length-prefixed name followed by u32 rank, u64 dims, and raw 64-bit floats.
Writing is canonical (sorted keys, fixed float formatting), so
serialize -> load -> serialize is a bytewise identity.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .network import AiqnModel, TauMode, masks_from_degrees
from .training import OptimizerState, TrainConfig

MAGIC = b"AIQN"
VERSION = 1


@dataclass
class Checkpoint:
    version: int
    model_meta: dict[str, str]
    params: dict[str, np.ndarray]
    polyak: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    opt_step: int
    config: TrainConfig
    step: int
    seed: int
    degrees: list[np.ndarray]

    @classmethod
    def from_training(cls, model: AiqnModel, polyak: dict, state: OptimizerState,
                      cfg: TrainConfig, step: int) -> "Checkpoint":
        meta = {
            "n": str(model.n),
            "ordering": ",".join(str(i) for i in model.ordering),
            "hidden_sizes": ",".join(str(h) for h in model.hidden_sizes),
            "head_width": str(model.head_width),
            "context_width": str(model.context_width),
            "tau_mode": model.tau_mode.value,
            "autoregressive": str(model.autoregressive).lower(),
        }
        return cls(version=VERSION, model_meta=meta,
                   params={k: v.copy() for k, v in model.params.items()},
                   polyak={k: v.copy() for k, v in polyak.items()},
                   opt_m={k: v.copy() for k, v in state.m.items()},
                   opt_v={k: v.copy() for k, v in state.v.items()},
                   opt_step=state.step, config=cfg, step=step, seed=cfg.seed,
                   degrees=[d.copy() for d in model.masks.hidden_degrees])

    def build_model(self, use_polyak: bool = False) -> AiqnModel:
        """Reconstruct the model; masks are rebuilt from the stored degrees."""
        meta = self.model_meta
        n = int(meta["n"])
        ordering = np.array([int(t) for t in meta["ordering"].split(",")], dtype=np.int64)
        autoregressive = meta["autoregressive"] == "true"
        masks = masks_from_degrees(n, ordering, self.degrees, autoregressive)
        params = self.polyak if use_polyak else self.params
        return AiqnModel(
            n=n, ordering=ordering,
            hidden_sizes=[int(t) for t in meta["hidden_sizes"].split(",")],
            head_width=int(meta["head_width"]),
            context_width=int(meta["context_width"]),
            tau_mode=TauMode(meta["tau_mode"]),
            autoregressive=autoregressive,
            masks=masks,
            params={k: v.copy() for k, v in params.items()})


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def _config_meta(cfg: TrainConfig) -> dict[str, str]:
    return {f"cfg.{k}": _format_value(v) for k, v in vars(cfg).items()}


def _parse_config(meta: dict[str, str]) -> TrainConfig:
    def ints(s):
        return tuple(int(t) for t in s.split(",")) if s else ()

    def floats(s):
        return tuple(float(t) for t in s.split(",")) if s else ()

    return TrainConfig(
        optimizer=meta["cfg.optimizer"],
        lr=float(meta["cfg.lr"]),
        lr_boundaries=ints(meta["cfg.lr_boundaries"]),
        lr_values=floats(meta["cfg.lr_values"]),
        kappa=float(meta["cfg.kappa"]),
        batch_size=int(meta["cfg.batch_size"]),
        steps=int(meta["cfg.steps"]),
        polyak=float(meta["cfg.polyak"]),
        eval_interval=int(meta["cfg.eval_interval"]),
        eval_samples=int(meta["cfg.eval_samples"]),
        tau_samples=int(meta["cfg.tau_samples"]),
        seed=int(meta["cfg.seed"]))


def _write_tensor_entry(buf: io.BytesIO, name: str, arr: np.ndarray):
    raw = np.ascontiguousarray(arr, dtype="<f8")
    name_bytes = name.encode("utf-8")
    buf.write(struct.pack("<I", len(name_bytes)))
    buf.write(name_bytes)
    buf.write(struct.pack("<I", raw.ndim))
    for dim in raw.shape:
        buf.write(struct.pack("<Q", dim))
    buf.write(raw.tobytes())


def write_checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    meta = dict(ckpt.model_meta)
    meta.update(_config_meta(ckpt.config))
    meta["opt_step"] = str(ckpt.opt_step)
    meta["step"] = str(ckpt.step)
    meta["seed"] = str(ckpt.seed)
    meta_text = "".join(f"{k}={meta[k]}\n" for k in sorted(meta))

    tensors: dict[str, np.ndarray] = {}
    for prefix, group in (("param/", ckpt.params), ("polyak/", ckpt.polyak),
                          ("opt_m/", ckpt.opt_m), ("opt_v/", ckpt.opt_v)):
        for k, v in group.items():
            tensors[prefix + k] = v
    for i, deg in enumerate(ckpt.degrees):
        tensors[f"masks/degrees{i}"] = np.asarray(deg, dtype=np.float64)

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", ckpt.version))
    meta_bytes = meta_text.encode("utf-8")
    buf.write(struct.pack("<Q", len(meta_bytes)))
    buf.write(meta_bytes)
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        _write_tensor_entry(buf, name, tensors[name])
    return buf.getvalue()


def write_checkpoint(path, ckpt: Checkpoint):
    data = write_checkpoint_bytes(ckpt)
    with open(path, "wb") as fh:
        fh.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated file: wanted {n} bytes", offset=self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def read_checkpoint_bytes(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError(f"bad magic; expected {MAGIC!r}", offset=0)
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    meta_len = r.u64()
    meta: dict[str, str] = {}
    for line in r.take(meta_len).decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        meta[key] = value

    tensors: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        shape = tuple(r.u64() for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape)
        tensors[name] = arr.astype(np.float64)
    if r.pos != len(data):
        raise FormatError("trailing bytes after last tensor", offset=r.pos)

    def group(prefix):
        plen = len(prefix)
        return {k[plen:]: v for k, v in tensors.items() if k.startswith(prefix)}

    degrees = []
    i = 0
    while f"masks/degrees{i}" in tensors:
        degrees.append(tensors[f"masks/degrees{i}"].astype(np.int64))
        i += 1

    model_meta = {k: v for k, v in meta.items()
                  if not k.startswith("cfg.") and k not in ("opt_step", "step", "seed")}
    return Checkpoint(version=version, model_meta=model_meta,
                      params=group("param/"), polyak=group("polyak/"),
                      opt_m=group("opt_m/"), opt_v=group("opt_v/"),
                      opt_step=int(meta["opt_step"]),
                      config=_parse_config(meta),
                      step=int(meta["step"]), seed=int(meta["seed"]),
                      degrees=degrees)


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return read_checkpoint_bytes(fh.read())
