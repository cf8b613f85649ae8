"""Command-line front end.

Subcommands: gen-data, train, sample, inpaint, eval, gradcheck, serve.
Every command accepts --config/--seed/--out/--dry-run; file outputs are
byte-identical across runs with the same seed.  Exit codes: 0 success,
1 check failure, 2 usage/config error, 3 I/O or format error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import read_checkpoint, write_checkpoint
from .config import (ExperimentConfig, build_model, build_train_config,
                     generate_dataset, load_config, render_config,
                     resolve_config)
from .errors import AiqnError, ConfigError, DomainError, FormatError, TrainingError
from .sampling import InpaintRequest, SampleRequest, eval_suite, inpaint, sample
from .tensor_io import read_tensor, write_pgm, write_tensor
from .training import grad_check, make_gradcheck_batch, train

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="PATH", help="experiment config file")
    parser.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aiqn",
        description="Quantile-regression generative modeling toolkit")
    parser.add_argument("--version", action="version", version=f"aiqn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a dataset file")
    _common_flags(p)

    p = sub.add_parser("train", help="train a model on a dataset")
    _common_flags(p)
    p.add_argument("--dataset", metavar="PATH", help="input tensor file "
                   "(default: <out>/dataset.aiqt)")

    p = sub.add_parser("sample", help="draw samples from a checkpoint")
    _common_flags(p)
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--images", action="store_true", help="also write PGM files")
    p.add_argument("--clamp", metavar="LO,HI", help="clamp sampled values")
    p.add_argument("--context", metavar="V1,V2,...", help="context vector")

    p = sub.add_parser("inpaint", help="complete samples from a fixed prefix")
    _common_flags(p)
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--prefix-file", metavar="PATH",
                   help="tensor file holding the prefix values")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--images", action="store_true")

    p = sub.add_parser("eval", help="compare model samples against a dataset")
    _common_flags(p)
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--dataset", metavar="PATH")
    p.add_argument("--samples", type=int, default=0,
                   help="model sample count (default min(m, 10000))")

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _common_flags(p)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("serve", help="run the HTTP service")
    _common_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if getattr(args, "dataset", None):
        overrides["dataset"] = args.dataset
    if getattr(args, "checkpoint", None):
        overrides["checkpoint"] = args.checkpoint
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(path: str, what: str) -> Path:
    if not path:
        raise ConfigError(f"no {what} given; pass --{what} or set it in the config")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} file not found: {p}")
    return p


def _dataset_path(cfg: ExperimentConfig) -> Path:
    return _require_file(cfg.dataset or str(Path(cfg.out) / "dataset.aiqt"), "dataset")


def _write_metrics_csv(path: Path, rows):
    lines = ["step,loss,metric_name,metric_value"]
    lines.extend(row.as_csv() for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_images(out: Path, stem: str, values: np.ndarray):
    side = math.isqrt(values.shape[1])
    if side * side != values.shape[1]:
        raise ConfigError(f"--images needs a square dimension, got n={values.shape[1]}")
    for i, row in enumerate(values):
        write_pgm(out / f"{stem}_{i:04d}.pgm", row.reshape(side, side))


def cmd_gen_data(cfg: ExperimentConfig) -> int:
    data = generate_dataset(cfg)
    out = _out_dir(cfg)
    path = out / "dataset.aiqt"
    write_tensor(path, data, seed=cfg.seed)
    print(f"wrote {path} shape={data.shape} seed={cfg.seed}")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig) -> int:
    data, _ = read_tensor(_dataset_path(cfg))
    if data.ndim != 2:
        raise ConfigError(f"dataset must be 2-D, got shape {data.shape}")
    model = build_model(cfg, data.shape[1])
    out = _out_dir(cfg)
    try:
        ckpt, log = train(model, data, build_train_config(cfg))
    except TrainingError as exc:
        if exc.last_good is not None:
            write_checkpoint(out / "checkpoint.aiqn", exc.last_good)
            print(f"aborted; last finite checkpoint written to "
                  f"{out / 'checkpoint.aiqn'}", file=sys.stderr)
        raise
    write_checkpoint(out / "checkpoint.aiqn", ckpt)
    _write_metrics_csv(out / "metrics.csv", log)
    final_loss = log[-1].loss if log else float("nan")
    print(f"wrote {out / 'checkpoint.aiqn'} steps={ckpt.step} final_loss={final_loss!r}")
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, args) -> int:
    ckpt = read_checkpoint(_require_file(cfg.checkpoint, "checkpoint"))
    model = ckpt.build_model(use_polyak=True)
    clamp = None
    if args.clamp:
        lo, _, hi = args.clamp.partition(",")
        clamp = (float(lo), float(hi))
    context = None
    if args.context:
        context = np.array([float(t) for t in args.context.split(",")])
    values = sample(model, SampleRequest(count=args.count, seed=cfg.seed,
                                         context=context, clamp=clamp))
    out = _out_dir(cfg)
    write_tensor(out / "samples.aiqt", values, seed=cfg.seed)
    if args.images:
        _write_images(out, "sample", values)
    print(f"wrote {out / 'samples.aiqt'} shape={values.shape} seed={cfg.seed}")
    return EXIT_OK


def cmd_inpaint(cfg: ExperimentConfig, args) -> int:
    ckpt = read_checkpoint(_require_file(cfg.checkpoint, "checkpoint"))
    model = ckpt.build_model(use_polyak=True)
    prefix, _ = read_tensor(_require_file(args.prefix_file, "prefix-file"))
    prefix = prefix.ravel()
    if not 1 <= prefix.size <= model.n - 1:
        raise DomainError(
            f"prefix length {prefix.size} must lie in [1, {model.n - 1}]: the "
            "conditioned region must be a contiguous prefix of the model's "
            "ordering (the top raster-scan rows for image tasks)")
    values = inpaint(model, InpaintRequest(prefix=prefix, count=args.count,
                                           seed=cfg.seed))
    out = _out_dir(cfg)
    write_tensor(out / "inpaint.aiqt", values, seed=cfg.seed)
    if args.images:
        _write_images(out, "inpaint", values)
    print(f"wrote {out / 'inpaint.aiqt'} shape={values.shape} seed={cfg.seed}")
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    ckpt = read_checkpoint(_require_file(cfg.checkpoint, "checkpoint"))
    model = ckpt.build_model(use_polyak=True)
    data, _ = read_tensor(_dataset_path(cfg))
    if data.ndim != 2 or data.shape[1] != model.n:
        raise ConfigError(f"dataset shape {data.shape} does not match model "
                          f"dimension {model.n}")
    rows = eval_suite(model, data, seed=cfg.seed,
                      sample_count=args.samples or None)
    out = _out_dir(cfg)
    lines = ["metric,value,samples,seed"]
    lines.extend(row.as_csv() for row in rows)
    (out / "eval.csv").write_text("\n".join(lines) + "\n")
    for row in rows:
        print(row.as_csv())
    return EXIT_OK


def cmd_gradcheck(cfg: ExperimentConfig, args) -> int:
    n = {"scalar-analytic": 1, "multivariate-gaussian": 2, "bars8x8": 64}.get(cfg.task)
    if n is None:
        raise ConfigError(f"gradcheck needs a task with a known dimension, got {cfg.task!r}")
    model = build_model(cfg, n)
    batch = make_gradcheck_batch(model, batch_size=4, seed=cfg.seed + 1)
    corrupt = ("out.b", 0, 1e-2) if args.inject_fault else None
    err, worst = grad_check(model, batch, seed=cfg.seed, corrupt=corrupt)
    status = "ok" if err <= 1e-4 else "FAIL"
    print(f"gradcheck {status}: max relative error {err:.3e} at {worst}")
    return EXIT_OK if err <= 1e-4 else EXIT_CHECK_FAILED


def cmd_serve(cfg: ExperimentConfig, args) -> int:
    import uvicorn

    from .service.app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.dry_run:
            print(render_config(resolve_config(cfg)), end="")
            return EXIT_OK
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "sample":
            return cmd_sample(cfg, args)
        if args.command == "inpaint":
            return cmd_inpaint(cfg, args)
        if args.command == "eval":
            return cmd_eval(cfg, args)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args)
        if args.command == "serve":
            return cmd_serve(cfg, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AiqnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
