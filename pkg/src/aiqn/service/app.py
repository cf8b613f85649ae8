"""FastAPI application exposing the toolkit over HTTP.

Endpoints mirror the CLI surfaces; requests reference files on the server's
filesystem, and small result tensors can be returned inline.  This is a
single-user desk service, not a hardened public API.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..checkpoint import read_checkpoint
from ..config import (build_model, build_train_config, config_from_mapping,
                      generate_dataset)
from ..errors import AiqnError, ConfigError, DomainError, FormatError, TrainingError
from ..sampling import (InpaintRequest, SampleRequest, eval_suite, inpaint,
                        quantile_density_report, sample)
from ..tensor_io import read_tensor, write_tensor
from ..training import grad_check, make_gradcheck_batch, train
from . import schemas

INLINE_VALUE_LIMIT = 200_000  # entries; larger results must go to a file


def _fail(exc: Exception) -> HTTPException:
    if isinstance(exc, (ConfigError, DomainError, FormatError)):
        return HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, FileNotFoundError):
        return HTTPException(status_code=404, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


def _load_checkpoint_model(path: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    return read_checkpoint(p).build_model(use_polyak=True)


def _maybe_inline(values: np.ndarray, req) -> tuple[list | None, str | None]:
    path = None
    if req.out_path:
        write_tensor(req.out_path, values, seed=req.seed)
        path = req.out_path
    inline = None
    if req.return_values:
        if values.size > INLINE_VALUE_LIMIT:
            raise ConfigError(
                f"result of {values.size} entries is too large to inline; "
                "set return_values=false and pass out_path")
        inline = values.tolist()
    return inline, path


def create_app() -> FastAPI:
    app = FastAPI(title="aiqn", version=__version__,
                  description="Quantile-regression generative modeling service")

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/data/generate", response_model=schemas.GenerateDataResponse)
    def generate(req: schemas.GenerateDataRequest):
        try:
            cfg = config_from_mapping(req.config)
            data = generate_dataset(cfg)
            Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
            write_tensor(req.out_path, data, seed=cfg.seed)
            return schemas.GenerateDataResponse(path=req.out_path,
                                                shape=list(data.shape),
                                                seed=cfg.seed)
        except AiqnError as exc:
            raise _fail(exc) from exc

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_endpoint(req: schemas.TrainRequest):
        try:
            cfg = config_from_mapping(req.config)
            dataset_path = Path(req.dataset_path)
            if not dataset_path.exists():
                raise FileNotFoundError(f"dataset not found: {dataset_path}")
            data, _ = read_tensor(dataset_path)
            model = build_model(cfg, data.shape[1])
            ckpt, log = train(model, data, build_train_config(cfg))
            from ..checkpoint import write_checkpoint
            Path(req.checkpoint_path).parent.mkdir(parents=True, exist_ok=True)
            write_checkpoint(req.checkpoint_path, ckpt)
            if req.metrics_path:
                lines = ["step,loss,metric_name,metric_value"]
                lines.extend(row.as_csv() for row in log)
                Path(req.metrics_path).write_text("\n".join(lines) + "\n")
            return schemas.TrainResponse(checkpoint_path=req.checkpoint_path,
                                         steps=ckpt.step,
                                         final_loss=log[-1].loss)
        except (AiqnError, FileNotFoundError, TrainingError) as exc:
            raise _fail(exc) from exc

    @app.post("/sample", response_model=schemas.SampleServiceResponse)
    def sample_endpoint(req: schemas.SampleServiceRequest):
        try:
            model = _load_checkpoint_model(req.checkpoint_path)
            context = np.array(req.context) if req.context else None
            values = sample(model, SampleRequest(count=req.count, seed=req.seed,
                                                 context=context, clamp=req.clamp))
            inline, path = _maybe_inline(values, req)
            return schemas.SampleServiceResponse(shape=list(values.shape),
                                                 seed=req.seed, values=inline,
                                                 path=path)
        except (AiqnError, FileNotFoundError) as exc:
            raise _fail(exc) from exc

    @app.post("/inpaint", response_model=schemas.SampleServiceResponse)
    def inpaint_endpoint(req: schemas.InpaintServiceRequest):
        try:
            model = _load_checkpoint_model(req.checkpoint_path)
            values = inpaint(model, InpaintRequest(prefix=np.array(req.prefix),
                                                   count=req.count, seed=req.seed))
            inline, path = _maybe_inline(values, req)
            return schemas.SampleServiceResponse(shape=list(values.shape),
                                                 seed=req.seed, values=inline,
                                                 path=path)
        except (AiqnError, FileNotFoundError) as exc:
            raise _fail(exc) from exc

    @app.post("/eval", response_model=schemas.EvalServiceResponse)
    def eval_endpoint(req: schemas.EvalServiceRequest):
        try:
            model = _load_checkpoint_model(req.checkpoint_path)
            dataset_path = Path(req.dataset_path)
            if not dataset_path.exists():
                raise FileNotFoundError(f"dataset not found: {dataset_path}")
            data, _ = read_tensor(dataset_path)
            rows = eval_suite(model, data, seed=req.seed,
                              sample_count=req.sample_count)
            return schemas.EvalServiceResponse(
                rows=[schemas.MetricRowModel(metric=r.metric, value=r.value,
                                             samples=r.samples, seed=r.seed)
                      for r in rows])
        except (AiqnError, FileNotFoundError) as exc:
            raise _fail(exc) from exc

    @app.post("/gradcheck", response_model=schemas.GradCheckResponse)
    def gradcheck_endpoint(req: schemas.GradCheckRequest):
        try:
            cfg = config_from_mapping(req.config)
            n = {"scalar-analytic": 1, "multivariate-gaussian": 2,
                 "bars8x8": 64}.get(cfg.task)
            if n is None:
                raise ConfigError(f"gradcheck needs a task with a known "
                                  f"dimension, got {cfg.task!r}")
            model = build_model(cfg, n)
            err, worst = grad_check(model,
                                    make_gradcheck_batch(model, 4, seed=req.seed + 1),
                                    seed=req.seed)
            return schemas.GradCheckResponse(max_relative_error=err,
                                             worst_parameter=worst,
                                             passed=err <= 1e-4)
        except AiqnError as exc:
            raise _fail(exc) from exc

    @app.post("/density", response_model=schemas.DensityResponse)
    def density_endpoint(req: schemas.DensityRequest):
        try:
            model = _load_checkpoint_model(req.checkpoint_path)
            rows = quantile_density_report(model, np.array(req.prefix),
                                           np.array(req.taus), req.dim)
            return schemas.DensityResponse(rows=[schemas.DensityRow(**r) for r in rows])
        except (AiqnError, FileNotFoundError) as exc:
            raise _fail(exc) from exc

    return app


app = create_app()
