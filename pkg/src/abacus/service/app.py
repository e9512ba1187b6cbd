"""FastAPI application wrapping the library.

Artifacts (trained predictors, embedding models) are loaded from disk
into an in-process registry via POST /predictors and POST /embeddings,
then referenced by name.  Domain errors map to HTTP 422, unknown
registry names to 404.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import AbacusError
from ..features import Optimizer, RunConfig, extract_features
from ..graph import graph_from_dict, graph_to_dict, validate
from ..nsm import build_nsm
from . import schemas


def _graph(model: schemas.GraphModel):
    return graph_from_dict(model.to_doc(), source="<request>")


def _run_config(g, model: schemas.RunConfigModel) -> RunConfig:
    channels, h, w = g.input_shape
    return RunConfig(
        batch_size=model.batch_size,
        input_h=model.input_h if model.input_h is not None else h,
        input_w=model.input_w if model.input_w is not None else w,
        channels=model.channels if model.channels is not None else channels,
        learning_rate=model.learning_rate,
        epochs=model.epochs,
        optimizer=Optimizer.from_string(model.optimizer))


def create_app() -> FastAPI:
    app = FastAPI(title="abacus", version=__version__)
    app.state.predictors = {}
    app.state.embeddings = {}

    @app.exception_handler(AbacusError)
    async def _domain_error(request: Request, exc: AbacusError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    def _embeddings_model(name: str | None):
        if name is None:
            raise HTTPException(status_code=422,
                                detail="structural=embedding needs an embeddings name")
        try:
            return app.state.embeddings[name]
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no embeddings named {name!r}") from None

    def _structural_block(g, structural: str, embeddings: str | None, graph_id: str):
        if structural == "nsm":
            return build_nsm(g)
        if structural == "embedding":
            from ..embedding import embed

            return embed(g, _embeddings_model(embeddings), graph_id=graph_id)
        raise HTTPException(status_code=422,
                            detail=f"unknown structural kind {structural!r}")

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate_graph(doc: schemas.GraphModel):
        report = validate(_graph(doc))
        issues = [schemas.IssueModel(subject=str(subject), message=message)
                  for subject, message in report.issues]
        return schemas.ValidateResponse(ok=report.ok, issues=issues)

    @app.post("/nsm", response_model=schemas.NSMResponse)
    def nsm(doc: schemas.GraphModel):
        m = build_nsm(_graph(doc))
        return schemas.NSMResponse(operators=list(m.vocabulary.names),
                                   counts=[[int(v) for v in row] for row in m.counts])

    @app.post("/features", response_model=schemas.FeaturesResponse)
    def features(req: schemas.FeaturesRequest):
        g = _graph(req.graph)
        cfg = _run_config(g, req.config)
        block = _structural_block(g, req.structural, req.embeddings, req.graph_id)
        fv = extract_features(g, cfg, block)
        return schemas.FeaturesResponse(names=list(fv.layout.names),
                                        values=[float(v) for v in fv.values],
                                        digest=fv.layout.digest())

    @app.post("/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        from ..netgen import GenSpec, build_dataset
        from ..predictor import dataset_to_csv

        spec = GenSpec(node_count=req.node_count, branch_prob=req.branch_prob,
                       pool_prob=req.pool_prob, channel_range=req.channel_range,
                       kernel_choices=req.kernel_choices,
                       input_shape=req.input_shape, seed=req.seed)
        ds, graphs = build_dataset(spec, n_graphs=req.count,
                                   configs_per_graph=req.configs_per_graph)
        docs = [schemas.GraphModel(**graph_to_dict(g)) for g in graphs]
        return schemas.GenerateResponse(graphs=docs, points=len(ds),
                                        dataset_csv=dataset_to_csv(ds))

    @app.post("/schedule", response_model=schemas.ScheduleResponse)
    def schedule(req: schemas.ScheduleRequest):
        import math

        from ..scheduler import (GAParams, Job, brute_force_schedule,
                                 ga_schedule, lower_bound, random_schedule)

        jobs = [Job(id=j.id, time_s=j.time_s, mem_mib=j.mem_mib) for j in req.jobs]
        capacities = (list(req.capacities) if req.capacities is not None
                      else [math.inf] * req.machines)
        if req.method == "ga":
            params = GAParams(population_size=req.population,
                              generations=req.generations, seed=req.seed)
            result = ga_schedule(jobs, capacities, params)
        elif req.method == "brute":
            result = brute_force_schedule(jobs, capacities)
        else:
            result = random_schedule(jobs, capacities, seed=req.seed)
        return schemas.ScheduleResponse(
            method=result.method, makespan=result.makespan,
            lower_bound=lower_bound(jobs, len(capacities)),
            assignment={job_id: m for job_id, m in result.to_rows(jobs)},
            per_machine_time=list(result.per_machine_time),
            history=list(result.history))

    def _predictor_info(name: str, p) -> schemas.PredictorInfo:
        return schemas.PredictorInfo(name=name, structural=p.layout.structural,
                                     n_features=len(p.layout), chosen=dict(p.chosen))

    @app.post("/predictors", response_model=schemas.PredictorInfo)
    def register_predictor(req: schemas.RegisterRequest):
        from ..predictor import load_predictor

        try:
            p = load_predictor(req.path)
        except OSError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        app.state.predictors[req.name] = p
        return _predictor_info(req.name, p)

    @app.get("/predictors", response_model=list[schemas.PredictorInfo])
    def list_predictors():
        return [_predictor_info(name, p)
                for name, p in sorted(app.state.predictors.items())]

    def _embeddings_info(name: str, m) -> schemas.EmbeddingsInfo:
        return schemas.EmbeddingsInfo(name=name, dims=m.dims, depth=m.depth,
                                      tokens=len(m.tokens))

    @app.post("/embeddings", response_model=schemas.EmbeddingsInfo)
    def register_embeddings(req: schemas.RegisterRequest):
        from ..embedding import load_embeddings

        try:
            m = load_embeddings(req.path)
        except OSError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        app.state.embeddings[req.name] = m
        return _embeddings_info(req.name, m)

    @app.get("/embeddings", response_model=list[schemas.EmbeddingsInfo])
    def list_embeddings():
        return [_embeddings_info(name, m)
                for name, m in sorted(app.state.embeddings.items())]

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict_cost(req: schemas.PredictRequest):
        from ..predictor import predict

        try:
            p = app.state.predictors[req.predictor]
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no predictor named {req.predictor!r}") from None
        g = _graph(req.graph)
        cfg = _run_config(g, req.config)
        block = _structural_block(g, p.layout.structural, req.embeddings, req.graph_id)
        fv = extract_features(g, cfg, block)
        out = predict(p, fv)
        return schemas.PredictResponse(time_s=out.time_s, mem_mib=out.mem_mib)

    return app
