"""HTTP/JSON API: register datasets, open sessions, run viewport queries.

One session owns one index; queries within a session are serialized (a
second query while one is in flight gets 409). Field names are snake_case,
intervals are {lo, hi}, aggregates are {func, attribute}; see API.md.
"""

from __future__ import annotations

import itertools
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .bootstrap import InitConfig
from .engine import Engine, EngineConfig, ExploratoryQuery
from .estimator import AggregateSpec
from .index import Interval
from .rawstore import DatasetDescriptor

MAX_SCATTER_POINTS = 20_000


class AttributeModel(BaseModel):
    name: str
    kind: str = "numeric"


class DatasetModel(BaseModel):
    file_path: str
    attributes: list[AttributeModel]
    axis_x: int
    axis_y: int
    delimiter: str = ","
    has_header: bool = True


class EngineConfigModel(BaseModel):
    initial_rate: float = 0.05
    rate_cap: float = 2.0
    rate_floor: float = 1.1
    min_batch: int = 50
    split_threshold: int = 200
    max_depth: int = 12
    rng_seed: int = 0


class InitConfigModel(BaseModel):
    grid_x: int = 100
    grid_y: int = 100
    extra_budget_fraction: float = 0.20
    init_attributes: list[int] | None = None
    bounds: tuple[float, float, float, float] | None = None


class SessionModel(BaseModel):
    dataset_id: str
    engine: EngineConfigModel = Field(default_factory=EngineConfigModel)
    init: InitConfigModel = Field(default_factory=InitConfigModel)


class IntervalModel(BaseModel):
    lo: float
    hi: float


class AggregateModel(BaseModel):
    func: str
    attribute: int | None = None


class QueryModel(BaseModel):
    ix: IntervalModel
    iy: IntervalModel
    aggs: list[AggregateModel]
    eps_max: float = 0.0
    gamma: float = 0.95
    include_points: bool = False
    max_points: int = MAX_SCATTER_POINTS


class _Session:
    def __init__(self, session_id: str, engine: Engine):
        self.id = session_id
        self.engine = engine
        self.busy = threading.Lock()


def create_app() -> FastAPI:
    app = FastAPI(title="aqtile", version="0.1.0")
    datasets: dict[str, DatasetDescriptor] = {}
    sessions: dict[str, _Session] = {}
    ids = itertools.count(1)
    registry_lock = threading.Lock()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/datasets", status_code=201)
    def register_dataset(body: DatasetModel):
        try:
            descriptor = DatasetDescriptor(
                file_path=body.file_path,
                attributes=tuple((a.name, a.kind) for a in body.attributes),
                axis_x=body.axis_x,
                axis_y=body.axis_y,
                delimiter=body.delimiter,
                has_header=body.has_header,
            )
        except ValueError as e:
            raise HTTPException(400, str(e))
        if not Path(descriptor.file_path).is_file():
            raise HTTPException(404, f"file not found: {descriptor.file_path}")
        with registry_lock:
            dataset_id = f"d{next(ids)}"
            datasets[dataset_id] = descriptor
        return {"dataset_id": dataset_id}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionModel):
        descriptor = datasets.get(body.dataset_id)
        if descriptor is None:
            raise HTTPException(404, f"unknown dataset {body.dataset_id}")
        try:
            cfg = EngineConfig(**body.engine.model_dump())
            init_kw = body.init.model_dump()
            if init_kw["init_attributes"] is not None:
                init_kw["init_attributes"] = tuple(init_kw["init_attributes"])
            if init_kw["bounds"] is not None:
                init_kw["bounds"] = tuple(init_kw["bounds"])
            init_cfg = InitConfig(**init_kw)
        except ValueError as e:
            raise HTTPException(400, str(e))
        engine = Engine(descriptor, cfg=cfg, init_cfg=init_cfg)
        with registry_lock:
            session_id = f"s{next(ids)}"
            sessions[session_id] = _Session(session_id, engine)
        return {"session_id": session_id}

    def _get_session(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return session

    @app.post("/sessions/{session_id}/query")
    def run_query(session_id: str, body: QueryModel):
        session = _get_session(session_id)
        try:
            query = ExploratoryQuery(
                ix=Interval(body.ix.lo, body.ix.hi),
                iy=Interval(body.iy.lo, body.iy.hi),
                aggs=tuple(AggregateSpec(a.func, a.attribute) for a in body.aggs),
                eps_max=body.eps_max,
                gamma=body.gamma,
            )
        except ValueError as e:
            raise HTTPException(400, str(e))
        if not session.busy.acquire(blocking=False):
            raise HTTPException(409, "a query is already in flight for this session")
        try:
            try:
                result = session.engine.execute(query)
            except ValueError as e:
                raise HTTPException(400, str(e))
            doc = result.to_json()
            if body.include_points:
                doc["points"] = _scatter_points(
                    session.engine, query, min(body.max_points, MAX_SCATTER_POINTS)
                )
            return doc
        finally:
            session.busy.release()

    @app.get("/sessions/{session_id}/index-stats")
    def index_stats(session_id: str):
        session = _get_session(session_id)
        return session.engine.index_stats()

    return app


def _scatter_points(engine: Engine, query: ExploratoryQuery, cap: int):
    """Axis values of region objects, uniformly thinned to at most `cap`."""
    from .index import objects_in_region

    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    total = 0
    for tile, _ in engine.index.locate(query.ix, query.iy):
        idx = objects_in_region(tile, query.ix, query.iy)
        if len(idx):
            xs.append(tile.ax[idx])
            ys.append(tile.ay[idx])
            total += len(idx)
    if total == 0:
        return {"x": [], "y": [], "total": 0}
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if total > cap:
        step = total / cap
        sel = (np.arange(cap) * step).astype(np.int64)
        x = x[sel]
        y = y[sel]
    return {"x": x.tolist(), "y": y.tolist(), "total": total}


app = create_app()
