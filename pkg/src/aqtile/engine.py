"""Exploratory query execution over the tile index.

A query runs as: locate overlapping leaves, split oversized ones, classify
each leaf by containment and metadata status, then iterate incremental
sampling rounds (draw offset-sorted batches, fold values into metadata,
re-estimate) until every aggregate's estimated relative error is within the
user bound or every stratum is exhausted. Samples drawn for fully-contained
tiles update the index; samples for partially-contained tiles only serve the
current query, because they are not uniform over the whole tile.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import bootstrap, estimator
from .adaptation import SplitPolicy, maybe_split
from .estimator import AggregateSpec, EmptyRegion, Estimate
from .index import (
    Containment,
    Interval,
    MetadataStatus,
    Tile,
    TileIndex,
    TileMetadata,
    objects_in_region,
)
from .rawstore import DatasetDescriptor, IoCounter, RawReader


class Case(enum.Enum):
    CASE1 = 1  # fully contained, exact metadata: answered from the index
    CASE2 = 2  # fully contained, approximate metadata: reuse, top up if needed
    CASE3 = 3  # partially contained: sample the in-region objects, don't store
    CASE4 = 4  # no metadata (new/cleared tile): sample from scratch


@dataclass(frozen=True)
class EngineConfig:
    initial_rate: float = 0.05
    rate_cap: float = 2.0
    rate_floor: float = 1.1
    min_batch: int = 50
    split_threshold: int = 200
    max_depth: int = 12
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.initial_rate <= 1.0:
            raise ValueError("initial_rate must be in (0, 1]")
        if self.rate_floor <= 1.0:
            raise ValueError("rate_floor must be > 1")
        if self.rate_cap < self.rate_floor:
            raise ValueError("rate_cap must be >= rate_floor")
        if self.min_batch < 2:
            raise ValueError("min_batch must be >= 2")


@dataclass(frozen=True)
class ExploratoryQuery:
    ix: Interval
    iy: Interval
    aggs: tuple[AggregateSpec, ...]
    eps_max: float = 0.0
    gamma: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.eps_max < 1.0:
            raise ValueError("eps_max must be in [0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not self.aggs:
            raise ValueError("query needs at least one aggregate")


@dataclass
class QueryStats:
    io_reads: int = 0
    sampling_iterations: int = 0
    tiles_full: int = 0
    tiles_partial: int = 0
    tiles_split: int = 0
    elapsed_ms: float = 0.0

    def to_json(self) -> dict:
        return {
            "io_reads": self.io_reads,
            "sampling_iterations": self.sampling_iterations,
            "tiles_full": self.tiles_full,
            "tiles_partial": self.tiles_partial,
            "tiles_split": self.tiles_split,
            "elapsed_ms": self.elapsed_ms,
        }


@dataclass
class QueryResult:
    estimates: dict[AggregateSpec, Estimate]
    errors: dict[AggregateSpec, str]
    stats: QueryStats
    init_stats: bootstrap.InitStats | None = None

    def estimate_for(self, func: str, attribute: int | None = None) -> Estimate:
        return self.estimates[AggregateSpec(func, attribute)]

    def to_json(self) -> dict:
        aggs = []
        for spec, est in self.estimates.items():
            aggs.append({
                "func": spec.func,
                "attribute": spec.attribute,
                "value": est.value_hat,
                "ci_lo": est.ci_lo,
                "ci_hi": est.ci_hi,
                "eps_est": est.eps_est if math.isfinite(est.eps_est) else None,
                "exact": est.exact,
            })
        for spec, msg in self.errors.items():
            aggs.append({
                "func": spec.func,
                "attribute": spec.attribute,
                "error": msg,
            })
        doc = {"aggregates": aggs, "stats": self.stats.to_json()}
        if self.init_stats is not None:
            doc["init_stats"] = self.init_stats.to_json()
        return doc


@dataclass
class SamplingState:
    """Per-query, per-stratum sampling bookkeeping.

    `eligible` holds positions (into the tile's object arrays) that may still
    be drawn this query; `eligible0` is its size before any draw. The draw
    target is cumulative: max(min_batch, ceil(rate * eligible0)), clamped.
    """

    tile: Tile
    eligible: np.ndarray
    eligible0: int = field(init=False)
    min_batch: int = 50
    rate: float = 0.05
    drawn: int = 0

    def __post_init__(self):
        self.eligible0 = len(self.eligible)

    def target(self, rate: float) -> int:
        if self.eligible0 == 0:
            return 0
        want = max(self.min_batch, math.ceil(rate * self.eligible0))
        return min(want, self.eligible0)


def draw_samples(state: SamplingState, rate: float, rng) -> np.ndarray:
    """Draw the next batch uniformly without replacement from the eligible set.

    Returns the drawn positions sorted ascending; since a tile's objects are
    stored in offset order, ascending positions are ascending file offsets.
    """
    state.rate = rate
    k = min(state.target(rate) - state.drawn, len(state.eligible))
    if k <= 0:
        return np.empty(0, np.int64)
    pick = rng.choice(len(state.eligible), size=k, replace=False)
    positions = state.eligible[pick]
    keep = np.ones(len(state.eligible), dtype=bool)
    keep[pick] = False
    state.eligible = state.eligible[keep]
    state.drawn += k
    positions.sort()
    return positions


def adjust_rate(eps_current: float, eps_max: float, rate: float, cfg: EngineConfig) -> float:
    """Grow the sampling rate by (eps_current/eps_max)^2, clamped to the
    configured floor and cap, never past 1.0."""
    if eps_max <= 0.0 or not math.isfinite(eps_current):
        factor = cfg.rate_cap
    else:
        factor = (eps_current / eps_max) ** 2
        factor = min(max(factor, cfg.rate_floor), cfg.rate_cap)
    return min(1.0, rate * factor)


def classify(tile: Tile, cont: Containment, attribute: int) -> Case:
    """Combine spatial relation and metadata status into the sampling case."""
    status = tile.status(attribute)
    if status is MetadataStatus.NOT_AVAILABLE:
        return Case.CASE4
    if cont is Containment.PARTIAL:
        return Case.CASE3
    if status is MetadataStatus.EXACT:
        return Case.CASE1
    return Case.CASE2


def persist_metadata(tile: Tile, positions: np.ndarray, values_by_attr: dict,
                     scope: str) -> None:
    """Fold a read batch into the tile when the sample covers the whole tile.

    scope "full_tile": bitmap bits set, metadata updated (valid for any later
    query). scope "partial_region": the tile is left untouched; the caller
    keeps the values in per-query scratch statistics only.
    """
    if scope == "full_tile":
        tile.absorb_batch(positions, values_by_attr)
    elif scope != "partial_region":
        raise ValueError(f"unknown persistence scope {scope!r}")


@dataclass
class _Stratum:
    tile: Tile
    containment: Containment
    case: Case
    state: SamplingState
    persist: bool
    N: int
    wanted: tuple[int, ...]
    scratch: dict[int, TileMetadata] | None = None

    @property
    def n(self) -> int:
        return self.tile.popcount if self.persist else self.state.drawn

    @property
    def exhausted(self) -> bool:
        return self.n >= self.N

    def meta(self, attr: int) -> TileMetadata | None:
        if self.persist:
            return self.tile.metadata.get(attr)
        return self.scratch.get(attr)

    def stat(self, attr: int) -> estimator.StratumStat:
        m = self.meta(attr)
        n = self.n
        if m is None or n == 0:
            raise estimator.InsufficientSample(
                f"stratum over tile [{self.tile.ix.lo},{self.tile.ix.hi}) has no samples"
            )
        return estimator.StratumStat(self.N, n, m.mean, m.variance(), exact=False)


class Engine:
    """One exploration session: a dataset, its lazily built index, and config.

    `reuse_metadata=False` turns the engine into the sampling-only baseline:
    stored tile metadata is neither consulted nor updated, so every query
    samples its region from scratch. `force_exact=True` pins eps_max to 0.
    """

    def __init__(
        self,
        dataset: DatasetDescriptor,
        cfg: EngineConfig | None = None,
        init_cfg: bootstrap.InitConfig | None = None,
        reuse_metadata: bool = True,
        force_exact: bool = False,
    ):
        self.dataset = dataset
        self.cfg = cfg or EngineConfig()
        self.init_cfg = init_cfg or bootstrap.InitConfig()
        self.reuse_metadata = reuse_metadata
        self.force_exact = force_exact
        self.index: TileIndex | None = None
        self.rng = np.random.default_rng(self.cfg.rng_seed)
        self.io = IoCounter()
        self._reader: RawReader | None = None
        self.history: list[tuple[ExploratoryQuery, QueryStats]] = []

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
            self._reader = None

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def reader(self) -> RawReader:
        if self._reader is None:
            self._reader = RawReader(self.dataset, self.io)
        return self._reader

    # ------------------------------------------------------------------

    def _validate(self, query: ExploratoryQuery) -> None:
        numeric = self.dataset.numeric_indices()
        for agg in query.aggs:
            if agg.func == "count":
                continue
            a = agg.attribute
            if a is None or not 0 <= a < self.dataset.n_attributes:
                raise ValueError(f"unknown attribute {a}")
            if a not in numeric:
                raise ValueError(f"attribute {a} is not numeric")
            if a in (self.dataset.axis_x, self.dataset.axis_y):
                raise ValueError(f"attribute {a} is an axis attribute")

    def execute(self, query: ExploratoryQuery) -> QueryResult:
        self._validate(query)
        if self.force_exact and query.eps_max != 0.0:
            query = replace(query, eps_max=0.0)
        t0 = time.perf_counter()
        if self.index is None:
            result = self._bootstrap(query)
        else:
            result = self._run(query)
        result.stats.elapsed_ms = (time.perf_counter() - t0) * 1e3
        self.history.append((query, result.stats))
        return result

    def _bootstrap(self, query: ExploratoryQuery) -> QueryResult:
        self.io.reset()
        index, q0_est, init_stats = bootstrap.initialize(
            self.dataset, query, self.init_cfg
        )
        self.index = index
        estimates: dict[AggregateSpec, Estimate] = {}
        errors: dict[AggregateSpec, str] = {}
        for spec, est in q0_est.items():
            if isinstance(est, estimator.EstimationError):
                errors[spec] = str(est)
            else:
                estimates[spec] = est
        overlaps = index.locate(query.ix, query.iy)
        stats = QueryStats(
            io_reads=0,
            tiles_full=sum(1 for _, c in overlaps if c is Containment.FULL),
            tiles_partial=sum(1 for _, c in overlaps if c is Containment.PARTIAL),
        )
        return QueryResult(estimates, errors, stats, init_stats=init_stats)

    # ------------------------------------------------------------------

    def _run(self, query: ExploratoryQuery) -> QueryResult:
        self.io.reset()
        cfg = self.cfg
        qx, qy = query.ix, query.iy
        stats = QueryStats()

        policy = SplitPolicy(cfg.split_threshold, cfg.max_depth)
        splits = 0
        for tile, _ in self.index.locate(qx, qy):
            splits += len(maybe_split(tile, qx, qy, policy)) // 4
        self.index.tiles_split += splits
        stats.tiles_split = splits

        overlaps = self.index.locate(qx, qy)
        stats.tiles_full = sum(1 for _, c in overlaps if c is Containment.FULL)
        stats.tiles_partial = len(overlaps) - stats.tiles_full

        attrs = tuple(sorted({a.attribute for a in query.aggs if a.func != "count"}))
        region_counts: list[int] = []
        exact_tiles: list[tuple[Tile, int]] = []
        sampling: list[_Stratum] = []

        for tile, cont in overlaps:
            region = objects_in_region(tile, qx, qy)
            N = len(region)
            region_counts.append(N)
            if N == 0 or not attrs:
                continue
            min_batch = N if N <= min(4, cfg.min_batch) else cfg.min_batch
            if self.reuse_metadata and cont is Containment.FULL:
                tile.ensure_tracked(attrs)
                case = classify(tile, cont, attrs[0])
                if case is Case.CASE1:
                    exact_tiles.append((tile, N))
                    continue
                eligible = np.flatnonzero(~tile.bitmap).astype(np.int64)
                stratum = _Stratum(
                    tile, cont, case,
                    SamplingState(tile, eligible, min_batch=min_batch,
                                  rate=cfg.initial_rate),
                    persist=True, N=N,
                    wanted=tuple(sorted(tile.tracked)),
                )
            else:
                case = Case.CASE3 if cont is Containment.PARTIAL else Case.CASE4
                stratum = _Stratum(
                    tile, cont, case,
                    SamplingState(tile, region, min_batch=min_batch,
                                  rate=cfg.initial_rate),
                    persist=False, N=N,
                    wanted=attrs,
                    scratch={a: TileMetadata() for a in attrs},
                )
            sampling.append(stratum)

        estimates: dict[AggregateSpec, Estimate] = {}
        errors: dict[AggregateSpec, str] = {}

        for agg in query.aggs:
            if agg.func == "count":
                estimates[agg] = estimator.count_exact(region_counts, query.gamma)

        minmax = [a for a in query.aggs if a.func in ("min", "max")]
        if minmax:
            self._drain_all(sampling, stats)
            for agg in minmax:
                try:
                    estimates[agg] = self._minmax(agg, exact_tiles, sampling, query.gamma)
                except EmptyRegion as e:
                    errors[agg] = str(e)

        loop_aggs = [a for a in query.aggs if a.func in ("sum", "mean")]
        if loop_aggs:
            self._sampling_loop(
                query, loop_aggs, exact_tiles, sampling, estimates, errors, stats
            )

        stats.io_reads = self.io.reads
        return QueryResult(estimates, errors, stats)

    # ------------------------------------------------------------------

    def _sampling_loop(self, query, loop_aggs, exact_tiles, sampling,
                       estimates, errors, stats) -> None:
        cfg = self.cfg
        rate = 1.0 if query.eps_max == 0.0 else cfg.initial_rate

        starved = [s for s in sampling if not s.exhausted and s.n < 2]
        if starved:
            self._read_batches(starved, rate)
            stats.sampling_iterations += 1

        while True:
            eps_worst = 0.0
            for agg in loop_aggs:
                strata = [
                    estimator.StratumStat(N, N, tile.metadata[agg.attribute].mean,
                                          0.0, exact=True)
                    for tile, N in exact_tiles
                ]
                strata.extend(s.stat(agg.attribute) for s in sampling)
                try:
                    if agg.func == "sum":
                        est = estimator.combine_sum(strata, query.gamma)
                    else:
                        est = estimator.combine_mean(strata, query.gamma)
                    estimates[agg] = est
                    errors.pop(agg, None)
                    eps_worst = max(eps_worst, est.eps_est)
                except EmptyRegion as e:
                    errors[agg] = str(e)
            if eps_worst <= query.eps_max:
                return
            if all(s.exhausted for s in sampling):
                return
            rate = adjust_rate(eps_worst, query.eps_max, rate, cfg)
            drew = self._read_batches([s for s in sampling if not s.exhausted], rate)
            stats.sampling_iterations += 1
            if drew == 0:
                # every unexhausted stratum's cumulative target is already met;
                # jump straight to exhaustion rather than spinning on rate bumps
                rate = 1.0

    def _read_batches(self, strata, rate: float) -> int:
        """Draw one batch per stratum and read them in one ascending-offset pass."""
        batches = []
        for s in strata:
            positions = draw_samples(s.state, rate, self.rng)
            if len(positions):
                batches.append((s, positions))
        if not batches:
            return 0
        wanted = tuple(sorted(set().union(*(s.wanted for s, _ in batches))))
        col = {a: i for i, a in enumerate(wanted)}
        all_offsets = np.concatenate([s.tile.offsets[p] for s, p in batches])
        order = np.argsort(all_offsets, kind="stable")
        values = np.empty((len(all_offsets), len(wanted)))
        values[order] = self.reader.read_objects(all_offsets[order], wanted)
        total = 0
        row = 0
        for s, positions in batches:
            k = len(positions)
            rows = values[row:row + k]
            row += k
            total += k
            if s.persist:
                persist_metadata(
                    s.tile, positions,
                    {a: rows[:, col[a]] for a in s.tile.tracked},
                    scope="full_tile",
                )
            else:
                persist_metadata(s.tile, positions, {}, scope="partial_region")
                for a, meta in s.scratch.items():
                    meta.absorb(rows[:, col[a]])
        return total

    def _drain_all(self, sampling, stats) -> None:
        """Read every remaining eligible object (exact fallback for min/max)."""
        pending = [s for s in sampling if not s.exhausted]
        if not pending:
            return
        drew = self._read_batches(pending, 1.0)
        if drew:
            stats.sampling_iterations += 1

    def _minmax(self, agg, exact_tiles, sampling, gamma) -> Estimate:
        pieces = []
        for tile, _ in exact_tiles:
            m = tile.metadata[agg.attribute]
            pieces.append(m.min_seen if agg.func == "min" else m.max_seen)
        for s in sampling:
            m = s.meta(agg.attribute)
            if m is None or m.n == 0:
                continue
            pieces.append(m.min_seen if agg.func == "min" else m.max_seen)
        return estimator.minmax_exact(pieces, agg.func, gamma)

    # ------------------------------------------------------------------

    def index_stats(self) -> dict:
        if self.index is None:
            return {"initialized": False}
        doc = self.index.stats_json()
        doc["initialized"] = True
        return doc
