"""Approximate 2D-window aggregates over raw CSV files.

An in-memory adaptive tile index is built on the fly from the raw file and
refined by the query workload; aggregate queries are answered by stratified
sampling over the tiles with finite-population-corrected confidence
intervals, sampling incrementally until a user-set relative error bound is
met (or exactly, when the bound is zero).
"""

from .adaptation import SplitPolicy, maybe_split, split_tile
from .bootstrap import InitConfig, InitStats, initialize, query_driven_refine
from .engine import (
    Case,
    Engine,
    EngineConfig,
    ExploratoryQuery,
    QueryResult,
    QueryStats,
    SamplingState,
    adjust_rate,
    classify,
    draw_samples,
)
from .estimator import (
    AggregateSpec,
    EmptyRegion,
    Estimate,
    InsufficientSample,
    StratumStat,
    combine_mean,
    combine_sum,
    confidence_interval,
    count_exact,
    minmax_exact,
    normal_quantile,
)
from .index import (
    Containment,
    Interval,
    MetadataStatus,
    Tile,
    TileIndex,
    TileMetadata,
    containment,
    locate_overlapping_leaves,
    metadata_status,
    objects_in_region,
    update_metadata_incremental,
)
from .rawstore import (
    DatasetDescriptor,
    IoCounter,
    ObjectRecord,
    RawReader,
    read_objects,
    scan,
    scan_arrays,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateSpec", "Case", "Containment", "DatasetDescriptor", "EmptyRegion",
    "Engine", "EngineConfig", "Estimate", "ExploratoryQuery", "InitConfig",
    "InitStats", "InsufficientSample", "Interval", "IoCounter", "MetadataStatus",
    "ObjectRecord", "QueryResult", "QueryStats", "RawReader", "SamplingState",
    "SplitPolicy", "StratumStat", "Tile", "TileIndex", "TileMetadata",
    "adjust_rate", "classify", "combine_mean", "combine_sum",
    "confidence_interval", "containment", "count_exact", "draw_samples",
    "initialize", "locate_overlapping_leaves", "maybe_split", "metadata_status",
    "minmax_exact", "normal_quantile", "objects_in_region", "query_driven_refine",
    "read_objects", "scan", "scan_arrays", "split_tile",
    "update_metadata_incremental",
]
