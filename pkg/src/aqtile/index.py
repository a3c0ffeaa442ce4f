"""Tile hierarchy: spatial intervals, object entries, sample metadata, bitmaps.

Tiles partition the 2D axis-attribute domain with half-open rectangles
[x_lo, x_hi) x [y_lo, y_hi); query windows are closed on both ends. Each tile
holds its objects' axis values and byte offsets (sorted by offset), a bitmap
marking which objects have been read from file, and per-attribute incremental
statistics over exactly the bitmap-marked objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels


class Containment(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"
    NONE = "none"


class MetadataStatus(enum.Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"
    NOT_AVAILABLE = "not_available"


@dataclass(frozen=True)
class Interval:
    """A 1D interval; tiles treat it half-open [lo, hi), queries closed [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval lo {self.lo} > hi {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class TileMetadata:
    """Incremental sample statistics for one attribute of one tile.

    Maintains count, sum, running mean, and the sum of squared deltas from
    the mean (so the sample variance is m2/(n-1)), plus the min and max of
    the absorbed values. Batches merge via the parallel Welford update.
    """

    n: int = 0
    sum: float = 0.0
    mean: float = 0.0
    m2: float = 0.0
    min_seen: float = math.inf
    max_seen: float = -math.inf

    def absorb(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return
        if not np.isfinite(values).all():
            raise ValueError("non-finite value passed to metadata update")
        nb = values.size
        sb = float(values.sum())
        mb = sb / nb
        m2b = float(((values - mb) ** 2).sum())
        tot = self.n + nb
        delta = mb - self.mean
        self.m2 += m2b + delta * delta * self.n * nb / tot
        self.mean += delta * nb / tot
        self.sum += sb
        self.n = tot
        self.min_seen = min(self.min_seen, float(values.min()))
        self.max_seen = max(self.max_seen, float(values.max()))

    def variance(self) -> float:
        """Sample variance (n-1 denominator); 0.0 when n < 2."""
        if self.n < 2:
            return 0.0
        return self.m2 / (self.n - 1)


def update_metadata_incremental(meta: TileMetadata, new_values) -> TileMetadata:
    """Absorb a batch of values into `meta` (in place) and return it."""
    meta.absorb(np.asarray(new_values, dtype=np.float64))
    return meta


class Tile:
    """One node of the tile hierarchy.

    Object entries are three parallel arrays (axis values and byte offsets),
    sorted ascending by offset. `tracked` is the set of attribute indices
    whose values get absorbed whenever objects of this tile are read; every
    metadata entry covers exactly the bitmap-marked objects.
    """

    __slots__ = (
        "ix", "iy", "ax", "ay", "offsets", "bitmap",
        "metadata", "tracked", "children", "depth",
    )

    def __init__(self, ix: Interval, iy: Interval, ax=None, ay=None, offsets=None,
                 depth: int = 0):
        self.ix = ix
        self.iy = iy
        self.ax = np.empty(0) if ax is None else np.asarray(ax, dtype=np.float64)
        self.ay = np.empty(0) if ay is None else np.asarray(ay, dtype=np.float64)
        self.offsets = (
            np.empty(0, np.int64) if offsets is None else np.asarray(offsets, np.int64)
        )
        self.bitmap = np.zeros(len(self.offsets), dtype=bool)
        self.metadata: dict[int, TileMetadata] = {}
        self.tracked: set[int] = set()
        self.children: list[Tile] = []
        self.depth = depth

    @property
    def n_objects(self) -> int:
        return len(self.offsets)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.bitmap))

    def contains_point(self, x: float, y: float) -> bool:
        return (
            self.ix.lo <= x < self.ix.hi and self.iy.lo <= y < self.iy.hi
        )

    def ensure_tracked(self, attrs) -> bool:
        """Start tracking `attrs`, clearing all sampled state if any of them
        is new while objects have already been absorbed.

        Previously absorbed values were never stored per object, so a newly
        tracked attribute cannot be backfilled; the tile restarts sampling
        with the union of old and new attributes. Returns True if cleared.
        """
        new = set(attrs) - self.tracked
        if not new:
            return False
        cleared = False
        if self.bitmap.any():
            self.bitmap[:] = False
            self.metadata.clear()
            cleared = True
        self.tracked |= new
        return cleared

    def absorb_batch(self, positions: np.ndarray, values_by_attr: dict) -> None:
        """Mark `positions` as sampled and fold their values into metadata.

        `values_by_attr` must provide a value array per tracked attribute,
        aligned with `positions`.
        """
        if len(positions) == 0:
            return
        if self.bitmap[positions].any():
            raise ValueError("position already absorbed into tile metadata")
        for attr in self.tracked:
            meta = self.metadata.get(attr)
            if meta is None:
                meta = self.metadata[attr] = TileMetadata()
            meta.absorb(values_by_attr[attr])
        self.bitmap[positions] = True

    def status(self, attribute: int) -> MetadataStatus:
        return metadata_status(self, attribute)


def metadata_status(tile: Tile, attribute: int) -> MetadataStatus:
    """Exact when every object is absorbed and metadata exists; NotAvailable
    when there is no metadata for the attribute; otherwise Approximate."""
    if attribute not in tile.metadata:
        return MetadataStatus.NOT_AVAILABLE
    if tile.popcount == tile.n_objects:
        return MetadataStatus.EXACT
    return MetadataStatus.APPROXIMATE


def containment(tile: Tile, qx: Interval, qy: Interval) -> Containment:
    """Spatial relation of a half-open tile rectangle to a closed query window."""
    empty = (
        qx.hi < tile.ix.lo
        or qx.lo >= tile.ix.hi
        or qy.hi < tile.iy.lo
        or qy.lo >= tile.iy.hi
    )
    if empty:
        return Containment.NONE
    full = (
        qx.lo <= tile.ix.lo
        and tile.ix.hi <= qx.hi
        and qy.lo <= tile.iy.lo
        and tile.iy.hi <= qy.hi
    )
    return Containment.FULL if full else Containment.PARTIAL


def locate_overlapping_leaves(
    roots, qx: Interval, qy: Interval
) -> list[tuple[Tile, Containment]]:
    """All leaf tiles intersecting the query window, tagged Full or Partial.

    Leaves under a fully-contained ancestor are Full without re-testing.
    """
    out: list[tuple[Tile, Containment]] = []
    stack: list[tuple[Tile, bool]] = [(t, False) for t in reversed(roots)]
    while stack:
        tile, under_full = stack.pop()
        if under_full:
            rel = Containment.FULL
        else:
            rel = containment(tile, qx, qy)
            if rel is Containment.NONE:
                continue
        if tile.is_leaf:
            out.append((tile, rel))
        else:
            full = rel is Containment.FULL
            for child in reversed(tile.children):
                stack.append((child, full))
    return out


def objects_in_region(tile: Tile, qx: Interval, qy: Interval) -> np.ndarray:
    """Positions (into the tile's object arrays) whose axis values fall in the
    closed query window. Full tiles return every position."""
    if containment(tile, qx, qy) is Containment.FULL:
        return np.arange(tile.n_objects, dtype=np.int64)
    if tile.n_objects == 0:
        return np.empty(0, np.int64)
    mask = kernels.region_mask(tile.ax, tile.ay, qx.lo, qx.hi, qy.lo, qy.hi)
    return np.flatnonzero(mask).astype(np.int64)


@dataclass
class TileIndex:
    """The in-memory index: an initial grid of root tiles, refined by splits."""

    roots: list[Tile]
    nx: int
    ny: int
    x_lo: float
    x_hi: float   # extended so the domain max falls inside the last column
    y_lo: float
    y_hi: float
    tiles_split: int = 0
    attribute_names: tuple = ()

    def leaves(self):
        stack = list(reversed(self.roots))
        while stack:
            t = stack.pop()
            if t.is_leaf:
                yield t
            else:
                stack.extend(reversed(t.children))

    def all_tiles(self):
        stack = list(reversed(self.roots))
        while stack:
            t = stack.pop()
            yield t
            stack.extend(reversed(t.children))

    @property
    def n_objects(self) -> int:
        return sum(t.n_objects for t in self.leaves())

    def locate(self, qx: Interval, qy: Interval):
        return locate_overlapping_leaves(self.roots, qx, qy)

    def stats_json(self) -> dict:
        """Snapshot of tile boundaries, counts and per-attribute status for
        UI overlays and debugging."""
        tiles = []
        n_leaves = 0
        for t in self.all_tiles():
            if t.is_leaf:
                n_leaves += 1
            entry = {
                "x_lo": t.ix.lo, "x_hi": t.ix.hi,
                "y_lo": t.iy.lo, "y_hi": t.iy.hi,
                "depth": t.depth,
                "leaf": t.is_leaf,
                "n_objects": t.n_objects,
                "sampled": t.popcount if t.is_leaf else 0,
                "status": {
                    str(a): metadata_status(t, a).value for a in sorted(t.tracked)
                } if t.is_leaf else {},
            }
            tiles.append(entry)
        return {
            "bounds": {"x_lo": self.x_lo, "x_hi": self.x_hi,
                       "y_lo": self.y_lo, "y_hi": self.y_hi},
            "grid": [self.nx, self.ny],
            "n_tiles": len(tiles),
            "n_leaves": n_leaves,
            "n_objects": self.n_objects,
            "tiles_split": self.tiles_split,
            "tiles": tiles,
        }
