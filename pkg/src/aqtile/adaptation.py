"""Workload-driven tile splitting.

Overlapping leaf tiles holding more objects than a threshold split into four
equal quadrants, recursively, so future queries in the same area fully
contain more (smaller) tiles. Children start with empty metadata and empty
bitmaps: their statistics were never stored per object, so they must be
repopulated by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .index import Containment, Interval, Tile, containment


@dataclass(frozen=True)
class SplitPolicy:
    threshold: int = 200   # objects above which an overlapping leaf splits
    max_depth: int = 12

    def __post_init__(self):
        if self.threshold < 4:
            raise ValueError("threshold must be >= 4")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


def split_tile(tile: Tile) -> list[Tile]:
    """Split a leaf into four equal quadrants, redistributing its objects.

    Half-open intervals give every object exactly one quadrant. The parent
    keeps its intervals, becomes a non-leaf, and drops its object payload.
    Returns the four children (order: SW, SE, NW, NE).
    """
    if not tile.is_leaf:
        raise ValueError("only leaf tiles can split")
    mx = tile.ix.mid
    my = tile.iy.mid
    quadrant = (tile.ax >= mx).astype(np.int8) + 2 * (tile.ay >= my).astype(np.int8)
    boxes = [
        (Interval(tile.ix.lo, mx), Interval(tile.iy.lo, my)),
        (Interval(mx, tile.ix.hi), Interval(tile.iy.lo, my)),
        (Interval(tile.ix.lo, mx), Interval(my, tile.iy.hi)),
        (Interval(mx, tile.ix.hi), Interval(my, tile.iy.hi)),
    ]
    children = []
    for q, (ix, iy) in enumerate(boxes):
        sel = quadrant == q
        child = Tile(
            ix, iy,
            ax=tile.ax[sel], ay=tile.ay[sel], offsets=tile.offsets[sel],
            depth=tile.depth + 1,
        )
        child.tracked = set(tile.tracked)
        children.append(child)
    tile.children = children
    tile.ax = np.empty(0)
    tile.ay = np.empty(0)
    tile.offsets = np.empty(0, np.int64)
    tile.bitmap = np.zeros(0, dtype=bool)
    tile.metadata.clear()
    return children


def maybe_split(tile: Tile, qx: Interval, qy: Interval, policy: SplitPolicy) -> list[Tile]:
    """Split an overlapping leaf when it exceeds the policy threshold.

    Recurses into children that still overlap the query and remain above the
    threshold. Returns every tile created (4 per split performed).
    """
    created: list[Tile] = []
    if not tile.is_leaf:
        return created
    if tile.n_objects <= policy.threshold or tile.depth >= policy.max_depth:
        return created
    if tile.ix.width <= 0.0 or tile.iy.width <= 0.0:
        return created
    children = split_tile(tile)
    created.extend(children)
    for child in children:
        if containment(child, qx, qy) is not Containment.NONE:
            created.extend(maybe_split(child, qx, qy, policy))
    return created
