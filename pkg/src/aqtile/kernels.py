"""Hot numeric kernels: grid binning, region masks, grouped moments.

Each kernel has a numba ``@njit`` implementation and a pure-numpy fallback.
The active path is chosen at import time: set ``AQTILE_DISABLE_NUMBA=1`` to
force the numpy fallbacks (also used when numba is not importable). Both
paths stay importable with ``_numba`` / ``_numpy`` suffixes so tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("AQTILE_DISABLE_NUMBA", "").strip() not in ("", "0", "false")

try:
    if _DISABLE:
        raise ImportError("numba disabled via AQTILE_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    njit = None
    NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# numpy implementations (always importable; the reference semantics)
# ---------------------------------------------------------------------------

def grid_cell_ids_numpy(ax, ay, x_edges, y_edges):
    """Row-major cell id per point for a grid defined by its edge arrays.

    Cell (r, c) covers the half-open box [x_edges[c], x_edges[c+1]) x
    [y_edges[r], y_edges[r+1]); points outside the outer edges get id -1.
    """
    nx = len(x_edges) - 1
    ny = len(y_edges) - 1
    cx = np.searchsorted(x_edges, ax, side="right") - 1
    cy = np.searchsorted(y_edges, ay, side="right") - 1
    ids = cy * nx + cx
    bad = (cx < 0) | (cx >= nx) | (cy < 0) | (cy >= ny)
    ids[bad] = -1
    return ids.astype(np.int64)


def region_mask_numpy(ax, ay, x_lo, x_hi, y_lo, y_hi):
    """Boolean mask of points inside the closed rectangle [x_lo,x_hi]x[y_lo,y_hi]."""
    return (ax >= x_lo) & (ax <= x_hi) & (ay >= y_lo) & (ay <= y_hi)


def group_moments_numpy(cells, values, n_cells):
    """Per-cell (count, sum, m2, min, max) over `values` grouped by `cells`.

    m2 is the sum of squared deviations from the per-cell mean (two-pass).
    Empty cells report count 0, min +inf, max -inf.
    """
    n = np.bincount(cells, minlength=n_cells).astype(np.int64)
    s = np.bincount(cells, weights=values, minlength=n_cells)
    mean = np.divide(s, n, out=np.zeros(n_cells), where=n > 0)
    dev = values - mean[cells]
    m2 = np.bincount(cells, weights=dev * dev, minlength=n_cells)
    mn = np.full(n_cells, np.inf)
    mx = np.full(n_cells, -np.inf)
    np.minimum.at(mn, cells, values)
    np.maximum.at(mx, cells, values)
    return n, s, m2, mn, mx


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _grid_cell_ids_nb(ax, ay, x_edges, y_edges):
        nx = x_edges.shape[0] - 1
        ny = y_edges.shape[0] - 1
        inv_wx = nx / (x_edges[nx] - x_edges[0])
        inv_wy = ny / (y_edges[ny] - y_edges[0])
        out = np.empty(ax.shape[0], np.int64)
        for i in range(ax.shape[0]):
            x = ax[i]
            y = ay[i]
            if x < x_edges[0] or x >= x_edges[nx] or y < y_edges[0] or y >= y_edges[ny]:
                out[i] = -1
                continue
            # fast guess assuming equal widths, then fix against true edges
            cx = int((x - x_edges[0]) * inv_wx)
            if cx > nx - 1:
                cx = nx - 1
            while cx > 0 and x < x_edges[cx]:
                cx -= 1
            while cx < nx - 1 and x >= x_edges[cx + 1]:
                cx += 1
            cy = int((y - y_edges[0]) * inv_wy)
            if cy > ny - 1:
                cy = ny - 1
            while cy > 0 and y < y_edges[cy]:
                cy -= 1
            while cy < ny - 1 and y >= y_edges[cy + 1]:
                cy += 1
            out[i] = cy * nx + cx
        return out

    @njit(cache=True)
    def _region_mask_nb(ax, ay, x_lo, x_hi, y_lo, y_hi):
        out = np.empty(ax.shape[0], np.bool_)
        for i in range(ax.shape[0]):
            out[i] = (
                ax[i] >= x_lo and ax[i] <= x_hi and ay[i] >= y_lo and ay[i] <= y_hi
            )
        return out

    @njit(cache=True)
    def _group_moments_nb(cells, values, n_cells):
        n = np.zeros(n_cells, np.int64)
        s = np.zeros(n_cells, np.float64)
        mean = np.zeros(n_cells, np.float64)
        m2 = np.zeros(n_cells, np.float64)
        mn = np.full(n_cells, np.inf)
        mx = np.full(n_cells, -np.inf)
        for i in range(cells.shape[0]):
            c = cells[i]
            v = values[i]
            n[c] += 1
            s[c] += v
            d = v - mean[c]
            mean[c] += d / n[c]
            m2[c] += d * (v - mean[c])
            if v < mn[c]:
                mn[c] = v
            if v > mx[c]:
                mx[c] = v
        return n, s, m2, mn, mx

    def grid_cell_ids_numba(ax, ay, x_edges, y_edges):
        return _grid_cell_ids_nb(ax, ay, x_edges, y_edges)

    def region_mask_numba(ax, ay, x_lo, x_hi, y_lo, y_hi):
        return _region_mask_nb(ax, ay, x_lo, x_hi, y_lo, y_hi)

    def group_moments_numba(cells, values, n_cells):
        return _group_moments_nb(cells, values, n_cells)

    grid_cell_ids = grid_cell_ids_numba
    region_mask = region_mask_numba
    group_moments = group_moments_numba
else:
    grid_cell_ids = grid_cell_ids_numpy
    region_mask = region_mask_numpy
    group_moments = group_moments_numpy


def merge_moments(n_a, s_a, m2_a, mn_a, mx_a, n_b, s_b, m2_b, mn_b, mx_b):
    """Combine two per-cell moment sets (Chan et al. parallel update).

    Vectorized over cells; safe when either side has zero-count cells.
    """
    n = n_a + n_b
    s = s_a + s_b
    mean_a = np.divide(s_a, n_a, out=np.zeros_like(s_a), where=n_a > 0)
    mean_b = np.divide(s_b, n_b, out=np.zeros_like(s_b), where=n_b > 0)
    delta = mean_b - mean_a
    cross = np.divide(
        delta * delta * n_a * n_b, n, out=np.zeros_like(s_a), where=n > 0
    )
    m2 = m2_a + m2_b + cross
    return n, s, m2, np.minimum(mn_a, mn_b), np.maximum(mx_a, mx_b)
