import type {
  AggregateResult,
  IndexStats,
  QueryResponse,
  ScatterPoints,
  TileStatus,
} from './types.js';
import type { ViewportState } from './viewport.js';

/** Pure view models, kept separate from canvas/DOM so they are testable.
 * All bar geometry is expressed as fractions of the panel width. */

export interface CiBarModel {
  label: string;
  text: string;            // formatted value with CI, e.g. "12.3k ± 120"
  center: number;          // 0..1 position of the estimate in the bar track
  halfWidth: number;       // 0..1 half extent of the CI around the center
  badge: 'exact' | 'ok' | 'over' | 'error';
  badgeText: string;
}

export interface StatsStripModel {
  ioReads: number;
  iterations: number;
  elapsedMs: number;
  tilesFull: number;
  tilesPartial: number;
  tilesSplit: number;
}

export interface ResultPanelModel {
  bars: CiBarModel[];
  strip: StatsStripModel;
}

const STATUS_COLORS: Record<TileStatus, string> = {
  exact: '#2e7d32',
  approximate: '#f9a825',
  not_available: '#9e9e9e',
};

function fmt(v: number): string {
  if (!isFinite(v)) return String(v);
  const abs = Math.abs(v);
  if (abs >= 1e6) return (v / 1e6).toFixed(2) + 'M';
  if (abs >= 1e4) return (v / 1e3).toFixed(1) + 'k';
  if (abs >= 100) return v.toFixed(1);
  return v.toFixed(3);
}

function aggLabel(a: AggregateResult): string {
  return a.func === 'count' ? 'count' : `${a.func}(a${a.attribute})`;
}

export function buildBar(agg: AggregateResult, epsMax: number): CiBarModel {
  const label = aggLabel(agg);
  if (agg.error !== undefined || agg.value === undefined) {
    return {
      label,
      text: agg.error ?? 'no estimate',
      center: 0.5,
      halfWidth: 0,
      badge: 'error',
      badgeText: 'n/a',
    };
  }
  const lo = agg.ci_lo ?? agg.value;
  const hi = agg.ci_hi ?? agg.value;
  const span = hi - lo;
  // bar track covers the CI with 25% margin either side; zero-width CIs
  // collapse to a tick at the center
  const track = span > 0 ? span * 1.5 : 1;
  const left = lo - (track - span) / 2;
  const center = span > 0 ? (agg.value - left) / track : 0.5;
  const halfWidth = span > 0 ? span / 2 / track : 0;
  const eps = agg.eps_est;
  let badge: CiBarModel['badge'];
  let badgeText: string;
  if (agg.exact) {
    badge = 'exact';
    badgeText = 'exact';
  } else if (eps === null || eps === undefined) {
    badge = 'over';
    badgeText = 'eps inf';
  } else if (eps <= epsMax) {
    badge = 'ok';
    badgeText = `eps ${(eps * 100).toFixed(2)}% <= ${(epsMax * 100).toFixed(0)}%`;
  } else {
    badge = 'over';
    badgeText = `eps ${(eps * 100).toFixed(2)}% > ${(epsMax * 100).toFixed(0)}%`;
  }
  const pm = span > 0 ? ` ± ${fmt(span / 2)}` : '';
  return { label, text: `${fmt(agg.value)}${pm}`, center, halfWidth, badge, badgeText };
}

export function buildResultPanel(res: QueryResponse, epsMax: number): ResultPanelModel {
  return {
    bars: res.aggregates.map((a) => buildBar(a, epsMax)),
    strip: {
      ioReads: res.stats.io_reads,
      iterations: res.stats.sampling_iterations,
      elapsedMs: res.stats.elapsed_ms,
      tilesFull: res.stats.tiles_full,
      tilesPartial: res.stats.tiles_partial,
      tilesSplit: res.stats.tiles_split,
    },
  };
}

export interface OverlayRect {
  x: number;     // canvas-fraction coordinates, 0..1, y grows downward
  y: number;
  w: number;
  h: number;
  color: string;
  filled: boolean;
}

/** Tile boundaries (and status colors) for leaves visible in the viewport. */
export function buildTileOverlay(
  stats: IndexStats,
  view: ViewportState,
  attribute: number | null,
): OverlayRect[] {
  if (!stats.initialized || !stats.tiles) return [];
  const vx = view.ix.hi - view.ix.lo;
  const vy = view.iy.hi - view.iy.lo;
  const out: OverlayRect[] = [];
  for (const t of stats.tiles) {
    if (!t.leaf) continue;
    if (t.x_hi <= view.ix.lo || t.x_lo > view.ix.hi) continue;
    if (t.y_hi <= view.iy.lo || t.y_lo > view.iy.hi) continue;
    const status: TileStatus =
      attribute !== null
        ? (t.status[String(attribute)] ?? 'not_available')
        : t.sampled === t.n_objects
          ? 'exact'
          : t.sampled > 0
            ? 'approximate'
            : 'not_available';
    out.push({
      x: (t.x_lo - view.ix.lo) / vx,
      y: 1 - (t.y_hi - view.iy.lo) / vy, // data y up, canvas y down
      w: (t.x_hi - t.x_lo) / vx,
      h: (t.y_hi - t.y_lo) / vy,
      color: view.overlays.statusColors ? STATUS_COLORS[status] : '#607d8b',
      filled: view.overlays.statusColors,
    });
  }
  return out;
}

/** Minimal slice of CanvasRenderingContext2D the scatter layer needs;
 * tests pass a recording stub. */
export interface Canvas2dLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillStyle: string | unknown;
  strokeStyle: string | unknown;
  globalAlpha: number;
}

export function drawScene(
  ctx: Canvas2dLike,
  width: number,
  height: number,
  view: ViewportState,
  points: ScatterPoints | undefined,
  overlay: OverlayRect[],
): void {
  ctx.clearRect(0, 0, width, height);
  if (view.overlays.tiles) {
    for (const r of overlay) {
      if (r.filled) {
        ctx.globalAlpha = 0.15;
        ctx.fillStyle = r.color;
        ctx.fillRect(r.x * width, r.y * height, r.w * width, r.h * height);
      }
      ctx.globalAlpha = 0.6;
      ctx.strokeStyle = r.color;
      ctx.strokeRect(r.x * width, r.y * height, r.w * width, r.h * height);
    }
  }
  if (points) {
    ctx.globalAlpha = 0.8;
    ctx.fillStyle = '#1565c0';
    const vx = view.ix.hi - view.ix.lo;
    const vy = view.iy.hi - view.iy.lo;
    for (let i = 0; i < points.x.length; i++) {
      const px = ((points.x[i] - view.ix.lo) / vx) * width;
      const py = (1 - (points.y[i] - view.iy.lo) / vy) * height;
      ctx.fillRect(px - 1, py - 1, 2, 2);
    }
  }
  ctx.globalAlpha = 1;
}
