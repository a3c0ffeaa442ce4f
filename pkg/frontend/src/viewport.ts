import type { AggregateSpec, Interval, QueryRequest } from './types.js';

export interface Domain {
  x_lo: number;
  x_hi: number;
  y_lo: number;
  y_hi: number;
}

export type PanDirection = 'east' | 'west' | 'north' | 'south';

export const EPS_CHOICES = [0.01, 0.02, 0.05, 0.1] as const;
export const GAMMA_CHOICES = [0.9, 0.95, 0.99] as const;

/** The analyst-facing state: current view window, chosen aggregates,
 * accuracy knobs, and overlay toggles. Viewport coordinates are the data
 * coordinates (the view-to-screen mapping is a plain affine transform). */
export interface ViewportState {
  ix: Interval;
  iy: Interval;
  aggs: AggregateSpec[];
  epsMax: number;
  gamma: number;
  overlays: { tiles: boolean; statusColors: boolean; ioCounter: boolean };
}

export function initialViewport(domain: Domain, fraction = 0.1): ViewportState {
  const w = (domain.x_hi - domain.x_lo) * fraction;
  const h = (domain.y_hi - domain.y_lo) * fraction;
  const cx = (domain.x_lo + domain.x_hi) / 2;
  const cy = (domain.y_lo + domain.y_hi) / 2;
  return {
    ix: { lo: cx - w / 2, hi: cx + w / 2 },
    iy: { lo: cy - h / 2, hi: cy + h / 2 },
    aggs: [{ func: 'count', attribute: null }],
    epsMax: 0.05,
    gamma: 0.95,
    overlays: { tiles: true, statusColors: true, ioCounter: true },
  };
}

function clampShift(iv: Interval, delta: number, lo: number, hi: number): Interval {
  const width = iv.hi - iv.lo;
  let next = iv.lo + delta;
  next = Math.min(Math.max(next, lo), hi - width);
  return { lo: next, hi: next + width };
}

/** Shift the window by `fraction` of its width/height; clamped to the domain. */
export function pan(
  state: ViewportState,
  direction: PanDirection,
  fraction: number,
  domain: Domain,
): ViewportState {
  const dx =
    direction === 'east' ? fraction : direction === 'west' ? -fraction : 0;
  const dy =
    direction === 'north' ? fraction : direction === 'south' ? -fraction : 0;
  return {
    ...state,
    ix: clampShift(state.ix, dx * (state.ix.hi - state.ix.lo), domain.x_lo, domain.x_hi),
    iy: clampShift(state.iy, dy * (state.iy.hi - state.iy.lo), domain.y_lo, domain.y_hi),
  };
}

function scaleAbout(iv: Interval, factor: number, focal: number, lo: number, hi: number): Interval {
  let next_lo = focal + (iv.lo - focal) * factor;
  let next_hi = focal + (iv.hi - focal) * factor;
  const width = Math.min(next_hi - next_lo, hi - lo);
  next_lo = Math.min(Math.max(next_lo, lo), hi - width);
  next_hi = next_lo + width;
  return { lo: next_lo, hi: next_hi };
}

/** Contract (factor < 1) or expand (factor > 1) the window about a focal
 * point in data coordinates, clamped to the domain. */
export function zoom(
  state: ViewportState,
  factor: number,
  focal: { x: number; y: number },
  domain: Domain,
): ViewportState {
  return {
    ...state,
    ix: scaleAbout(state.ix, factor, focal.x, domain.x_lo, domain.x_hi),
    iy: scaleAbout(state.iy, factor, focal.y, domain.y_lo, domain.y_hi),
  };
}

export function toQuery(state: ViewportState, includePoints = true): QueryRequest {
  return {
    ix: { ...state.ix },
    iy: { ...state.iy },
    aggs: state.aggs.map((a) => ({ ...a })),
    eps_max: state.epsMax,
    gamma: state.gamma,
    include_points: includePoints,
  };
}

export function sameWindow(a: ViewportState, b: ViewportState): boolean {
  return (
    a.ix.lo === b.ix.lo && a.ix.hi === b.ix.hi &&
    a.iy.lo === b.iy.lo && a.iy.hi === b.iy.hi
  );
}
