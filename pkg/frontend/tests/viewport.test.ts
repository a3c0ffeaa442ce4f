import { describe, expect, it } from 'vitest';

import {
  Domain,
  initialViewport,
  pan,
  sameWindow,
  toQuery,
  zoom,
} from '../src/viewport.js';

const DOMAIN: Domain = { x_lo: 0, x_hi: 1000, y_lo: 0, y_hi: 1000 };

function view(x0: number, x1: number, y0: number, y1: number) {
  const v = initialViewport(DOMAIN);
  return { ...v, ix: { lo: x0, hi: x1 }, iy: { lo: y0, hi: y1 } };
}

describe('pan', () => {
  it('shifts east by the fraction of the window width', () => {
    const next = pan(view(100, 200, 100, 200), 'east', 0.1, DOMAIN);
    expect(next.ix).toEqual({ lo: 110, hi: 210 });
    expect(next.iy).toEqual({ lo: 100, hi: 200 });
  });

  it('clamps at the domain edge without shrinking the window', () => {
    const next = pan(view(950, 1000, 0, 50), 'east', 0.5, DOMAIN);
    expect(next.ix).toEqual({ lo: 950, hi: 1000 });
    const west = pan(view(0, 50, 0, 50), 'west', 0.5, DOMAIN);
    expect(west.ix).toEqual({ lo: 0, hi: 50 });
  });

  it('north/south move the y interval only', () => {
    const next = pan(view(0, 100, 400, 500), 'north', 0.2, DOMAIN);
    expect(next.ix).toEqual({ lo: 0, hi: 100 });
    expect(next.iy).toEqual({ lo: 420, hi: 520 });
  });
});

describe('zoom', () => {
  it('factor 0.5 at the center halves the width', () => {
    const v = view(100, 300, 100, 300);
    const next = zoom(v, 0.5, { x: 200, y: 200 }, DOMAIN);
    expect(next.ix.hi - next.ix.lo).toBeCloseTo(100);
    expect((next.ix.lo + next.ix.hi) / 2).toBeCloseTo(200);
  });

  it('factor 2 at a corner keeps the corner fixed and quadruples area', () => {
    const v = view(100, 200, 100, 200);
    const next = zoom(v, 2, { x: 100, y: 100 }, DOMAIN);
    expect(next.ix).toEqual({ lo: 100, hi: 300 });
    expect(next.iy).toEqual({ lo: 100, hi: 300 });
    const area = (next.ix.hi - next.ix.lo) * (next.iy.hi - next.iy.lo);
    expect(area).toBeCloseTo(4 * 100 * 100);
  });

  it('zoom-out clamps to the domain', () => {
    const v = view(0, 900, 0, 900);
    const next = zoom(v, 2, { x: 450, y: 450 }, DOMAIN);
    expect(next.ix.lo).toBeGreaterThanOrEqual(0);
    expect(next.ix.hi).toBeLessThanOrEqual(1000);
  });
});

describe('toQuery', () => {
  it('carries the window, aggregates, and accuracy knobs', () => {
    const v = view(10, 20, 30, 40);
    v.aggs = [{ func: 'sum', attribute: 2 }];
    v.epsMax = 0.02;
    v.gamma = 0.99;
    const q = toQuery(v);
    expect(q).toMatchObject({
      ix: { lo: 10, hi: 20 },
      iy: { lo: 30, hi: 40 },
      aggs: [{ func: 'sum', attribute: 2 }],
      eps_max: 0.02,
      gamma: 0.99,
    });
  });

  it('sameWindow compares only the viewport rectangle', () => {
    const a = view(1, 2, 3, 4);
    const b = { ...view(1, 2, 3, 4), epsMax: 0.5 };
    expect(sameWindow(a, b)).toBe(true);
    expect(sameWindow(a, view(1, 2, 3, 5))).toBe(false);
  });
});
