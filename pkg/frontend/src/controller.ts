import { ApiClient } from './api.js';
import type { IndexStats, QueryResponse } from './types.js';
import {
  Domain,
  PanDirection,
  ViewportState,
  initialViewport,
  pan,
  toQuery,
  zoom,
} from './viewport.js';

export interface HistoryEntry {
  seq: number;
  view: ViewportState;
  ioReads: number;
  elapsedMs: number;
}

export interface ControllerEvents {
  onResult?(res: QueryResponse, view: ViewportState): void;
  onIndexStats?(stats: IndexStats): void;
  onHistory?(history: HistoryEntry[]): void;
  onError?(err: unknown): void;
}

const DRAG_DEBOUNCE_MS = 100;

/** Drives the exploration session: every settled gesture issues exactly one
 * query. One request is in flight at a time; gestures arriving meanwhile
 * replace the single queued viewport and are sent after the response.
 * Responses for superseded viewports are discarded by sequence number. */
export class ExplorerController {
  view: ViewportState;
  history: HistoryEntry[] = [];

  private seq = 0;
  private appliedSeq = 0;
  private inFlight = false;
  private pending: ViewportState | null = null;
  private dragTimer: ReturnType<typeof setTimeout> | null = null;
  private waiters: (() => void)[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    readonly domain: Domain,
    private readonly events: ControllerEvents = {},
    view?: ViewportState,
  ) {
    this.view = view ?? initialViewport(domain);
  }

  /** Resolves once no request is in flight and nothing is queued. */
  idle(): Promise<void> {
    if (!this.inFlight && this.pending === null && this.dragTimer === null) {
      return Promise.resolve();
    }
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  pan(direction: PanDirection, fraction = 0.1): void {
    this.submit(pan(this.view, direction, fraction, this.domain));
  }

  zoom(factor: number, focal?: { x: number; y: number }): void {
    const f = focal ?? {
      x: (this.view.ix.lo + this.view.ix.hi) / 2,
      y: (this.view.iy.lo + this.view.iy.hi) / 2,
    };
    this.submit(zoom(this.view, factor, f, this.domain));
  }

  /** Continuous drag: viewport updates are debounced so only the settled
   * position issues a query. */
  drag(direction: PanDirection, fraction: number): void {
    this.view = pan(this.view, direction, fraction, this.domain);
    if (this.dragTimer !== null) clearTimeout(this.dragTimer);
    this.dragTimer = setTimeout(() => {
      this.dragTimer = null;
      this.submit(this.view);
    }, DRAG_DEBOUNCE_MS);
  }

  setEpsMax(epsMax: number): void {
    this.submit({ ...this.view, epsMax });
  }

  setGamma(gamma: number): void {
    this.submit({ ...this.view, gamma });
  }

  setAggregates(aggs: ViewportState['aggs']): void {
    this.submit({ ...this.view, aggs });
  }

  setOverlays(overlays: ViewportState['overlays']): void {
    this.view = { ...this.view, overlays };
  }

  /** Re-issue a past viewport (history sidebar click). */
  replay(entry: HistoryEntry): void {
    this.submit({ ...entry.view });
  }

  /** Issue the current viewport (first load). */
  refresh(): void {
    this.submit(this.view);
  }

  private submit(view: ViewportState): void {
    this.view = view;
    if (this.inFlight) {
      this.pending = view; // queued locally, sent after the response
      return;
    }
    void this.send(view);
  }

  private async send(view: ViewportState): Promise<void> {
    const mySeq = ++this.seq;
    this.inFlight = true;
    try {
      const res = await this.api.query(this.sessionId, toQuery(view));
      if (mySeq > this.appliedSeq) {
        this.appliedSeq = mySeq;
        this.history.push({
          seq: mySeq,
          view,
          ioReads: res.stats.io_reads,
          elapsedMs: res.stats.elapsed_ms,
        });
        this.events.onResult?.(res, view);
        this.events.onHistory?.(this.history);
        if (view.overlays.tiles) {
          const stats = await this.api.indexStats(this.sessionId);
          this.events.onIndexStats?.(stats);
        }
      }
    } catch (err) {
      this.events.onError?.(err);
    } finally {
      this.inFlight = false;
      const next = this.pending;
      this.pending = null;
      if (next !== null) {
        void this.send(next);
      } else {
        const waiters = this.waiters;
        this.waiters = [];
        for (const w of waiters) w();
      }
    }
  }
}
