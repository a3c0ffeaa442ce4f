import { ApiClient } from './api.js';
import { ExplorerController, HistoryEntry } from './controller.js';
import {
  buildResultPanel,
  buildTileOverlay,
  drawScene,
  OverlayRect,
} from './render.js';
import type { IndexStats, QueryResponse } from './types.js';
import { EPS_CHOICES, GAMMA_CHOICES, ViewportState } from './viewport.js';

const BADGE_COLORS: Record<string, string> = {
  exact: '#2e7d32',
  ok: '#2e7d32',
  over: '#c62828',
  error: '#757575',
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const base = params.get('api') ?? 'http://127.0.0.1:8787';
  const api = new ApiClient(base);

  const datasetPath = params.get('dataset');
  if (!datasetPath) {
    el('status').textContent =
      'pass ?dataset=/abs/path.csv[&attrs=x,y,a2,...][&api=http://host:port]';
    return;
  }
  const names = (params.get('attrs') ?? 'x,y,a2,a3,a4,a5,a6,a7,a8,a9').split(',');
  const datasetId = await api.createDataset({
    file_path: datasetPath,
    attributes: names.map((name) => ({ name })),
    axis_x: 0,
    axis_y: 1,
  });
  const lo = Number(params.get('lo') ?? 0);
  const hi = Number(params.get('hi') ?? 1000);
  const sessionId = await api.createSession({
    dataset_id: datasetId,
    engine: { min_batch: 10 },
    init: { bounds: [lo, hi, lo, hi], grid_x: 50, grid_y: 50 },
  });
  const domain = { x_lo: lo, x_hi: hi, y_lo: lo, y_hi: hi };

  const canvas = el<HTMLCanvasElement>('scatter');
  const ctx = canvas.getContext('2d');
  let lastResponse: QueryResponse | null = null;
  let lastOverlay: OverlayRect[] = [];
  let lastView: ViewportState | null = null;

  const repaint = () => {
    if (ctx && lastView) {
      drawScene(ctx, canvas.width, canvas.height, lastView,
        lastResponse?.points, lastOverlay);
    }
  };

  const controller = new ExplorerController(api, sessionId, domain, {
    onResult(res: QueryResponse, view: ViewportState) {
      lastResponse = res;
      lastView = view;
      const panel = buildResultPanel(res, view.epsMax);
      const rows = panel.bars.map((b) => {
        const color = BADGE_COLORS[b.badge];
        const left = (100 * (b.center - b.halfWidth)).toFixed(1);
        const width = Math.max(0.5, 200 * b.halfWidth).toFixed(1);
        return `
          <div class="agg">
            <span class="label">${b.label}</span>
            <span class="value">${b.text}</span>
            <span class="badge" style="background:${color}">${b.badgeText}</span>
            <div class="track"><div class="ci" style="left:${left}%;width:${width}%"></div></div>
          </div>`;
      });
      el('aggs').innerHTML = rows.join('');
      el('strip').textContent =
        `io_reads ${panel.strip.ioReads} | iterations ${panel.strip.iterations} | ` +
        `${panel.strip.elapsedMs.toFixed(1)} ms | tiles ${panel.strip.tilesFull}F/` +
        `${panel.strip.tilesPartial}P | splits ${panel.strip.tilesSplit}`;
      el('status').textContent =
        `view x[${view.ix.lo.toFixed(1)}, ${view.ix.hi.toFixed(1)}] ` +
        `y[${view.iy.lo.toFixed(1)}, ${view.iy.hi.toFixed(1)}]`;
      repaint();
    },
    onIndexStats(stats: IndexStats) {
      if (lastView) {
        const attr = lastView.aggs.find((a) => a.attribute !== null)?.attribute ?? null;
        lastOverlay = buildTileOverlay(stats, lastView, attr);
        repaint();
      }
    },
    onHistory(history: HistoryEntry[]) {
      el('history').innerHTML = history
        .slice(-20)
        .map(
          (h) =>
            `<li data-seq="${h.seq}">#${h.seq} io ${h.ioReads} (${h.elapsedMs.toFixed(0)} ms)</li>`,
        )
        .join('');
    },
    onError(err) {
      el('status').textContent = String(err);
    },
  });

  controller.view.aggs = [
    { func: 'count', attribute: null },
    { func: 'sum', attribute: 2 },
    { func: 'mean', attribute: 3 },
  ];

  const epsSelect = el<HTMLSelectElement>('eps');
  epsSelect.innerHTML = EPS_CHOICES.map(
    (e) => `<option value="${e}" ${e === 0.05 ? 'selected' : ''}>${e * 100}%</option>`,
  ).join('') + '<option value="custom">custom…</option>';
  epsSelect.onchange = () => {
    const v = epsSelect.value === 'custom'
      ? Number(prompt('eps_max in [0,1)', '0.03') ?? 0.05)
      : Number(epsSelect.value);
    controller.setEpsMax(v);
  };

  const gammaSelect = el<HTMLSelectElement>('gamma');
  gammaSelect.innerHTML = GAMMA_CHOICES.map(
    (g) => `<option value="${g}" ${g === 0.95 ? 'selected' : ''}>${g}</option>`,
  ).join('');
  gammaSelect.onchange = () => controller.setGamma(Number(gammaSelect.value));

  el('history').onclick = (ev) => {
    const li = (ev.target as HTMLElement).closest('li');
    if (li) {
      const seq = Number(li.dataset['seq']);
      const entry = controller.history.find((h) => h.seq === seq);
      if (entry) controller.replay(entry);
    }
  };

  document.querySelectorAll<HTMLButtonElement>('[data-pan]').forEach((btn) => {
    btn.onclick = () => controller.pan(btn.dataset['pan'] as never, 0.1);
  });
  el<HTMLButtonElement>('zoom-in').onclick = () => controller.zoom(0.5);
  el<HTMLButtonElement>('zoom-out').onclick = () => controller.zoom(2);
  document.querySelectorAll<HTMLInputElement>('[data-overlay]').forEach((box) => {
    box.onchange = () =>
      controller.setOverlays({
        ...controller.view.overlays,
        [box.dataset['overlay'] as 'tiles']: box.checked,
      });
  });
  window.addEventListener('keydown', (ev) => {
    const map: Record<string, () => void> = {
      ArrowRight: () => controller.pan('east'),
      ArrowLeft: () => controller.pan('west'),
      ArrowUp: () => controller.pan('north'),
      ArrowDown: () => controller.pan('south'),
      '+': () => controller.zoom(0.5),
      '-': () => controller.zoom(2),
    };
    map[ev.key]?.();
  });

  controller.refresh();
}

boot().catch((err) => {
  el('status').textContent = String(err);
});
