import {
  cancelRun,
  createRun,
  exportUrl,
  fetchLogPage,
  fetchRunInfo,
  fetchSampleDetail,
  uploadCodebook,
  uploadDataset,
  uploadExamples,
} from './api.js';
import { dataLayer, renderChartSvg } from './chart.js';
import { renderHighlights } from './highlight.js';
import { RunView, buildView, emptyView, formatMetric } from './state.js';
import { subscribeEvents } from './stream.js';
import { LogEntryJson, RunEvent } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const state = {
  runId: null as string | null,
  view: emptyView() as RunView,
  baseline: 0.5,
  selectedIndex: null as number | null,
  logOffset: 0,
  lastChartData: '',
};

// --- configure screen -------------------------------------------------------

async function readFile(input: HTMLInputElement): Promise<string | null> {
  const file = input.files && input.files[0];
  if (!file) return null;
  return file.text();
}

function readModelSpec(prefix: string): Record<string, unknown> {
  return {
    provider_kind: el<HTMLSelectElement>(`${prefix}-kind`).value,
    base_url: el<HTMLInputElement>(`${prefix}-base-url`).value.trim(),
    model_id: el<HTMLInputElement>(`${prefix}-model-id`).value.trim(),
    api_key_ref: el<HTMLInputElement>(`${prefix}-key-ref`).value.trim(),
  };
}

async function startRun(evt: Event): Promise<void> {
  evt.preventDefault();
  const errorBox = el<HTMLSpanElement>('config-error');
  errorBox.textContent = '';
  try {
    const datasetCsv = await readFile(el<HTMLInputElement>('dataset-file'));
    if (!datasetCsv) throw new Error('a dataset CSV is required');
    const dataset = await uploadDataset(datasetCsv);

    const paradigmKind = el<HTMLSelectElement>('paradigm').value;
    const paradigm: Record<string, unknown> = { kind: paradigmKind };
    if (paradigmKind === 'fine_tuned') {
      paradigm.tuned_model_id = el<HTMLInputElement>('tuned-model-id').value.trim();
    }

    const body: Record<string, unknown> = {
      dataset_id: dataset.dataset_id,
      experiment: {
        paradigm,
        label: el<HTMLInputElement>('label').value.trim() || 'Metaphor',
        annotator: readModelSpec('ann'),
        reviewer_mode: el<HTMLInputElement>('reviewer-mode').checked,
      },
      workers: Number(el<HTMLInputElement>('workers').value) || 4,
      baseline_f1: Number(el<HTMLInputElement>('baseline-input').value) || 0.5,
    };
    if (el<HTMLInputElement>('reviewer-mode').checked) {
      (body.experiment as Record<string, unknown>).reviewer = readModelSpec('rev');
    }

    const codebook = await readFile(el<HTMLInputElement>('codebook-file'));
    if (codebook) {
      body.codebook_id = (await uploadCodebook(codebook)).id;
    }
    const examples = await readFile(el<HTMLInputElement>('examples-file'));
    if (examples) {
      body.examples_id = (await uploadExamples(examples)).id;
    }

    const run = await createRun(body);
    window.location.hash = `run=${run.run_id}`;
    watchRun(run.run_id);
  } catch (err) {
    errorBox.textContent = err instanceof Error ? err.message : String(err);
  }
}

// --- monitor screen ----------------------------------------------------------

function renderChart(): void {
  const svg = renderChartSvg(state.view, state.baseline);
  el('chart').innerHTML = svg;
  state.lastChartData = dataLayer(svg);
}

function renderMonitor(): void {
  const view = state.view;
  el('progress-label').textContent = `${view.completed} / ${view.total}`;
  const pct = Math.round(view.progress * 100);
  el('progress-fill').style.width = `${pct}%`;
  el('macro-pre').textContent = formatMetric(view.macroF1Pre);
  el('macro-post').textContent = formatMetric(view.macroF1Post);
  renderChart();

  const tbody = el<HTMLTableSectionElement>('sample-table').querySelector('tbody')!;
  tbody.innerHTML = '';
  for (const row of view.rows) {
    const tr = document.createElement('tr');
    tr.dataset.index = String(row.index);
    if (row.status === 'Failed') tr.classList.add('failed');
    if (row.index === state.selectedIndex) tr.classList.add('selected');
    const cells = [
      String(row.index),
      row.id,
      formatMetric(row.f1Pre),
      formatMetric(row.f1Post),
      row.status,
    ];
    for (const text of cells) {
      const td = document.createElement('td');
      td.textContent = text;
      tr.appendChild(td);
    }
    tr.addEventListener('click', () => selectSample(row.index));
    tbody.appendChild(tr);
  }

  if (view.summary) {
    const link = el<HTMLAnchorElement>('export-link');
    link.href = exportUrl(state.runId!);
    link.hidden = false;
  }
}

async function selectSample(index: number): Promise<void> {
  state.selectedIndex = index;
  if (!state.runId) return;
  try {
    const detail = await fetchSampleDetail(state.runId, index);
    el('detail-body').hidden = false;
    el('detail-title').textContent = `${detail.id} (${detail.status}${detail.error_class ? `: ${detail.error_class}` : ''})`;
    const doc = detail.final_doc ?? detail.annotated_doc;
    el('detail-tagging').innerHTML = doc ? renderHighlights(doc) : '<em>no annotation</em>';
    el('detail-reasoning').textContent = detail.reasoning ?? '-';
    el('detail-critique').textContent = detail.critique ?? '-';
  } catch {
    // outcome not stored yet; the next event will re-trigger selection
  }
  renderMonitor();
}

function onEvents(events: RunEvent[]): void {
  state.view = buildView(events);
  renderMonitor();
  const last = events.filter((e) => e.type === 'sample').pop();
  if (last && last.type === 'sample' && state.selectedIndex === null) {
    void selectSample(last.index);
  }
}

function watchRun(runId: string): void {
  state.runId = runId;
  state.view = emptyView();
  state.selectedIndex = null;
  state.logOffset = 0;
  el('run-id-label').textContent = runId;
  el('monitor').hidden = false;
  el('debug').hidden = false;
  el<HTMLTableSectionElement>('log-table').querySelector('tbody')!.innerHTML = '';

  void fetchRunInfo(runId).then((info) => {
    state.baseline = info.baseline_f1;
    el<HTMLInputElement>('baseline-slider').value = String(info.baseline_f1);
    el('baseline-value').textContent = info.baseline_f1.toFixed(4);
    renderChart();
  });

  const status = el('conn-status');
  subscribeEvents(runId, onEvents, (s) => {
    status.textContent = s;
    status.className = `status-pill status-${s}`;
    if (s === 'done') void loadMoreLog();
  });
}

// --- debug console -------------------------------------------------------------

function logRow(entry: LogEntryJson): HTMLTableRowElement {
  const tr = document.createElement('tr');
  const badge = entry.error_class
    ? `<span class="badge badge-error">${entry.error_class}</span>`
    : '<span class="badge badge-ok">ok</span>';
  const cells = [
    entry.timestamp,
    entry.sample_id,
    entry.agent_role,
    String(entry.attempt),
    entry.http_status === null ? '-' : String(entry.http_status),
  ];
  for (const text of cells) {
    const td = document.createElement('td');
    td.textContent = text;
    tr.appendChild(td);
  }
  const badgeCell = document.createElement('td');
  badgeCell.innerHTML = badge;
  tr.appendChild(badgeCell);
  const respCell = document.createElement('td');
  respCell.className = 'raw-response';
  respCell.textContent = entry.raw_response.slice(0, 400);
  tr.appendChild(respCell);
  return tr;
}

async function loadMoreLog(): Promise<void> {
  if (!state.runId) return;
  const page = await fetchLogPage(state.runId, state.logOffset);
  const tbody = el<HTMLTableSectionElement>('log-table').querySelector('tbody')!;
  for (const entry of page.entries) {
    tbody.appendChild(logRow(entry));
  }
  state.logOffset += page.entries.length;
  el<HTMLButtonElement>('log-more').disabled = state.logOffset >= page.total;
}

// --- wiring -----------------------------------------------------------------------

function init(): void {
  el<HTMLFormElement>('config-form').addEventListener('submit', (e) => void startRun(e));
  el<HTMLSelectElement>('paradigm').addEventListener('change', () => {
    el('tuned-id-row').hidden = el<HTMLSelectElement>('paradigm').value !== 'fine_tuned';
  });
  el<HTMLInputElement>('baseline-slider').addEventListener('input', () => {
    state.baseline = Number(el<HTMLInputElement>('baseline-slider').value);
    el('baseline-value').textContent = state.baseline.toFixed(4);
    // overlay only: the data layer must not change
    const before = state.lastChartData;
    renderChart();
    if (before && before !== state.lastChartData) {
      console.warn('baseline change altered the data layer');
    }
  });
  el<HTMLButtonElement>('cancel-btn').addEventListener('click', () => {
    if (state.runId) void cancelRun(state.runId);
  });
  el<HTMLButtonElement>('log-more').addEventListener('click', () => void loadMoreLog());

  const match = window.location.hash.match(/run=([\w-]+)/);
  if (match) {
    watchRun(match[1]);
  }
}

init();
