// Pure run-view model. Every field is copied verbatim from service events,
// so replaying the same events always reconstructs the identical view.

import { RunEvent, SampleEventData, SummaryEventData } from './types.js';

export interface SampleRow {
  index: number;
  id: string;
  f1Pre: number | null;
  f1Post: number | null;
  status: string;
}

export interface RunView {
  rows: SampleRow[];
  completed: number;
  total: number;
  progress: number;
  macroF1Pre: number | null;
  macroF1Post: number | null;
  summary: SummaryEventData | null;
}

export function emptyView(): RunView {
  return {
    rows: [],
    completed: 0,
    total: 0,
    progress: 0,
    macroF1Pre: null,
    macroF1Post: null,
    summary: null,
  };
}

export function applyEvent(view: RunView, event: RunEvent): RunView {
  if (event.type === 'summary') {
    return { ...view, summary: event };
  }
  const sample = event as SampleEventData;
  const rows = [...view.rows, {
    index: sample.index,
    id: sample.id,
    f1Pre: sample.f1_pre,
    f1Post: sample.f1_post,
    status: sample.status,
  }];
  return {
    rows,
    completed: sample.completed,
    total: sample.total,
    progress: sample.progress,
    macroF1Pre: sample.macro_f1_pre,
    macroF1Post: sample.macro_f1_post,
    summary: view.summary,
  };
}

export function buildView(events: RunEvent[]): RunView {
  let view = emptyView();
  for (const event of events) {
    view = applyEvent(view, event);
  }
  return view;
}

// Chart points in completion order; samples without a score (failed or
// skipped) contribute no point, matching the service's null f1 values.
export function chartPoints(view: RunView): { order: number; f1: number }[] {
  const points: { order: number; f1: number }[] = [];
  view.rows.forEach((row, i) => {
    const f1 = row.f1Post ?? row.f1Pre;
    if (f1 !== null) {
      points.push({ order: i + 1, f1 });
    }
  });
  return points;
}

export function formatMetric(value: number | null | undefined): string {
  return value === null || value === undefined ? '-' : value.toFixed(4);
}
