import { describe, expect, it } from 'vitest';

import { applyEvent, buildView, chartPoints, emptyView, formatMetric } from '../src/state.js';
import { RunEvent, SampleEventData, SummaryEventData } from '../src/types.js';

function sampleEvent(i: number, total = 5, f1 = 0.5 + i * 0.1): SampleEventData {
  return {
    type: 'sample',
    index: i,
    id: `s${i}`,
    f1_pre: f1,
    f1_post: f1,
    status: 'Ok',
    completed: i + 1,
    total,
    progress: (i + 1) / total,
    macro_f1_pre: f1,
    macro_f1_post: f1,
  };
}

function summaryEvent(): SummaryEventData {
  return {
    type: 'summary',
    run_id: 'r',
    total: 5,
    status_counts: { Ok: 5, ReviewFailed: 0, Failed: 0, SkippedEmptyGold: 0 },
    macro_pre: { precision: 1, recall: 1, f1: 0.9 },
    macro_post: { precision: 1, recall: 1, f1: 0.95 },
    micro_pre: { precision: 1, recall: 1, f1: 0.9 },
    micro_post: { precision: 1, recall: 1, f1: 0.95 },
  };
}

function fiveSampleRun(): RunEvent[] {
  const events: RunEvent[] = [];
  for (let i = 0; i < 5; i++) events.push(sampleEvent(i));
  events.push(summaryEvent());
  return events;
}

describe('run view', () => {
  it('accumulates one row and one chart point per sample event', () => {
    const view = buildView(fiveSampleRun());
    expect(view.rows).toHaveLength(5);
    expect(chartPoints(view)).toHaveLength(5);
    expect(view.completed).toBe(5);
    expect(view.progress).toBe(1);
    expect(view.summary).not.toBeNull();
    expect(view.summary?.macro_post?.f1).toBe(0.95);
  });

  it('copies all numbers verbatim from events, no recomputation', () => {
    const events = fiveSampleRun();
    const view = buildView(events);
    const last = events[4] as SampleEventData;
    expect(view.macroF1Pre).toBe(last.macro_f1_pre);
    expect(view.macroF1Post).toBe(last.macro_f1_post);
    expect(view.progress).toBe(last.progress);
    expect(view.rows[2].f1Post).toBe((events[2] as SampleEventData).f1_post);
  });

  it('replay reconstructs the identical view (reload mid-run)', () => {
    const events = fiveSampleRun();
    // incremental consumption, as during a live run
    let live = emptyView();
    for (const e of events.slice(0, 3)) live = applyEvent(live, e);
    // a reload receives the same first three events as replay
    const replayed = buildView(events.slice(0, 3));
    expect(replayed).toEqual(live);
    // and the complete stream still matches after resuming
    for (const e of events.slice(3)) live = applyEvent(live, e);
    expect(buildView(events)).toEqual(live);
  });

  it('failed samples contribute a row but no chart point', () => {
    const failed: SampleEventData = {
      ...sampleEvent(0),
      f1_pre: null,
      f1_post: null,
      status: 'Failed',
    };
    const view = buildView([failed, sampleEvent(1)]);
    expect(view.rows).toHaveLength(2);
    expect(chartPoints(view)).toHaveLength(1);
  });

  it('falls back to pre-review f1 when no post value exists', () => {
    const preOnly: SampleEventData = { ...sampleEvent(0), f1_post: null, f1_pre: 0.25 };
    const view = buildView([preOnly]);
    expect(chartPoints(view)).toEqual([{ order: 1, f1: 0.25 }]);
  });

  it('formats metrics to four decimals with a dash for missing', () => {
    expect(formatMetric(0.507)).toBe('0.5070');
    expect(formatMetric(null)).toBe('-');
    expect(formatMetric(undefined)).toBe('-');
  });
});
