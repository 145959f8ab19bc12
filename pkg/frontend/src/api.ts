// Thin fetch wrappers over the service API.

import { LogPage, RunInfo, SampleDetail } from './types.js';

async function check(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new Error(`${resp.status}: ${detail}`);
  }
  return resp;
}

export async function uploadText(path: string, content: string): Promise<any> {
  const resp = await check(await fetch(path, { method: 'POST', body: content }));
  return resp.json();
}

export async function uploadDataset(csv: string): Promise<{ dataset_id: string; sample_count: number }> {
  return uploadText('/api/datasets', csv);
}

export async function uploadCodebook(text: string): Promise<{ id: string }> {
  return uploadText('/api/codebooks', text);
}

export async function uploadExamples(csv: string): Promise<{ id: string }> {
  return uploadText('/api/examples', csv);
}

export async function createRun(body: unknown): Promise<{ run_id: string }> {
  const resp = await check(
    await fetch('/api/runs', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    }),
  );
  return resp.json();
}

export async function fetchRunInfo(runId: string): Promise<RunInfo> {
  const resp = await check(await fetch(`/api/runs/${encodeURIComponent(runId)}`));
  return resp.json();
}

export async function fetchSampleDetail(runId: string, index: number): Promise<SampleDetail> {
  const resp = await check(
    await fetch(`/api/runs/${encodeURIComponent(runId)}/samples/${index}`),
  );
  return resp.json();
}

export async function fetchLogPage(runId: string, offset: number, limit = 50): Promise<LogPage> {
  const resp = await check(
    await fetch(`/api/runs/${encodeURIComponent(runId)}/log?offset=${offset}&limit=${limit}`),
  );
  return resp.json();
}

export async function cancelRun(runId: string): Promise<void> {
  await check(await fetch(`/api/runs/${encodeURIComponent(runId)}/cancel`, { method: 'POST' }));
}

export function exportUrl(runId: string): string {
  return `/api/runs/${encodeURIComponent(runId)}/export.csv`;
}
