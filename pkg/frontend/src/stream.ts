// Event-stream subscription. The service replays the full history on every
// connection, so each (re)connect resets the accumulated event list; the
// view is always rebuilt from exactly one connection's events.

import { RunEvent } from './types.js';

export type StreamStatus = 'connecting' | 'open' | 'reconnecting' | 'done';

export interface Subscription {
  close(): void;
}

export function subscribeEvents(
  runId: string,
  onEvents: (events: RunEvent[]) => void,
  onStatus: (status: StreamStatus) => void,
): Subscription {
  let source: EventSource | null = null;
  let events: RunEvent[] = [];
  let closed = false;
  let retryTimer: number | undefined;

  function connect() {
    if (closed) return;
    onStatus(source === null ? 'connecting' : 'reconnecting');
    events = []; // full replay follows on every connection
    source = new EventSource(`/api/runs/${encodeURIComponent(runId)}/events`);
    source.onopen = () => onStatus('open');
    source.onmessage = (msg) => {
      const event = JSON.parse(msg.data) as RunEvent;
      events.push(event);
      onEvents(events);
      if (event.type === 'summary') {
        onStatus('done');
        source?.close();
        closed = true;
      }
    };
    source.onerror = () => {
      if (closed) return;
      source?.close();
      onStatus('reconnecting');
      retryTimer = window.setTimeout(connect, 1000);
    };
  }

  connect();
  return {
    close() {
      closed = true;
      if (retryTimer !== undefined) window.clearTimeout(retryTimer);
      source?.close();
    },
  };
}
