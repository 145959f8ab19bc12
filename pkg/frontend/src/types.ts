// Payload shapes mirrored from the service API. The UI renders these values
// verbatim and never computes metrics on its own.

export interface SampleEventData {
  type: 'sample';
  index: number;
  id: string;
  f1_pre: number | null;
  f1_post: number | null;
  status: string;
  completed: number;
  total: number;
  progress: number;
  macro_f1_pre: number | null;
  macro_f1_post: number | null;
}

export interface MetricTriple {
  precision: number;
  recall: number;
  f1: number;
}

export interface SummaryEventData {
  type: 'summary';
  run_id: string;
  total: number;
  status_counts: Record<string, number>;
  macro_pre: MetricTriple | null;
  macro_post: MetricTriple | null;
  micro_pre: MetricTriple | null;
  micro_post: MetricTriple | null;
}

export type RunEvent = SampleEventData | SummaryEventData;

export interface RunInfo {
  run_id: string;
  state: string;
  created_at: string;
  total_samples: number;
  baseline_f1: number;
  label: string;
  reviewer_mode: boolean;
  workers: number;
  error: string | null;
}

export interface SpanJson {
  label: string;
  start_char: number;
  end_char: number;
}

export interface SpanDocJson {
  plain_text: string;
  spans: SpanJson[];
}

export interface SampleDetail {
  index: number;
  id: string;
  text: string;
  gold: string;
  status: string;
  error_class: string | null;
  reasoning: string | null;
  critique: string | null;
  annotated_doc: SpanDocJson | null;
  final_doc: SpanDocJson | null;
  metrics_pre: Record<string, unknown> | null;
  metrics_post: Record<string, unknown> | null;
}

export interface LogEntryJson {
  timestamp: string;
  run_id: string;
  sample_id: string;
  agent_role: string;
  attempt: number;
  request_system: string;
  request_user: string;
  raw_response: string;
  error_class: string | null;
  http_status: number | null;
}

export interface LogPage {
  entries: LogEntryJson[];
  offset: number;
  total: number;
  warnings: string[];
}
