// Mirrors the field names published in the service's api_schema.json.
// Nothing here is invented client-side; absent fields stay absent.

export type SessionStatus = 'fitting' | 'awaiting-choice' | 'done' | 'failed';

export interface Metrics {
  shd: number;
  sid: number;
  bsf: number;
}

export interface SessionView {
  id: string;
  status: SessionStatus;
  round: number;
  rounds_total: number;
  batch_per_round: number;
  network: string;
  node_names: string[];
  state_counts: number[];
  descriptions: Record<string, string>;
  history: string[];
  beliefs: number[][];
  fit_completed_at: number | null;
  seed: number;
  error?: string;
  truth?: number[][];
  metrics?: Metrics;
}

export interface ExportBundle {
  id: string;
  files: Record<string, string>;
}

export interface CreateRequest {
  network: string;
  seed?: number;
  reveal_truth?: boolean;
  config?: Record<string, unknown>;
}
