import { pollUntilSettled, ServiceClient } from './api.js';
import { ExportBundle, SessionView } from './types.js';

export interface HarnessResult {
  targets: string[];
  finalView: SessionView;
  exportBundle: ExportBundle;
}

/**
 * Automation harness: hand the whole remaining budget to a server-side
 * strategy, stream targets as they land, then export the run artifacts.
 * Used by the hand-off panel and by the parity tests.
 */
export async function runAutoToCompletion(
  client: ServiceClient,
  sessionId: string,
  strategy: string,
  opts: {
    intervalMs?: number;
    sleep?: (ms: number) => Promise<void>;
    onTarget?: (name: string, round: number) => void;
  } = {},
): Promise<HarnessResult> {
  let view = await client.getState(sessionId);
  const seen = view.history.length;
  const remaining = view.rounds_total - view.round;
  if (remaining > 0) {
    view = await client.runAuto(sessionId, strategy, remaining);
  }
  const emitted: string[] = [];
  const emit = (v: SessionView) => {
    for (let i = seen + emitted.length; i < v.history.length; i++) {
      emitted.push(v.history[i]);
      opts.onTarget?.(v.history[i], i + 1);
    }
  };
  emit(view);
  while (view.status === 'fitting' || view.status === 'awaiting-choice') {
    if (view.status === 'awaiting-choice' && view.round >= view.rounds_total) break;
    view = await pollUntilSettled(client, sessionId, {
      intervalMs: opts.intervalMs,
      sleep: opts.sleep,
      onView: emit,
    });
    if (view.status === 'done' || view.status === 'failed') break;
    if (view.round >= view.rounds_total) break;
  }
  if (view.status === 'failed') {
    throw new Error(view.error ?? 'session failed during auto run');
  }
  const exportBundle = await client.exportSession(sessionId);
  return { targets: emitted, finalView: view, exportBundle };
}
