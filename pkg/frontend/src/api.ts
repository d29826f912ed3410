import { CreateRequest, ExportBundle, SessionView } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Error carrying the HTTP status plus the service's detail message. */
export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = 'ServiceError';
  }
}

let tokenCounter = 0;

/** Idempotency token for one intervention attempt; reuse it on retry. */
export function newToken(): string {
  tokenCounter += 1;
  const rand = Math.random().toString(36).slice(2, 10);
  return `ui-${Date.now().toString(36)}-${tokenCounter}-${rand}`;
}

export class ServiceClient {
  private base: string;

  constructor(baseUrl: string, private fetchFn: FetchLike = (...a) => fetch(...a)) {
    this.base = baseUrl.replace(/\/+$/, '');
  }

  createSession(req: CreateRequest): Promise<SessionView> {
    return this.request('POST', '/sessions', req);
  }

  getState(id: string): Promise<SessionView> {
    return this.request('GET', `/sessions/${id}`);
  }

  postIntervention(id: string, target: string, token: string): Promise<SessionView> {
    return this.request('POST', `/sessions/${id}/interventions`, { target, token });
  }

  runAuto(id: string, strategy: string, rounds: number): Promise<SessionView> {
    return this.request('POST', `/sessions/${id}/auto`, { strategy, rounds });
  }

  exportSession(id: string): Promise<ExportBundle> {
    return this.request('GET', `/sessions/${id}/export`);
  }

  deleteSession(id: string): Promise<void> {
    return this.request('DELETE', `/sessions/${id}`).then(() => undefined);
  }

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    if (resp.status === 204) return undefined;
    let payload: any = null;
    try {
      payload = await resp.json();
    } catch {
      // non-JSON body; fall through with the status alone
    }
    if (!resp.ok) {
      const detail =
        payload && typeof payload.detail === 'string'
          ? payload.detail
          : `request failed with status ${resp.status}`;
      throw new ServiceError(resp.status, detail);
    }
    return payload;
  }
}

/**
 * Poll the session until its status leaves "fitting". Each settled view is
 * handed to onView so callers can stream progress.
 */
export async function pollUntilSettled(
  client: ServiceClient,
  id: string,
  opts: {
    intervalMs?: number;
    sleep?: (ms: number) => Promise<void>;
    onView?: (view: SessionView) => void;
  } = {},
): Promise<SessionView> {
  const intervalMs = opts.intervalMs ?? 400;
  const sleep = opts.sleep ?? ((ms) => new Promise((f) => setTimeout(f, ms)));
  for (;;) {
    const view = await client.getState(id);
    opts.onView?.(view);
    if (view.status !== 'fitting') return view;
    await sleep(intervalMs);
  }
}
