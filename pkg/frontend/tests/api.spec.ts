import { describe, expect, it } from 'vitest';

import { newToken, pollUntilSettled, ServiceClient, ServiceError } from '../src/api.js';
import { SessionView } from '../src/types.js';
import rrFixture from './fixtures/asia_round_robin.json';
import { FakeService, instantSleep, RoundRobinFixture } from './fake_service.js';

const fixture = rrFixture as unknown as RoundRobinFixture;

function clientFor(fake: FakeService): ServiceClient {
  return new ServiceClient('http://svc', fake.fetchFn);
}

describe('newToken', () => {
  it('never repeats', () => {
    const seen = new Set<string>();
    for (let i = 0; i < 1000; i += 1) seen.add(newToken());
    expect(seen.size).toBe(1000);
  });
});

describe('ServiceClient', () => {
  it('posts session requests as JSON and returns the parsed view', async () => {
    const fake = new FakeService(fixture);
    const view = await clientFor(fake).createSession({ network: 'asia', seed: 0 });
    expect(view.id).toBe(fake.sessionId);
    expect(view.status).toBe('fitting');
    const req = fake.requests[0];
    expect(req.method).toBe('POST');
    expect(req.path).toBe('/sessions');
    expect(req.body).toEqual({ network: 'asia', seed: 0 });
  });

  it('tolerates a trailing slash in the base url', async () => {
    const fake = new FakeService(fixture);
    const client = new ServiceClient('http://svc/', fake.fetchFn);
    const view = await client.getState(fake.sessionId);
    expect(view.round).toBe(0);
    expect(fake.requests[0].path).toBe(`/sessions/${fake.sessionId}`);
  });

  it('surfaces the service detail message on errors', async () => {
    const fake = new FakeService(fixture);
    const err = await clientFor(fake)
      .createSession({ network: 'nope' })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).status).toBe(400);
    expect((err as ServiceError).message).toContain('unknown network nope');
  });

  it('falls back to a generic message when the error body is not JSON', async () => {
    const fetchFn = async () => new Response('oops', { status: 500 });
    const err = await new ServiceClient('http://svc', fetchFn)
      .getState('x')
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).message).toContain('500');
  });

  it('treats delete as fire and forget', async () => {
    const fake = new FakeService(fixture);
    await expect(clientFor(fake).deleteSession(fake.sessionId)).resolves.toBeUndefined();
  });

  it('rejects unknown sessions with a 404', async () => {
    const fake = new FakeService(fixture);
    const err = await clientFor(fake).getState('missing').catch((e: unknown) => e);
    expect((err as ServiceError).status).toBe(404);
  });
});

describe('pollUntilSettled', () => {
  it('keeps polling while the session reports fitting', async () => {
    const base = fixture.states[0];
    const queue: SessionView[] = [
      { ...base, status: 'fitting' },
      { ...base, status: 'fitting' },
      base,
    ];
    let polls = 0;
    const fetchFn = async () => {
      polls += 1;
      return new Response(JSON.stringify(queue.shift()), { status: 200 });
    };
    const seen: string[] = [];
    const view = await pollUntilSettled(new ServiceClient('http://svc', fetchFn), base.id, {
      sleep: instantSleep,
      onView: (v) => seen.push(v.status),
    });
    expect(polls).toBe(3);
    expect(view.status).toBe('awaiting-choice');
    expect(seen).toEqual(['fitting', 'fitting', 'awaiting-choice']);
  });
});
