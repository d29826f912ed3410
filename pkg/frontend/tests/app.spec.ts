import { beforeEach, describe, expect, it, vi } from 'vitest';

import { FetchLike, ServiceClient } from '../src/api.js';
import { App, initApp } from '../src/app.js';
import { SessionView } from '../src/types.js';
import rrFixture from './fixtures/asia_round_robin.json';
import studyFixture from './fixtures/asia_study_view.json';
import { FakeService, instantSleep, RoundRobinFixture } from './fake_service.js';

const fixture = rrFixture as unknown as RoundRobinFixture;
const studyView = studyFixture as unknown as SessionView;

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '';
  location.hash = '';
  root = document.createElement('div');
  document.body.appendChild(root);
});

function makeApp(fetchFn: FetchLike, host: HTMLElement = root): App {
  const client = new ServiceClient('http://svc', fetchFn);
  return initApp(host, client, { sleep: instantSleep, pollIntervalMs: 0 });
}

function startSession(app: App): void {
  const reveal = root.querySelector<HTMLInputElement>('#reveal')!;
  reveal.checked = true;
  root.querySelector('form')!.dispatchEvent(new Event('submit', { cancelable: true }));
}

async function settled(app: App): Promise<void> {
  await vi.waitFor(() => {
    if (app.busy) throw new Error('still busy');
  });
}

function statusLine(host: HTMLElement = root): string {
  return host.querySelector('.status-line')!.textContent ?? '';
}

describe('App', () => {
  it('starts a session and polls until the first choice', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);

    expect(fake.requests[0]).toMatchObject({
      method: 'POST',
      path: '/sessions',
      body: { network: 'asia', seed: 0, reveal_truth: true },
    });
    expect(statusLine()).toContain('asia seed 0');
    expect(statusLine()).toContain('round 0/4');
    expect(statusLine()).toContain('awaiting-choice');
    expect(location.hash).toContain(`sid=${fake.sessionId}`);
    expect(root.querySelectorAll('.node').length).toBe(8);
    expect(root.querySelectorAll('.timeline li').length).toBe(0);
    expect(root.querySelectorAll('.metric').length).toBe(3);
  });

  it('click node, read the card, intervene, watch the round land', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);

    root
      .querySelector('.node[data-name="bronc"]')!
      .dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(root.querySelector('.card h3')!.textContent).toBe('bronc');

    root.querySelector<HTMLButtonElement>('.card .intervene')!.click();
    await settled(app);

    expect(statusLine()).toContain('round 1/4');
    const items = [...root.querySelectorAll('.timeline li')].map((li) => li.textContent);
    expect(items).toEqual(['round 1: bronc']);
  });

  it('a double click consumes a single round', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);

    root
      .querySelector('.node[data-name="bronc"]')!
      .dispatchEvent(new MouseEvent('click', { bubbles: true }));
    const btn = root.querySelector<HTMLButtonElement>('.card .intervene')!;
    btn.click();
    btn.click();
    await settled(app);

    expect(statusLine()).toContain('round 1/4');
    const posts = fake.requests.filter((r) => r.path.endsWith('/interventions'));
    expect(posts.length).toBe(1);
  });

  it('never sends a name the session does not know', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);

    await app.submitChoice('not-a-node');
    const posts = fake.requests.filter((r) => r.path.endsWith('/interventions'));
    expect(posts.length).toBe(0);
    expect(root.querySelector('.error')!.textContent).toBe('');
  });

  it('zero requested rounds is explained, not sent', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);

    root.querySelector<HTMLButtonElement>('#handoff')!.click();
    await settled(app);
    expect(root.querySelector('.auto-notice')!.textContent).toContain('no rounds requested');
    expect(fake.requests.some((r) => r.path.endsWith('/auto'))).toBe(false);
  });

  it('handing off the budget streams chips and ends with the banner', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);

    root.querySelector<HTMLInputElement>('#auto-rounds')!.value = '4';
    root.querySelector<HTMLButtonElement>('#handoff')!.click();
    await settled(app);

    expect(statusLine()).toContain('round 4/4');
    expect(statusLine()).toContain('done');
    const chips = [...root.querySelectorAll('.chips .chip')].map((c) => c.textContent);
    expect(chips).toEqual(fixture.steps.map((s) => s.target));
    expect(root.querySelector('.banner')!.textContent).toBe(
      'run complete: the round budget is spent',
    );
    expect(root.querySelector<HTMLButtonElement>('#handoff')!.disabled).toBe(true);

    root
      .querySelector('.node[data-name="asia"]')!
      .dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(root.querySelector<HTMLButtonElement>('.card .intervene')!.disabled).toBe(true);
  });

  it('a reload resumes the same session from the url hash', async () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    startSession(app);
    await settled(app);
    await app.submitChoice('bronc');
    await settled(app);

    const other = document.createElement('div');
    document.body.appendChild(other);
    const twin = makeApp(fake.fetchFn, other);
    await settled(twin);

    expect(statusLine(other)).toBe(statusLine(root));
    expect(other.querySelector('svg')!.innerHTML).toBe(root.querySelector('svg')!.innerHTML);
  });

  it('surfaces service rejections and reuses the token on retry', async () => {
    const fake = new FakeService(fixture);
    let failNext = true;
    let failedToken: string | null = null;
    const flaky: FetchLike = async (url, init) => {
      if (failNext && url.endsWith('/interventions')) {
        failNext = false;
        failedToken = JSON.parse(String(init?.body)).token;
        return new Response(JSON.stringify({ detail: 'round already running' }), { status: 409 });
      }
      return fake.fetchFn(url, init);
    };
    const app = makeApp(flaky);
    startSession(app);
    await settled(app);

    await app.submitChoice('bronc');
    await settled(app);
    expect(root.querySelector('.error')!.textContent).toBe('service: round already running');
    expect(statusLine()).toContain('round 0/4');

    await app.submitChoice('bronc');
    await settled(app);
    expect(root.querySelector('.error')!.textContent).toBe('');
    expect(statusLine()).toContain('round 1/4');

    const posts = fake.requests.filter((r) => r.path.endsWith('/interventions'));
    expect(posts.length).toBe(1);
    expect(failedToken).not.toBeNull();
    expect(posts[0].body.token).toBe(failedToken);
  });

  it('shows the failure reason when a session dies', async () => {
    const dead: SessionView = {
      ...fixture.states[0],
      status: 'failed',
      error: 'distribution fit diverged',
    };
    const fetchFn: FetchLike = async () =>
      new Response(JSON.stringify(dead), { status: 200 });
    const app = makeApp(fetchFn);
    await app.resume(dead.id);
    await settled(app);
    expect(root.querySelector('.error')!.textContent).toContain(
      'session failed: distribution fit diverged',
    );
  });

  it('study sessions carry no metrics to hide or leak', () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    app.view = studyView;
    app.render();
    expect(root.querySelectorAll('.metric').length).toBe(0);
    expect(root.querySelector('.metrics')!.textContent).toBe('');
    expect(studyView.truth).toBeUndefined();
    expect(studyView.metrics).toBeUndefined();
  });

  it('the threshold slider prunes the drawn graph live', () => {
    const fake = new FakeService(fixture);
    const app = makeApp(fake.fetchFn);
    app.view = studyView;
    app.render();
    const before = root.querySelectorAll('.edge').length;
    const slider = root.querySelector<HTMLInputElement>('#threshold')!;
    slider.value = '0.99';
    slider.dispatchEvent(new Event('input'));
    expect(root.querySelector('.slider-value')!.textContent).toBe('0.99');
    const after = root.querySelectorAll('.edge').length;
    expect(before).toBe(5);
    expect(after).toBeLessThan(before);
  });
});
