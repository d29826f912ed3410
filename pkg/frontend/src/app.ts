import { newToken, pollUntilSettled, ServiceClient, ServiceError } from './api.js';
import { renderGraph } from './graph.js';
import { SessionView } from './types.js';

const AUTO_STRATEGIES = ['round_robin', 'random', 'degree_prob', 'git', 'ait', 'cbed'];

export interface AppOptions {
  pollIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export function initApp(root: HTMLElement, client: ServiceClient, opts: AppOptions = {}): App {
  return new App(root, client, opts);
}

/**
 * Single-page session console. All state beyond the DOM lives in the
 * service; the only thing remembered locally is the session id (URL
 * hash), so a reload resumes by refetching the view.
 */
export class App {
  view: SessionView | null = null;
  threshold = 0.5;
  selected: string | null = null;
  lastExport: Record<string, string> | null = null;
  busy = false;

  private pendingToken: string | null = null;
  private els!: Record<string, HTMLElement>;

  constructor(
    private root: HTMLElement,
    private client: ServiceClient,
    private opts: AppOptions = {},
  ) {
    this.buildDom();
    const resumeId = this.storedSessionId();
    if (resumeId) {
      void this.resume(resumeId);
    }
  }

  // --- dom scaffolding ------------------------------------------------------

  private buildDom(): void {
    const h = (tag: string, cls: string, parent: HTMLElement, text = ''): HTMLElement => {
      const el = document.createElement(tag);
      el.className = cls;
      if (text) el.textContent = text;
      parent.appendChild(el);
      return el;
    };
    this.root.textContent = '';

    const form = h('form', 'create-form', this.root) as HTMLFormElement;
    const netInput = document.createElement('input');
    netInput.id = 'network';
    netInput.value = 'asia';
    const seedInput = document.createElement('input');
    seedInput.id = 'seed';
    seedInput.type = 'number';
    seedInput.value = '0';
    const reveal = document.createElement('input');
    reveal.id = 'reveal';
    reveal.type = 'checkbox';
    const start = document.createElement('button');
    start.id = 'start';
    start.type = 'submit';
    start.textContent = 'start session';
    for (const [label, el] of [
      ['network', netInput],
      ['seed', seedInput],
      ['demo mode (show ground truth)', reveal],
    ] as const) {
      const wrap = h('label', 'field', form, label);
      wrap.appendChild(el);
    }
    form.appendChild(start);
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void this.createSession({
        network: netInput.value.trim(),
        seed: Number(seedInput.value) || 0,
        reveal_truth: reveal.checked,
      });
    });

    const status = h('div', 'status-line', this.root);
    const error = h('div', 'error', this.root);
    const banner = h('div', 'banner', this.root);
    const metrics = h('div', 'metrics', this.root);

    const stage = h('div', 'stage', this.root);
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('class', 'graph');
    stage.appendChild(svg);
    const card = h('div', 'card', stage);

    const sliderWrap = h('label', 'slider', this.root, 'edge threshold ');
    const slider = document.createElement('input');
    slider.id = 'threshold';
    slider.type = 'range';
    slider.min = '0';
    slider.max = '1';
    slider.step = '0.01';
    slider.value = '0.5';
    const sliderValue = h('span', 'slider-value', sliderWrap, '0.50');
    sliderWrap.insertBefore(slider, sliderValue);
    slider.addEventListener('input', () => {
      this.threshold = Number(slider.value);
      sliderValue.textContent = this.threshold.toFixed(2);
      this.render();
    });

    const timeline = h('ol', 'timeline', this.root);

    const auto = h('div', 'auto-panel', this.root);
    const strategySel = document.createElement('select');
    strategySel.id = 'strategy';
    for (const s of AUTO_STRATEGIES) {
      const o = document.createElement('option');
      o.value = s;
      o.textContent = s;
      strategySel.appendChild(o);
    }
    const roundsInput = document.createElement('input');
    roundsInput.id = 'auto-rounds';
    roundsInput.type = 'number';
    roundsInput.min = '0';
    roundsInput.value = '0';
    const handoff = document.createElement('button');
    handoff.id = 'handoff';
    handoff.textContent = 'hand off';
    auto.append(strategySel, roundsInput, handoff);
    const autoNotice = h('div', 'auto-notice', auto);
    const chips = h('div', 'chips', auto);
    handoff.addEventListener('click', () => {
      void this.handoffAuto(strategySel.value, Number(roundsInput.value) || 0);
    });

    const exportBtn = document.createElement('button');
    exportBtn.id = 'export';
    exportBtn.textContent = 'export results';
    this.root.appendChild(exportBtn);
    exportBtn.addEventListener('click', () => void this.exportResults());

    this.els = {
      status, error, banner, metrics, card, timeline,
      autoNotice, chips, handoff, exportBtn, slider, sliderValue,
      svg: svg as unknown as HTMLElement,
    };
  }

  // --- session id persistence ----------------------------------------------

  private storedSessionId(): string | null {
    if (typeof location === 'undefined') return null;
    const m = /sid=([0-9a-f]+)/.exec(location.hash);
    return m ? m[1] : null;
  }

  private storeSessionId(id: string): void {
    if (typeof location !== 'undefined') location.hash = `sid=${id}`;
  }

  // --- actions --------------------------------------------------------------

  async createSession(req: { network: string; seed: number; reveal_truth: boolean }): Promise<void> {
    await this.guarded(async () => {
      const view = await this.client.createSession(req);
      this.storeSessionId(view.id);
      this.view = view;
      this.render();
      this.view = await this.poll(view.id);
      this.render();
    });
  }

  async resume(id: string): Promise<void> {
    await this.guarded(async () => {
      this.view = await this.client.getState(id);
      this.render();
      if (this.view.status === 'fitting') {
        this.view = await this.poll(id);
        this.render();
      }
    });
  }

  /** Post one intervention; the token survives retries so a re-send of
   * the same choice cannot consume two rounds. */
  async submitChoice(name: string): Promise<void> {
    if (!this.view || this.view.status !== 'awaiting-choice' || this.busy) return;
    if (!this.view.node_names.includes(name)) return;
    const token = this.pendingToken ?? newToken();
    this.pendingToken = token;
    await this.guarded(async () => {
      const id = this.view!.id;
      this.view = await this.client.postIntervention(id, name, token);
      this.pendingToken = null;
      this.selected = null;
      this.render();
      this.view = await this.poll(id);
      this.render();
    });
  }

  async handoffAuto(strategy: string, rounds: number): Promise<void> {
    if (!this.view || this.busy) return;
    if (rounds === 0) {
      this.els.autoNotice.textContent = 'no rounds requested; nothing to do';
      return;
    }
    this.els.autoNotice.textContent = '';
    await this.guarded(async () => {
      const id = this.view!.id;
      const before = this.view!.history.length;
      this.view = await this.client.runAuto(id, strategy, rounds);
      this.render();
      this.view = await this.poll(id, (v) => {
        this.renderChips(v.history.slice(before));
        this.view = v;
        this.render();
      });
      this.renderChips(this.view.history.slice(before));
      this.render();
    });
  }

  async exportResults(): Promise<void> {
    if (!this.view) return;
    await this.guarded(async () => {
      const bundle = await this.client.exportSession(this.view!.id);
      this.lastExport = bundle.files;
      this.downloadBundle(bundle.files);
    });
  }

  private downloadBundle(files: Record<string, string>): void {
    if (typeof URL.createObjectURL !== 'function' || typeof document === 'undefined') return;
    try {
      const blob = new Blob([JSON.stringify(files, null, 2)], { type: 'application/json' });
      const a = document.createElement('a');
      a.href = URL.createObjectURL(blob);
      a.download = `${this.view?.id ?? 'session'}-export.json`;
      a.click();
      URL.revokeObjectURL(a.href);
    } catch {
      // export stays available on lastExport even when downloads are unsupported
    }
  }

  private poll(id: string, onView?: (v: SessionView) => void): Promise<SessionView> {
    return pollUntilSettled(this.client, id, {
      intervalMs: this.opts.pollIntervalMs,
      sleep: this.opts.sleep,
      onView,
    });
  }

  private async guarded(fn: () => Promise<void>): Promise<void> {
    this.busy = true;
    this.render();
    try {
      await fn();
      this.els.error.textContent = '';
    } catch (err) {
      if (err instanceof ServiceError) {
        this.els.error.textContent = `service: ${err.message}`;
      } else {
        this.els.error.textContent = `request failed: ${(err as Error).message} (retry keeps the same token)`;
      }
      if (this.view) {
        // refresh so a 409 from a stale view self-corrects
        try {
          this.view = await this.client.getState(this.view.id);
        } catch {
          /* keep the stale view; the error line already explains */
        }
      }
    } finally {
      this.busy = false;
      this.render();
    }
  }

  // --- rendering ------------------------------------------------------------

  private renderChips(targets: string[]): void {
    this.els.chips.textContent = '';
    targets.forEach((name, i) => {
      const chip = document.createElement('span');
      chip.className = 'chip';
      chip.textContent = name;
      chip.dataset.round = String(i + 1);
      this.els.chips.appendChild(chip);
    });
  }

  render(): void {
    const v = this.view;
    const fitting = v?.status === 'fitting' || this.busy;
    if (!v) {
      this.els.status.textContent = 'no session';
    } else {
      this.els.status.textContent =
        `${v.network} seed ${v.seed} · round ${v.round}/${v.rounds_total} · ${v.status}`;
    }
    this.els.banner.textContent =
      v?.status === 'done' ? 'run complete: the round budget is spent' : '';
    if (v?.status === 'failed' && v.error) {
      this.els.error.textContent = `session failed: ${v.error}`;
    }

    this.els.metrics.textContent = '';
    if (v?.metrics) {
      // only rendered when the service actually sent metrics (demo mode)
      for (const key of ['shd', 'sid', 'bsf'] as const) {
        const span = document.createElement('span');
        span.className = `metric metric-${key}`;
        span.textContent = `${key} ${v.metrics[key]}`;
        this.els.metrics.appendChild(span);
      }
    }

    this.els.timeline.textContent = '';
    v?.history.forEach((name, i) => {
      const li = document.createElement('li');
      li.textContent = `round ${i + 1}: ${name}`;
      this.els.timeline.appendChild(li);
    });

    (this.els.handoff as HTMLButtonElement).disabled = !v || fitting || v.status === 'done';
    (this.els.exportBtn as HTMLButtonElement).disabled = !v;

    renderGraph(
      this.els.svg as unknown as SVGSVGElement,
      this.els.card,
      v,
      {
        threshold: this.threshold,
        selected: this.selected,
        interveneEnabled: !!v && v.status === 'awaiting-choice' && !this.busy,
        onSelect: (name) => {
          this.selected = name;
          this.render();
        },
        onIntervene: (name) => void this.submitChoice(name),
      },
    );
  }
}
