import { layoutNodes } from './layout.js';
import { SessionView } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
export const VIEW_W = 800;
export const VIEW_H = 520;
const NODE_R = 22;

export interface Edge {
  from: number;
  to: number;
  belief: number;
}

/** Directed edges whose belief clears the threshold (strictly above). */
export function edgesAbove(view: SessionView, threshold: number): Edge[] {
  const out: Edge[] = [];
  const b = view.beliefs;
  for (let i = 0; i < b.length; i++) {
    for (let j = 0; j < b[i].length; j++) {
      if (i !== j && b[i][j] > threshold) {
        out.push({ from: i, to: j, belief: b[i][j] });
      }
    }
  }
  return out;
}

export interface GraphOptions {
  threshold: number;
  selected?: string | null;
  interveneEnabled?: boolean;
  onSelect?: (name: string | null) => void;
  onIntervene?: (name: string) => void;
}

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

/**
 * Draw the belief graph into an SVG root and the node description card
 * into a sibling container. Positions come from the deterministic layout
 * keyed by session id, so they are stable across rounds and reloads.
 */
export function renderGraph(
  svg: SVGSVGElement,
  card: HTMLElement,
  view: SessionView | null,
  opts: GraphOptions,
): void {
  svg.textContent = '';
  svg.setAttribute('viewBox', `0 0 ${VIEW_W} ${VIEW_H}`);
  if (!view || view.node_names.length === 0) {
    const notice = svgEl('text', {
      x: String(VIEW_W / 2),
      y: String(VIEW_H / 2),
      'text-anchor': 'middle',
      class: 'graph-notice',
    });
    notice.textContent = 'nothing to draw yet';
    svg.appendChild(notice);
    renderCard(card, view, null, opts);
    return;
  }

  const names = view.node_names;
  const pts = layoutNodes(names, view.id, { width: VIEW_W, height: VIEW_H });

  const defs = svgEl('defs');
  const marker = svgEl('marker', {
    id: 'arrow',
    viewBox: '0 0 10 10',
    refX: '9',
    refY: '5',
    markerWidth: '7',
    markerHeight: '7',
    orient: 'auto-start-reverse',
  });
  marker.appendChild(svgEl('path', { d: 'M 0 0 L 10 5 L 0 10 z', fill: '#445' }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  const edgeGroup = svgEl('g', { class: 'edges' });
  for (const e of edgesAbove(view, opts.threshold)) {
    const a = pts[e.from];
    const b = pts[e.to];
    const d = Math.hypot(b.x - a.x, b.y - a.y) || 1;
    const ux = (b.x - a.x) / d;
    const uy = (b.y - a.y) / d;
    const line = svgEl('line', {
      class: 'edge',
      x1: String(a.x + ux * NODE_R),
      y1: String(a.y + uy * NODE_R),
      x2: String(b.x - ux * (NODE_R + 6)),
      y2: String(b.y - uy * (NODE_R + 6)),
      'stroke-opacity': e.belief.toFixed(3),
      'marker-end': 'url(#arrow)',
    });
    line.dataset.from = names[e.from];
    line.dataset.to = names[e.to];
    line.dataset.belief = e.belief.toFixed(6);
    edgeGroup.appendChild(line);
  }
  svg.appendChild(edgeGroup);

  const lastTarget = view.history[view.history.length - 1];
  const nodeGroup = svgEl('g', { class: 'nodes' });
  names.forEach((name, i) => {
    const g = svgEl('g', { class: 'node' });
    g.dataset.name = name;
    if (opts.selected != null && name === opts.selected) g.classList.add('selected');
    if (name === lastTarget) g.classList.add('last-target');
    const c = svgEl('circle', {
      cx: String(pts[i].x),
      cy: String(pts[i].y),
      r: String(NODE_R),
    });
    const label = svgEl('text', {
      x: String(pts[i].x),
      y: String(pts[i].y + NODE_R + 14),
      'text-anchor': 'middle',
      class: 'node-label',
    });
    label.textContent = name;
    g.appendChild(c);
    g.appendChild(label);
    g.addEventListener('click', () => {
      opts.onSelect?.(opts.selected === name ? null : name);
    });
    nodeGroup.appendChild(g);
  });
  svg.appendChild(nodeGroup);

  renderCard(card, view, opts.selected ?? null, opts);
}

function renderCard(
  card: HTMLElement,
  view: SessionView | null,
  selected: string | null,
  opts: GraphOptions,
): void {
  card.textContent = '';
  if (!view || selected == null || !view.node_names.includes(selected)) {
    const hint = document.createElement('p');
    hint.className = 'card-hint';
    hint.textContent = 'click a node for its description';
    card.appendChild(hint);
    return;
  }
  const title = document.createElement('h3');
  title.textContent = selected;
  card.appendChild(title);

  const states = document.createElement('p');
  states.className = 'card-states';
  const idx = view.node_names.indexOf(selected);
  states.textContent = `${view.state_counts[idx]} states`;
  card.appendChild(states);

  const desc = document.createElement('p');
  desc.className = 'card-desc';
  desc.textContent = view.descriptions[selected] || 'no description provided';
  card.appendChild(desc);

  const btn = document.createElement('button');
  btn.className = 'intervene';
  btn.textContent = `intervene on ${selected}`;
  btn.disabled = !opts.interveneEnabled;
  btn.addEventListener('click', () => opts.onIntervene?.(selected));
  card.appendChild(btn);
}
