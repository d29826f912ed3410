import { beforeEach, describe, expect, it } from 'vitest';

import { edgesAbove, renderGraph } from '../src/graph.js';
import { SessionView } from '../src/types.js';
import studyFixture from './fixtures/asia_study_view.json';

const studyView = studyFixture as unknown as SessionView;

let svg: SVGSVGElement;
let card: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '';
  svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg') as SVGSVGElement;
  card = document.createElement('div');
  document.body.append(svg, card);
});

function zeroedView(): SessionView {
  const view = structuredClone(studyView);
  view.beliefs = view.beliefs.map((row) => row.map(() => 0));
  return view;
}

describe('edgesAbove', () => {
  it('uses a strict threshold', () => {
    const view = zeroedView();
    view.beliefs[0][1] = 0.5;
    view.beliefs[0][2] = 0.51;
    expect(edgesAbove(view, 0.5)).toEqual([{ from: 0, to: 2, belief: 0.51 }]);
  });
});

describe('renderGraph', () => {
  it('draws no edges when every belief is zero', () => {
    renderGraph(svg, card, zeroedView(), { threshold: 0.5 });
    expect(svg.querySelectorAll('.edge').length).toBe(0);
    expect(svg.querySelectorAll('.node').length).toBe(8);
    expect(svg.querySelectorAll('text.node-label').length).toBe(8);
  });

  it('shows confident edges with opacity equal to the belief', () => {
    renderGraph(svg, card, studyView, { threshold: 0.5 });
    const edges = svg.querySelectorAll<SVGLineElement>('.edge');
    expect(edges.length).toBe(5);
    const smokeBronc = svg.querySelector<SVGLineElement>(
      '.edge[data-from="smoke"][data-to="bronc"]',
    );
    expect(smokeBronc).not.toBeNull();
    const belief = Number(smokeBronc!.dataset.belief);
    expect(belief).toBeGreaterThan(0.9);
    expect(smokeBronc!.getAttribute('stroke-opacity')).toBe(belief.toFixed(3));
  });

  it('raising the threshold strictly prunes the edge set', () => {
    renderGraph(svg, card, studyView, { threshold: 0.5 });
    const low = svg.querySelectorAll('.edge').length;
    renderGraph(svg, card, studyView, { threshold: 0.99 });
    const high = svg.querySelectorAll('.edge').length;
    expect(low).toBe(5);
    expect(high).toBeLessThan(low);
  });

  it('explains an empty session instead of drawing', () => {
    renderGraph(svg, card, null, { threshold: 0.5 });
    expect(svg.textContent).toContain('nothing to draw yet');
    expect(svg.querySelectorAll('.node').length).toBe(0);
  });

  it('reports node clicks and marks the selection', () => {
    const picked: Array<string | null> = [];
    renderGraph(svg, card, studyView, { threshold: 0.5, onSelect: (n) => picked.push(n) });
    const node = svg.querySelector<SVGGElement>('.node[data-name="smoke"]')!;
    node.dispatchEvent(new MouseEvent('click', { bubbles: true }));
    expect(picked).toEqual(['smoke']);

    renderGraph(svg, card, studyView, { threshold: 0.5, selected: 'smoke' });
    expect(
      svg.querySelector('.node[data-name="smoke"]')!.classList.contains('selected'),
    ).toBe(true);
  });

  it('fills the card with the selected node and gates the intervene button', () => {
    renderGraph(svg, card, studyView, { threshold: 0.5 });
    expect(card.textContent).toContain('click a node for its description');

    renderGraph(svg, card, studyView, {
      threshold: 0.5,
      selected: 'smoke',
      interveneEnabled: false,
    });
    expect(card.querySelector('h3')!.textContent).toBe('smoke');
    expect(card.textContent).toContain(studyView.descriptions.smoke);
    expect(card.querySelector<HTMLButtonElement>('button.intervene')!.disabled).toBe(true);

    const fired: string[] = [];
    renderGraph(svg, card, studyView, {
      threshold: 0.5,
      selected: 'smoke',
      interveneEnabled: true,
      onIntervene: (n) => fired.push(n),
    });
    const btn = card.querySelector<HTMLButtonElement>('button.intervene')!;
    expect(btn.disabled).toBe(false);
    btn.click();
    expect(fired).toEqual(['smoke']);
  });

  it('marks the most recent intervention target', () => {
    renderGraph(svg, card, studyView, { threshold: 0.5 });
    const last = studyView.history[studyView.history.length - 1];
    expect(
      svg.querySelector(`.node[data-name="${last}"]`)!.classList.contains('last-target'),
    ).toBe(true);
  });
});
