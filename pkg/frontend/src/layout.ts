import { hashString, mulberry32 } from './rand.js';

export interface Point {
  x: number;
  y: number;
}

export interface LayoutOptions {
  width: number;
  height: number;
  iterations?: number;
  margin?: number;
}

/**
 * Deterministic force-directed node placement.
 *
 * Seeded by the session id so the same session always lays out the same
 * way, and positions depend only on the node list, never on beliefs:
 * nodes must not jump between rounds while edges appear and vanish.
 */
export function layoutNodes(names: string[], seedKey: string, opts: LayoutOptions): Point[] {
  const { width, height } = opts;
  const iterations = opts.iterations ?? 150;
  const margin = opts.margin ?? 40;
  const n = names.length;
  if (n === 0) return [];
  const cx = width / 2;
  const cy = height / 2;
  if (n === 1) return [{ x: cx, y: cy }];

  const rng = mulberry32(hashString(seedKey));
  const ring = Math.min(width, height) * 0.36;
  const offset = rng() * 2 * Math.PI;
  const pts: Point[] = names.map((_, i) => {
    const angle = offset + (2 * Math.PI * i) / n + (rng() - 0.5) * 0.5;
    const r = ring * (0.75 + 0.45 * rng());
    return { x: cx + r * Math.cos(angle), y: cy + r * Math.sin(angle) };
  });

  // plain repulsion + weak centering; cooled displacement cap
  const k = 0.9 * Math.sqrt((width * height) / n);
  for (let it = 0; it < iterations; it++) {
    const temp = (0.09 * Math.min(width, height) * (iterations - it)) / iterations;
    const disp = pts.map(() => ({ x: 0, y: 0 }));
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let dx = pts[i].x - pts[j].x;
        let dy = pts[i].y - pts[j].y;
        let d = Math.hypot(dx, dy);
        if (d < 1e-6) {
          // coincident start; split along a seeded direction
          const a = rng() * 2 * Math.PI;
          dx = Math.cos(a);
          dy = Math.sin(a);
          d = 1;
        }
        const f = (k * k) / d / d;
        disp[i].x += dx * f;
        disp[i].y += dy * f;
        disp[j].x -= dx * f;
        disp[j].y -= dy * f;
      }
      disp[i].x += (cx - pts[i].x) * 0.02;
      disp[i].y += (cy - pts[i].y) * 0.02;
    }
    for (let i = 0; i < n; i++) {
      const d = Math.hypot(disp[i].x, disp[i].y);
      if (d > 1e-9) {
        const step = Math.min(d, temp);
        pts[i].x += (disp[i].x / d) * step;
        pts[i].y += (disp[i].y / d) * step;
      }
      pts[i].x = Math.min(width - margin, Math.max(margin, pts[i].x));
      pts[i].y = Math.min(height - margin, Math.max(margin, pts[i].y));
    }
  }
  return pts;
}
