/** Static SVG rendering of figure models. No randomness, no clock:
 * identical models yield byte-identical files. The aggregation table is
 * embedded verbatim in a <metadata> block so downstream checks can
 * compare the plotted numbers against an independent recomputation.
 */

import { FigureModel, Series } from './figures.js';

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 64, right: 16, top: 36, bottom: 44 };

const PALETTE = ['#1f6fb2', '#d1495b', '#3a7d44', '#8d5a97', '#c77b21', '#4a4a4a'];

interface Scale {
  (v: number): number;
}

function makeScale(lo: number, hi: number, outLo: number, outHi: number, log: boolean): Scale {
  if (log) {
    const llo = Math.log10(lo);
    const lhi = Math.log10(hi);
    const span = lhi - llo || 1;
    return (v) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo);
  }
  const span = hi - lo || 1;
  return (v) => outLo + ((v - lo) / span) * (outHi - outLo);
}

function ticks(lo: number, hi: number, count: number, log: boolean): number[] {
  if (log) {
    const a = Math.ceil(Math.log10(lo) - 1e-9);
    const b = Math.floor(Math.log10(hi) + 1e-9);
    const out: number[] = [];
    for (let e = a; e <= b; e++) out.push(Math.pow(10, e));
    return out.length >= 2 ? out : [lo, hi];
  }
  const out: number[] = [];
  for (let i = 0; i < count; i++) out.push(lo + ((hi - lo) * i) / (count - 1));
  return out;
}

function fmt(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-2) return v.toExponential(1);
  return String(Number(v.toPrecision(4)));
}

function bounds(model: FigureModel): { x: [number, number]; y: [number, number] } {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of model.series) {
    for (const p of s.points) {
      xs.push(p.x);
      ys.push(p.mean - p.std, p.mean + p.std);
    }
  }
  if (model.reference) {
    for (const p of model.reference.points) ys.push(p.y);
  }
  if (xs.length === 0) return { x: [0, 1], y: model.logY ? [0.1, 1] : [0, 1] };
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (model.logY) {
    const positive = ys.filter((v) => v > 0);
    yLo = positive.length ? Math.min(...positive) : 0.1;
    yHi = positive.length ? Math.max(...positive) : 1;
  }
  if (yLo === yHi) {
    yLo -= 0.5;
    yHi += 0.5;
  }
  return { x: [Math.min(...xs), Math.max(...xs)], y: [yLo, yHi] };
}

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

function seriesShapes(s: Series, color: string, sx: Scale, sy: Scale, logY: boolean): string {
  const parts: string[] = [];
  if (s.points.length > 1) {
    const floor = (v: number) => (logY ? Math.max(v, 1e-300) : v);
    const upper = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(floor(p.mean + p.std)).toFixed(2)}`);
    const lower = [...s.points]
      .reverse()
      .map((p) => `${sx(p.x).toFixed(2)},${sy(floor(Math.max(p.mean - p.std, logY ? p.mean / 10 : -Infinity))).toFixed(2)}`);
    if (s.points.some((p) => p.std > 0)) {
      parts.push(
        `<polygon points="${upper.join(' ')} ${lower.join(' ')}" fill="${color}" fill-opacity="0.15" stroke="none"/>`,
      );
    }
    const line = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(floor(p.mean)).toFixed(2)}`);
    parts.push(
      `<polyline points="${line.join(' ')}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
  }
  for (const p of s.points) {
    parts.push(
      `<circle cx="${sx(p.x).toFixed(2)}" cy="${sy(logY ? Math.max(p.mean, 1e-300) : p.mean).toFixed(2)}" r="2.6" fill="${color}"/>`,
    );
  }
  return parts.join('\n');
}

export function renderSvg(model: FigureModel): string {
  const { x: xb, y: yb } = bounds(model);
  const sx = makeScale(xb[0], xb[1], MARGIN.left, WIDTH - MARGIN.right, false);
  const sy = makeScale(yb[0], yb[1], HEIGHT - MARGIN.bottom, MARGIN.top, model.logY);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  const metadata = {
    kind: model.kind,
    series: model.series.map((s) => ({
      label: s.label,
      points: s.points.map((p) => ({ x: p.x, mean: p.mean, std: p.std, n: p.n })),
    })),
    reference: model.reference
      ? { label: model.reference.label, scale: model.reference.scale }
      : null,
  };
  parts.push(`<metadata id="aggregates">${esc(JSON.stringify(metadata))}</metadata>`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="14">${esc(model.title)}</text>`,
  );

  // axes
  const x0 = MARGIN.left;
  const y0 = HEIGHT - MARGIN.bottom;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${WIDTH - MARGIN.right}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${MARGIN.top}" stroke="black"/>`);
  for (const t of ticks(xb[0], xb[1], 5, false)) {
    const px = sx(t);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 4}" stroke="black"/>`);
    parts.push(
      `<text x="${px.toFixed(2)}" y="${y0 + 16}" text-anchor="middle" font-size="10">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(yb[0], yb[1], 5, model.logY)) {
    const py = sy(t);
    parts.push(`<line x1="${x0 - 4}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 7}" y="${(py + 3).toFixed(2)}" text-anchor="end" font-size="10">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 8}" text-anchor="middle" font-size="11">${esc(model.xLabel)}</text>`,
  );
  parts.push(
    `<text x="14" y="${(MARGIN.top + y0) / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 14 ${(MARGIN.top + y0) / 2})">${esc(model.yLabel)}</text>`,
  );

  model.series.forEach((s, i) => {
    parts.push(seriesShapes(s, PALETTE[i % PALETTE.length], sx, sy, model.logY));
  });
  if (model.reference && model.reference.points.length > 1) {
    const line = model.reference.points
      .map((p) => `${sx(p.x).toFixed(2)},${sy(model.logY ? Math.max(p.y, 1e-300) : p.y).toFixed(2)}`)
      .join(' ');
    parts.push(
      `<polyline points="${line}" fill="none" stroke="#222222" stroke-width="1.2" stroke-dasharray="6 4"/>`,
    );
  }

  // legend
  let ly = MARGIN.top + 6;
  const names = model.series.map((s, i) => ({ label: s.label, color: PALETTE[i % PALETTE.length] }));
  if (model.reference) names.push({ label: model.reference.label, color: '#222222' });
  for (const entry of names) {
    parts.push(
      `<line x1="${WIDTH - 170}" y1="${ly}" x2="${WIDTH - 146}" y2="${ly}" stroke="${entry.color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${WIDTH - 140}" y="${ly + 4}" font-size="11">${esc(entry.label)}</text>`,
    );
    ly += 16;
  }
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}

/** Pull the embedded aggregation table back out of a rendered file. */
export function extractAggregates(svg: string): unknown {
  const m = svg.match(/<metadata id="aggregates">([\s\S]*?)<\/metadata>/);
  if (!m) throw new Error('no aggregates metadata block found');
  const text = m[1].replace(/&lt;/g, '<').replace(/&gt;/g, '>').replace(/&amp;/g, '&');
  return JSON.parse(text);
}
