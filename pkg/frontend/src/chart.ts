// SVG chart as a string: per-sample F1 points with running-average path and
// an adjustable baseline overlay. Pure string construction keeps it testable
// without a DOM; the caller assigns the result to innerHTML.

import { RunView, chartPoints } from './state.js';

export interface ChartGeometry {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = {
  width: 720,
  height: 260,
  padLeft: 42,
  padRight: 14,
  padTop: 12,
  padBottom: 26,
};

function xScale(geom: ChartGeometry, total: number): (order: number) => number {
  const inner = geom.width - geom.padLeft - geom.padRight;
  const n = Math.max(total, 1);
  return (order) => geom.padLeft + (inner * order) / (n + 1);
}

function yScale(geom: ChartGeometry): (f1: number) => number {
  const inner = geom.height - geom.padTop - geom.padBottom;
  return (f1) => geom.padTop + inner * (1 - f1);
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(2);
}

export function renderChartSvg(
  view: RunView,
  baselineF1: number,
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  const total = Math.max(view.total, view.rows.length);
  const x = xScale(geom, total);
  const y = yScale(geom);
  const points = chartPoints(view);

  const gridLines = [0, 0.25, 0.5, 0.75, 1]
    .map((v) => {
      const yy = fmt(y(v));
      return (
        `<line class="grid" x1="${geom.padLeft}" y1="${yy}" x2="${fmt(geom.width - geom.padRight)}" y2="${yy}"/>` +
        `<text class="tick" x="${geom.padLeft - 6}" y="${yy}" text-anchor="end" dominant-baseline="middle">${v.toFixed(2)}</text>`
      );
    })
    .join('');

  const dots = points
    .map((p) => `<circle class="pt" data-order="${p.order}" cx="${fmt(x(p.order))}" cy="${fmt(y(p.f1))}" r="4"/>`)
    .join('');

  const path = points.length > 1
    ? `<polyline class="trend" fill="none" points="${points.map((p) => `${fmt(x(p.order))},${fmt(y(p.f1))}`).join(' ')}"/>`
    : '';

  const by = fmt(y(baselineF1));
  const baseline =
    `<line class="baseline" x1="${geom.padLeft}" y1="${by}" x2="${fmt(geom.width - geom.padRight)}" y2="${by}"/>` +
    `<text class="baseline-label" x="${fmt(geom.width - geom.padRight)}" y="${by}" text-anchor="end" dy="-4">baseline ${baselineF1.toFixed(4)}</text>`;

  return (
    `<svg viewBox="0 0 ${geom.width} ${geom.height}" role="img" aria-label="per-sample F1">` +
    `<g class="chart-grid">${gridLines}</g>` +
    `<g class="chart-data">${path}${dots}</g>` +
    `<g class="chart-baseline">${baseline}</g>` +
    `</svg>`
  );
}

// The data layer alone, used to assert that baseline changes leave it intact.
export function dataLayer(svg: string): string {
  const match = svg.match(/<g class="chart-data">.*?<\/g>/);
  return match ? match[0] : '';
}
