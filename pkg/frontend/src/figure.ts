/**
 * Log-log SVG figures with reference-slope guide lines.
 *
 * Guide-line slopes are fixed per study kind (-1 for the stochastic 1/N
 * rate, -4 for the squared deterministic gap, 2 and 1 for interpolation
 * orders); the annotated fitted slope is read from the data, never
 * recomputed.
 */

import type { StudyRow } from "./schema.js";

export interface KindConfig {
  xField: "N" | "M" | "index";
  xLabel: string;
  guides: number[];
  yLabel: string;
}

export const KIND_CONFIGS: Record<string, KindConfig> = {
  "gap-vs-n": { xField: "N", xLabel: "N", guides: [-1], yLabel: "mean squared trip-norm gap" },
  "det-order": { xField: "M", xLabel: "M", guides: [-4], yLabel: "squared trip-norm gap" },
  rough: { xField: "N", xLabel: "N", guides: [-1, -0.5], yLabel: "mean sup-in-time squared gap" },
  interpolation: { xField: "M", xLabel: "M", guides: [-2, -1], yLabel: "interpolation error" },
  qv: { xField: "index", xLabel: "row", guides: [], yLabel: "mean squared noise" },
  duality: { xField: "index", xLabel: "instance", guides: [], yLabel: "min slack / ratio" },
  stability: { xField: "M", xLabel: "M", guides: [], yLabel: "squared gap norms" },
};

export interface FigureSpec {
  study: string;
  rows: StudyRow[];
  config: KindConfig;
  outPath: string;
}

export function figureSpec(study: string, rows: StudyRow[], outPath: string): FigureSpec {
  const config = KIND_CONFIGS[study] ?? {
    xField: "index" as const, xLabel: "row", guides: [], yLabel: "mean_sq_gap",
  };
  return { study, rows, config, outPath };
}

const W = 640;
const H = 480;
const MARGIN = { left: 70, right: 30, top: 48, bottom: 52 };

function xValue(row: StudyRow, i: number, field: KindConfig["xField"]): number {
  if (field === "N") return row.N;
  if (field === "M") return row.M;
  return i + 1;
}

interface Scale {
  lo: number;
  hi: number;
  px(v: number): number;
}

function logScale(values: number[], pxLo: number, pxHi: number): Scale {
  const logs = values.map(Math.log10);
  let lo = Math.min(...logs);
  let hi = Math.max(...logs);
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = 0.06 * (hi - lo);
  lo -= pad;
  hi += pad;
  return {
    lo, hi,
    px: (v: number) => pxLo + ((Math.log10(v) - lo) / (hi - lo)) * (pxHi - pxLo),
  };
}

function decadeTicks(scale: Scale): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(scale.lo); e <= Math.floor(scale.hi); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

function fmtTick(v: number): string {
  return `1e${Math.round(Math.log10(v))}`;
}

const esc = (s: string) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

/** Render one figure; positive finite points only (log axes). */
export function renderFigure(spec: FigureSpec): string {
  const pts = spec.rows
    .map((r, i) => ({ x: xValue(r, i, spec.config.xField), y: r.mean_sq_gap }))
    .filter((p): p is { x: number; y: number } => p.y !== null && p.y > 0 && p.x > 0);
  if (pts.length === 0) {
    throw new Error(`${spec.study}: no positive data points to draw`);
  }
  const xs = logScale(pts.map((p) => p.x), MARGIN.left, W - MARGIN.right);
  const ys = logScale(pts.map((p) => p.y), H - MARGIN.bottom, MARGIN.top);

  const slope = spec.rows.find((r) => r.slope !== null)?.slope ?? null;
  const slopeErr = spec.rows.find((r) => r.slope_err !== null)?.slope_err ?? null;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif"` +
    (slope === null ? ">" : ` data-slope="${slope}">`),
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="24" text-anchor="middle" font-size="16">${esc(spec.study)}</text>`);

  // axes
  const x0 = MARGIN.left, x1 = W - MARGIN.right, y0 = H - MARGIN.bottom, y1 = MARGIN.top;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  for (const t of decadeTicks(xs)) {
    const px = xs.px(t);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(`<text x="${px}" y="${y0 + 20}" text-anchor="middle" font-size="11">${fmtTick(t)}</text>`);
  }
  for (const t of decadeTicks(ys)) {
    const py = ys.px(t);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(`<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">${fmtTick(t)}</text>`);
  }
  parts.push(`<text x="${(x0 + x1) / 2}" y="${H - 14}" text-anchor="middle" font-size="13">${esc(spec.config.xLabel)}</text>`);
  parts.push(`<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${(y0 + y1) / 2})">${esc(spec.config.yLabel)}</text>`);

  // guide lines through the first point
  const anchor = pts[0];
  for (const g of spec.config.guides) {
    const yAt = (x: number) => anchor.y * Math.pow(x / anchor.x, g);
    const gx0 = pts[0].x;
    const gx1 = pts[pts.length - 1].x;
    parts.push(
      `<line x1="${xs.px(gx0)}" y1="${ys.px(yAt(gx0))}" x2="${xs.px(gx1)}" y2="${ys.px(yAt(gx1))}" ` +
      `stroke="#888" stroke-dasharray="6 4"/>`,
    );
    parts.push(
      `<text x="${xs.px(gx1) - 4}" y="${ys.px(yAt(gx1)) - 6}" text-anchor="end" font-size="11" fill="#666">` +
      `slope ${g}</text>`,
    );
  }

  // data series
  const line = pts.map((p) => `${xs.px(p.x).toFixed(2)},${ys.px(p.y).toFixed(2)}`).join(" ");
  parts.push(`<polyline points="${line}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>`);
  for (const p of pts) {
    parts.push(`<circle cx="${xs.px(p.x).toFixed(2)}" cy="${ys.px(p.y).toFixed(2)}" r="4" fill="#1f77b4"/>`);
  }

  // fitted-slope annotation straight from the data file
  if (slope !== null) {
    const label = `fitted slope = ${slope.toPrecision(12)}` +
      (slopeErr !== null ? ` ± ${slopeErr.toPrecision(3)}` : "");
    parts.push(`<text x="${x1 - 6}" y="${y1 + 16}" text-anchor="end" font-size="13" class="slope-annotation">${esc(label)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n");
}
