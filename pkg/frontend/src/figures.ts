/**
 * SVG line charts for the four run figures. No chart library: the files
 * these render to are diffed in tests, so the output has to be
 * deterministic down to the byte, and the charts are plain enough
 * (line + axes + ticks) that hand-built SVG stays readable.
 */

import {
  SWEEP_HEADER,
  SchemaError,
  TRAIN_HEADER,
  type Table,
  column,
} from "./schema.js";

export type FigureKind = "reward" | "overhead" | "actions" | "k-sweep";

export const FIGURE_KINDS: readonly FigureKind[] = [
  "reward",
  "overhead",
  "actions",
  "k-sweep",
];

export function headerFor(kind: FigureKind): string {
  return kind === "k-sweep" ? SWEEP_HEADER : TRAIN_HEADER;
}

/** Trailing mean over up to `window` points; length-preserving. */
export function movingAverage(values: number[], window: number): number[] {
  if (window < 1 || !Number.isInteger(window)) {
    throw new RangeError(`smoothing window must be a positive integer`);
  }
  const out: number[] = [];
  let acc = 0;
  for (let i = 0; i < values.length; i++) {
    acc += values[i]!;
    if (i >= window) acc -= values[i - window]!;
    out.push(acc / Math.min(i + 1, window));
  }
  return out;
}

interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color: string;
  markers?: boolean;
}

interface Layout {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

function layoutFor(kind: FigureKind, table: Table, smooth: number): Layout {
  const y = (name: string) =>
    smooth > 1 ? movingAverage(column(table, name), smooth) : column(table, name);
  switch (kind) {
    case "reward":
      return {
        title: "Episodic reward",
        xLabel: "episode",
        yLabel: "total reward",
        series: [
          {
            label: "total reward",
            xs: column(table, "episode"),
            ys: y("total_reward"),
            color: "#1f6fb2",
          },
        ],
      };
    case "overhead":
      return {
        title: "Defense time overhead",
        xLabel: "episode",
        yLabel: "time overhead (s)",
        series: [
          {
            label: "time overhead",
            xs: column(table, "episode"),
            ys: y("time_overhead_s"),
            color: "#1f6fb2",
          },
        ],
      };
    case "actions":
      return {
        title: "Injection vs block actions",
        xLabel: "episode",
        yLabel: "actions per episode",
        series: [
          {
            label: "injections (n_a1)",
            xs: column(table, "episode"),
            ys: y("n_a1"),
            color: "#c03a2b",
          },
          {
            label: "blocks (n_a4)",
            xs: column(table, "episode"),
            ys: y("n_a4"),
            color: "#1f6fb2",
          },
        ],
      };
    case "k-sweep":
      return {
        title: "Average episodic reward vs injection threshold",
        xLabel: "injection threshold k",
        yLabel: "average episodic reward",
        series: [
          {
            label: "average reward",
            xs: column(table, "k"),
            ys: y("avg_episodic_reward"),
            color: "#1f6fb2",
            markers: true,
          },
        ],
      };
  }
}

// ── scales and ticks ─────────────────────────────────────────────────

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    // constant series: pad so the line sits mid-chart
    lo -= 1;
    hi += 1;
  }
  return [lo, hi];
}

function niceStep(span: number): number {
  const raw = span / 4;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const factor = norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10;
  return factor * mag;
}

function ticks(lo: number, hi: number): number[] {
  const step = niceStep(hi - lo);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(v);
  }
  return out;
}

const fmt = (v: number): string =>
  String(parseFloat(v.toPrecision(10)));

// ── rendering ────────────────────────────────────────────────────────

const W = 640;
const H = 400;
const M = { top: 40, right: 24, bottom: 48, left: 68 };

export function renderFigure(
  kind: FigureKind,
  table: Table,
  smooth = 0,
): string {
  if (table.rows === 0) {
    throw new SchemaError("no data rows to plot");
  }
  const { title, xLabel, yLabel, series } = layoutFor(kind, table, smooth);

  const [x0, x1] = extent(series.flatMap((s) => s.xs));
  let [y0, y1] = extent(series.flatMap((s) => s.ys));
  const pad = (y1 - y0) * 0.05;
  y0 -= pad;
  y1 += pad;

  const sx = (v: number) => M.left + ((v - x0) / (x1 - x0)) * (W - M.left - M.right);
  const sy = (v: number) => H - M.bottom - ((v - y0) / (y1 - y0)) * (H - M.top - M.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
      `viewBox="0 0 ${W} ${H}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(
    `<text x="${W / 2}" y="22" text-anchor="middle" font-size="15">${title}</text>`,
  );

  for (const t of ticks(x0, x1)) {
    const x = sx(t).toFixed(2);
    parts.push(
      `<line x1="${x}" y1="${H - M.bottom}" x2="${x}" y2="${H - M.bottom + 5}" stroke="#444"/>`,
      `<text x="${x}" y="${H - M.bottom + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(y0, y1)) {
    const y = sy(t).toFixed(2);
    parts.push(
      `<line x1="${M.left - 5}" y1="${y}" x2="${M.left}" y2="${y}" stroke="#444"/>`,
      `<text x="${M.left - 9}" y="${y}" dy="4" text-anchor="end">${fmt(t)}</text>`,
      `<line x1="${M.left}" y1="${y}" x2="${W - M.right}" y2="${y}" stroke="#eee"/>`,
    );
  }
  parts.push(
    `<line x1="${M.left}" y1="${H - M.bottom}" x2="${W - M.right}" y2="${H - M.bottom}" stroke="#444"/>`,
    `<line x1="${M.left}" y1="${M.top}" x2="${M.left}" y2="${H - M.bottom}" stroke="#444"/>`,
    `<text x="${(M.left + W - M.right) / 2}" y="${H - 10}" text-anchor="middle">${xLabel}</text>`,
    `<text x="16" y="${(M.top + H - M.bottom) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${(M.top + H - M.bottom) / 2})">${yLabel}</text>`,
  );

  for (const s of series) {
    const pts = s.xs
      .map((x, i) => `${sx(x).toFixed(2)},${sy(s.ys[i]!).toFixed(2)}`)
      .join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.5"/>`,
    );
    if (s.markers) {
      for (let i = 0; i < s.xs.length; i++) {
        parts.push(
          `<circle cx="${sx(s.xs[i]!).toFixed(2)}" cy="${sy(s.ys[i]!).toFixed(2)}" ` +
            `r="3" fill="${s.color}"/>`,
        );
      }
    }
  }

  if (series.length > 1) {
    series.forEach((s, i) => {
      const y = M.top + 8 + i * 16;
      parts.push(
        `<line x1="${W - M.right - 150}" y1="${y}" x2="${W - M.right - 126}" y2="${y}" ` +
          `stroke="${s.color}" stroke-width="1.5"/>`,
        `<text x="${W - M.right - 120}" y="${y}" dy="4">${s.label}</text>`,
      );
    });
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
