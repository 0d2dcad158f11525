import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  FIGURE_KINDS,
  headerFor,
  movingAverage,
  renderFigure,
} from "../src/figures.js";
import { SWEEP_HEADER, TRAIN_HEADER, parseTable } from "../src/schema.js";

const fixture = (name: string) =>
  readFileSync(fileURLToPath(new URL(`../fixtures/${name}`, import.meta.url)), "utf8");

const trainTable = () => parseTable(fixture("train.csv"), TRAIN_HEADER);
const sweepTable = () => parseTable(fixture("sweep.csv"), SWEEP_HEADER);

describe("movingAverage", () => {
  it("is a trailing mean with a warm-up ramp", () => {
    expect(movingAverage([1, 2, 3, 4], 2)).toEqual([1, 1.5, 2.5, 3.5]);
  });

  it("window 1 is the identity", () => {
    expect(movingAverage([3, 1, 4], 1)).toEqual([3, 1, 4]);
  });

  it("preserves length for any window", () => {
    expect(movingAverage([1, 2, 3], 50)).toHaveLength(3);
  });

  it("rejects non-positive windows", () => {
    expect(() => movingAverage([1], 0)).toThrow(RangeError);
  });
});

describe("renderFigure", () => {
  it("maps each kind onto the right schema", () => {
    expect(headerFor("reward")).toBe(TRAIN_HEADER);
    expect(headerFor("actions")).toBe(TRAIN_HEADER);
    expect(headerFor("k-sweep")).toBe(SWEEP_HEADER);
  });

  it("labels the reward chart's axes", () => {
    const svg = renderFigure("reward", trainTable());
    expect(svg).toContain("<svg");
    expect(svg).toContain(">episode</text>");
    expect(svg).toContain(">total reward</text>");
  });

  it("draws one polyline per series, two for the action counts", () => {
    const count = (s: string) => s.split("<polyline").length - 1;
    expect(count(renderFigure("reward", trainTable()))).toBe(1);
    const actions = renderFigure("actions", trainTable());
    expect(count(actions)).toBe(2);
    expect(actions).toContain("injections (n_a1)");
    expect(actions).toContain("blocks (n_a4)");
  });

  it("marks every sweep point", () => {
    const svg = renderFigure("k-sweep", sweepTable());
    expect(svg.split("<circle").length - 1).toBe(9);
    expect(svg).toContain(">injection threshold k</text>");
  });

  it("plots the raw values: one point per CSV row", () => {
    const svg = renderFigure("overhead", trainTable());
    const points = svg.match(/<polyline points="([^"]*)"/)![1]!;
    expect(points.split(" ")).toHaveLength(250);
  });

  it("smoothing keeps the point count and changes the path", () => {
    const raw = renderFigure("reward", trainTable());
    const smooth = renderFigure("reward", trainTable(), 10);
    const pts = (s: string) => s.match(/<polyline points="([^"]*)"/)![1]!;
    expect(pts(smooth).split(" ")).toHaveLength(250);
    expect(pts(smooth)).not.toBe(pts(raw));
  });

  it("is deterministic", () => {
    expect(renderFigure("k-sweep", sweepTable())).toBe(
      renderFigure("k-sweep", sweepTable()),
    );
  });

  it("refuses an empty table", () => {
    const table = parseTable(`${SWEEP_HEADER}\n`, SWEEP_HEADER);
    expect(() => renderFigure("k-sweep", table)).toThrow(/no data rows/);
  });

  it("renders a constant series without degenerate scales", () => {
    const table = parseTable(
      `${SWEEP_HEADER}\n0.3,5\n0.4,5\n0.5,5\n`,
      SWEEP_HEADER,
    );
    const svg = renderFigure("k-sweep", table);
    expect(svg).toContain("<polyline");
    expect(svg).not.toContain("NaN");
  });

  it("covers every advertised kind", () => {
    for (const kind of FIGURE_KINDS) {
      const table = kind === "k-sweep" ? sweepTable() : trainTable();
      expect(renderFigure(kind, table)).toContain("</svg>");
    }
  });
});
