// Usage: hubguard-figures --input run/train.csv --kind reward --output reward.svg
// Kinds: reward | overhead | actions (both from the train CSV), k-sweep
// (from the sweep CSV). Optional --smooth N applies a trailing moving
// average before plotting. Exit codes: 0 ok, 2 usage, 3 bad input.

import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import {
  FIGURE_KINDS,
  headerFor,
  renderFigure,
  type FigureKind,
} from "./figures.js";
import { SchemaError, parseTable } from "./schema.js";

interface Args {
  input: string;
  kind: FigureKind;
  output: string;
  smooth: number;
}

function usage(): void {
  console.error(
    "usage: hubguard-figures --input CSV --kind " +
      `{${FIGURE_KINDS.join("|")}} --output SVG [--smooth N]`,
  );
}

function parseArgs(argv: string[]): Args | null {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const name = argv[i]!;
    const value = argv[i + 1];
    if (!name.startsWith("--") || value === undefined) return null;
    flags.set(name.slice(2), value);
  }
  const input = flags.get("input");
  const kind = flags.get("kind");
  const output = flags.get("output");
  if (!input || !kind || !output) return null;
  if (!(FIGURE_KINDS as readonly string[]).includes(kind)) {
    console.error(`unknown kind "${kind}"`);
    return null;
  }
  const smooth = flags.has("smooth") ? Number(flags.get("smooth")) : 0;
  if (!Number.isInteger(smooth) || smooth < 0) {
    console.error(`--smooth must be a non-negative integer`);
    return null;
  }
  const known = new Set(["input", "kind", "output", "smooth"]);
  for (const name of flags.keys()) {
    if (!known.has(name)) {
      console.error(`unknown flag --${name}`);
      return null;
    }
  }
  return { input, kind: kind as FigureKind, output, smooth };
}

export function run(argv: string[]): number {
  const args = parseArgs(argv);
  if (args === null) {
    usage();
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(args.input, "utf8");
  } catch {
    console.error(`cannot read ${args.input}`);
    return 3;
  }
  let svg: string;
  try {
    // render fully before touching the output path: a schema error must
    // leave no file behind
    svg = renderFigure(args.kind, parseTable(text, headerFor(args.kind)), args.smooth);
  } catch (err) {
    if (err instanceof SchemaError || err instanceof RangeError) {
      console.error(`error: ${err.message}`);
      return 3;
    }
    throw err;
  }
  writeFileSync(args.output, svg);
  console.log(`wrote ${args.output} (${args.kind})`);
  return 0;
}

if (
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href
) {
  process.exit(run(process.argv.slice(2)));
}
