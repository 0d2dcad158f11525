// Pinned CSV contracts for the run artifacts this tool consumes. Headers
// must match byte for byte — a renamed or reordered column means the file
// is not what we think it is, and we refuse it rather than guess.

export const TRAIN_HEADER =
  "episode,total_reward,time_overhead_s,n_a1,n_a2,n_a3,n_a4,epsilon";
export const SWEEP_HEADER = "k,avg_episodic_reward";

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface Table {
  columns: Map<string, number[]>;
  rows: number;
}

export function parseTable(text: string, expectedHeader: string): Table {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`empty CSV, expected header "${expectedHeader}"`);
  }
  const header = lines[0]!;
  if (header !== expectedHeader) {
    throw new SchemaError(
      `bad header: expected "${expectedHeader}", got "${header}"`,
    );
  }
  const names = header.split(",");
  const columns = new Map<string, number[]>(names.map((n) => [n, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i]!.split(",");
    if (cells.length !== names.length) {
      throw new SchemaError(
        `row ${i}: expected ${names.length} fields, got ${cells.length}`,
      );
    }
    for (let j = 0; j < names.length; j++) {
      const value = Number(cells[j]);
      if (!Number.isFinite(value)) {
        throw new SchemaError(
          `row ${i}, column ${names[j]}: not a number: "${cells[j]}"`,
        );
      }
      columns.get(names[j]!)!.push(value);
    }
  }
  return { columns, rows: lines.length - 1 };
}

export function column(table: Table, name: string): number[] {
  const values = table.columns.get(name);
  if (values === undefined) {
    throw new SchemaError(`no column "${name}"`);
  }
  return values;
}
