/**
 * Schema-checked reader for qofdm result CSVs.
 *
 * Every file written by the simulator starts with a `# schema=<id>` line,
 * then a header row, then data rows.  Missing values are empty strings.
 */

import { readFileSync } from "fs";

/** The CSV carries the wrong schema id or lacks a required column. */
export class SchemaMismatch extends Error {
  constructor(message: string, readonly column?: string) {
    super(message);
    this.name = "SchemaMismatch";
  }
}

/** A series filter matched no rows, or a spec produced no series at all. */
export class EmptySeries extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EmptySeries";
  }
}

export const SCHEMAS = {
  trials: "qofdm.trials.v1",
  agg: "qofdm.agg.v1",
  se: "qofdm.se.v1",
  pa: "qofdm.pa.v1",
} as const;

const COLUMNS: Record<string, string[]> = {
  [SCHEMAS.trials]: [
    "trial", "seed", "snr_db", "detector", "ser", "iters", "chan_mse", "wall_ms",
  ],
  [SCHEMAS.agg]: [
    "snr_db", "detector", "mean_ser", "ci_lo", "ci_hi", "se_pred_ser",
  ],
  [SCHEMAS.se]: ["t", "theta", "eta", "nu", "ser_pred"],
  [SCHEMAS.pa]: ["j", "h2", "p"],
};

export interface Table {
  path: string;
  schema: string;
  header: string[];
  rows: string[][];
}

/** Read a CSV, check its schema line and that every documented column exists. */
export function readTable(path: string, expectedSchema: string): Table {
  const text = readFileSync(path, "utf-8");
  // The simulator's csv writer emits CRLF row terminators; accept both.
  const lines = text.split("\n")
    .map((l) => (l.endsWith("\r") ? l.slice(0, -1) : l))
    .filter((l) => l.length > 0);
  const schemaLine = lines[0] ?? "";
  const m = schemaLine.match(/^# schema=(\S+)$/);
  if (!m) {
    throw new SchemaMismatch(`${path}: missing "# schema=..." first line`);
  }
  if (m[1] !== expectedSchema) {
    throw new SchemaMismatch(
      `${path}: schema is ${m[1]}, expected ${expectedSchema}`);
  }
  const header = (lines[1] ?? "").split(",");
  for (const col of COLUMNS[expectedSchema] ?? []) {
    if (!header.includes(col)) {
      throw new SchemaMismatch(`${path}: missing column "${col}"`, col);
    }
  }
  const rows = lines.slice(2).map((l) => l.split(","));
  return { path, schema: m[1], header, rows };
}

/** Column index by name; the header was already validated against the schema. */
export function colIndex(table: Table, name: string): number {
  const i = table.header.indexOf(name);
  if (i < 0) {
    throw new SchemaMismatch(`${table.path}: missing column "${name}"`, name);
  }
  return i;
}

/** Numeric cell value; empty strings come back as NaN. */
export function num(row: string[], i: number): number {
  const v = row[i];
  return v === "" || v === undefined ? NaN : parseFloat(v);
}
