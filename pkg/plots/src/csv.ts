/**
 * Readers for the table and metadata files the simulator CLI emits.
 *
 * The producer writes plain comma-separated values without quoting (numeric
 * cells and bare identifiers only), so no quote handling is needed here.
 * Schema validation happens before any figure work: a missing or
 * non-numeric column fails with the offending column named.
 */
import { readFileSync } from "fs";
import path from "path";

export interface Table {
  /** File path, kept for error messages. */
  source: string;
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string, source: string): Table {
  const lines = text
    .split("\n")
    .map((l) => (l.endsWith("\r") ? l.slice(0, -1) : l))
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`${source}: file is empty`);
  }
  const header = lines[0]!.split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new Error(
        `${source}: row ${i + 1} has ${cells.length} cells, ` +
          `header has ${header.length}`
      );
    }
    return cells;
  });
  return { source, header, rows };
}

export function readTable(filePath: string): Table {
  return parseCsv(readFileSync(filePath, "utf-8"), filePath);
}

/** Index of each required column, or an error naming the first missing one. */
export function columnIndex(
  table: Table,
  required: string[]
): Record<string, number> {
  const index: Record<string, number> = {};
  for (const name of required) {
    const i = table.header.indexOf(name);
    if (i < 0) {
      throw new Error(
        `${table.source}: missing column '${name}' ` +
          `(header: ${table.header.join(", ")})`
      );
    }
    index[name] = i;
  }
  return index;
}

/** One column as finite numbers; a bad cell names the column and row. */
export function numericColumn(table: Table, name: string): number[] {
  const i = columnIndex(table, [name])[name]!;
  return table.rows.map((row, r) => {
    const value = Number(row[i]);
    if (!Number.isFinite(value)) {
      throw new Error(
        `${table.source}: column '${name}' row ${r + 1}: ` +
          `not a finite number: ${JSON.stringify(row[i])}`
      );
    }
    return value;
  });
}

export interface Metadata {
  command: string;
  lambda_total?: number;
  x0?: number;
  n_star?: number;
  eps_band?: number;
  n_max?: number;
  replicates?: number;
  scaling?: { n_star: number; time_factor: number; size_factor: number };
  model?: { regime: string; K: number; b: number; d: number; c: number };
  [key: string]: unknown;
}

export function readMetadata(dir: string): Metadata {
  const file = path.join(dir, "metadata.json");
  const doc = JSON.parse(readFileSync(file, "utf-8")) as Metadata;
  if (typeof doc.command !== "string") {
    throw new Error(`${file}: missing 'command' field`);
  }
  return doc;
}
