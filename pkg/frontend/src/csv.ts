/** Reader for the simulator's CSV dialect: comma-separated, '.' decimals,
 * header row, UTF-8, no quoting, '#' comment lines allowed before the header.
 * Empty cells decode to NaN (skipped diagnostics). */

import { readFileSync } from "fs";
import { SchemaError } from "./types.js";

export interface Table {
  header: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch {
    throw new SchemaError(`cannot read CSV file: ${path}`);
  }
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.length > 0 && !line.startsWith("#"));
  if (lines.length === 0) {
    throw new SchemaError(`empty CSV file: ${path}`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  if (rows.length === 0) {
    throw new SchemaError(`CSV has a header but no data rows: ${path}`);
  }
  return { header, rows };
}

/** Column by name; throws a SchemaError naming the missing column. */
export function column(table: Table, name: string, path = ""): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column '${name}'${path ? ` in ${path}` : ""}`);
  }
  return table.rows.map((row) => {
    const cell = row[idx] ?? "";
    return cell === "" ? NaN : Number(cell);
  });
}

export function stringColumn(table: Table, name: string, path = ""): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column '${name}'${path ? ` in ${path}` : ""}`);
  }
  return table.rows.map((row) => row[idx] ?? "");
}

export function requireColumns(table: Table, names: string[], path: string): void {
  for (const name of names) {
    if (!table.header.includes(name)) {
      throw new SchemaError(`missing column '${name}' in ${path}`);
    }
  }
}

export function readJson(path: string): unknown {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch {
    throw new SchemaError(`cannot read JSON file: ${path}`);
  }
  try {
    return JSON.parse(text);
  } catch {
    throw new SchemaError(`invalid JSON in ${path}`);
  }
}
