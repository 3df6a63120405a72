import { readFileSync, writeFileSync } from "node:fs";

/** Strict numeric CSV: one header row, float cells, no quoting.  This is the
 * exact format the optimizer package emits for datasets and evaluations. */
export interface NumericTable {
  header: string[];
  rows: Float64Array[];
}

export function readCsv(path: string): NumericTable {
  const text = readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error(`${path}: empty CSV`);
  const header = lines[0].split(",");
  const rows: Float64Array[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new Error(`${path}:${i + 1}: expected ${header.length} cells`);
    }
    const row = new Float64Array(header.length);
    for (let j = 0; j < parts.length; j++) {
      const v = Number(parts[j]);
      if (!Number.isFinite(v)) {
        throw new Error(`${path}:${i + 1}: non-numeric cell '${parts[j]}'`);
      }
      row[j] = v;
    }
    rows.push(row);
  }
  return { header, rows };
}

export function writeCsv(path: string, header: string[],
                         rows: ArrayLike<number>[]): void {
  const lines = [header.join(",")];
  for (const row of rows) {
    const cells = new Array<string>(row.length);
    for (let j = 0; j < row.length; j++) cells[j] = fullPrecision(row[j]);
    lines.push(cells.join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

/** Round-trip-exact float formatting (matches Python's repr for finite
 * doubles closely enough for re-parsing). */
export function fullPrecision(x: number): string {
  return String(x);
}
