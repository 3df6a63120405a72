import { readFileSync } from "node:fs";

import { NumericTable, readCsv } from "./csv.js";
import { Rng } from "./rng.js";

/** Exported-dataset metadata written by the optimizer package. */
export interface DatasetMeta {
  schema_version: number;
  kind: string;
  k: number;
  m: number;
  n: number;
  solver: string;
  seed: number;
  noise_user_w: number;
  noise_eav_w: number;
  r_min: number[];
  p_max_w: number;
  p_circuit_w: number;
  features: string[];
  labels: string[];
}

export interface Dataset {
  meta: DatasetMeta;
  table: NumericTable;
  featureIdx: number[];
  labelIdx: number[];
  zetaIdx: number;
}

export function loadDataset(csvPath: string): Dataset {
  const meta = JSON.parse(readFileSync(csvPath + ".meta.json", "utf8")) as DatasetMeta;
  if (meta.kind !== "ambsee-dataset") {
    throw new Error(`${csvPath}: not an exported dataset (kind=${meta.kind})`);
  }
  const table = readCsv(csvPath);
  const col = new Map(table.header.map((h, i) => [h, i]));
  const pick = (names: string[]) => names.map((n) => {
    const i = col.get(n);
    if (i === undefined) throw new Error(`${csvPath}: missing column ${n}`);
    return i;
  });
  return {
    meta,
    table,
    featureIdx: pick(meta.features),
    labelIdx: pick(meta.labels),
    zetaIdx: pick(["zeta"])[0],
  };
}

export interface Split {
  train: Int32Array;
  val: Int32Array;
  test: Int32Array;
}

export function splitRows(n: number, fractions: [number, number, number],
                          seed: number): Split {
  const s = fractions[0] + fractions[1] + fractions[2];
  if (Math.abs(s - 1) > 1e-9) throw new Error("split fractions must sum to 1");
  const perm = new Rng(seed + 0x517).permutation(n);
  const nTrain = Math.floor(n * fractions[0]);
  const nVal = Math.floor(n * fractions[1]);
  return {
    train: perm.slice(0, nTrain),
    val: perm.slice(nTrain, nTrain + nVal),
    test: perm.slice(nTrain + nVal),
  };
}

/** Per-column normalization: optional log10 then z-score.  Channel
 * amplitudes and power labels span several decades, so the log transform is
 * what makes the regression well-conditioned; reflection coefficients stay
 * linear in [0, 1]. */
export interface ColumnTransform {
  log: boolean;
  mean: number;
  std: number;
}

export function fitTransforms(table: NumericTable, colIdx: number[],
                              logCols: boolean[],
                              rows: Int32Array): ColumnTransform[] {
  const out: ColumnTransform[] = [];
  for (let j = 0; j < colIdx.length; j++) {
    let mean = 0;
    for (const r of rows) {
      const v = table.rows[r][colIdx[j]];
      mean += logCols[j] ? Math.log10(v) : v;
    }
    mean /= rows.length;
    let varAcc = 0;
    for (const r of rows) {
      const v = table.rows[r][colIdx[j]];
      const t = (logCols[j] ? Math.log10(v) : v) - mean;
      varAcc += t * t;
    }
    const std = Math.max(Math.sqrt(varAcc / rows.length), 1e-12);
    out.push({ log: logCols[j], mean, std });
  }
  return out;
}

export function packMatrix(table: NumericTable, colIdx: number[],
                           transforms: ColumnTransform[],
                           rows: Int32Array): Float64Array {
  const d = colIdx.length;
  const out = new Float64Array(rows.length * d);
  for (let i = 0; i < rows.length; i++) {
    const row = table.rows[rows[i]];
    for (let j = 0; j < d; j++) {
      const t = transforms[j];
      const v = row[colIdx[j]];
      out[i * d + j] = ((t.log ? Math.log10(v) : v) - t.mean) / t.std;
    }
  }
  return out;
}

export function invertColumn(value: number, t: ColumnTransform): number {
  const raw = value * t.std + t.mean;
  return t.log ? Math.pow(10, raw) : raw;
}
