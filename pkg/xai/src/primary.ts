/** Bridge to the optimizer package's command-line surface.  The surrogate
 * side never re-implements the physical model: datasets are generated by the
 * primary CLI and predictions are scored by its evaluation endpoint. */

import { spawnSync } from "node:child_process";
import { existsSync, readFileSync } from "node:fs";

export function primaryCommand(): string[] {
  const env = process.env.AMBSEE_CMD;
  if (env && env.trim().length > 0) return env.trim().split(/\s+/);
  return ["python3", "-m", "ambsee.cli"];
}

export function runPrimary(args: string[]): any {
  const [cmd, ...base] = primaryCommand();
  const res = spawnSync(cmd, [...base, ...args], {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (res.error) throw res.error;
  if (res.status !== 0) {
    throw new Error(`primary CLI failed (${res.status}): ${res.stderr}`);
  }
  return JSON.parse(res.stdout);
}

export interface ExportOptions {
  k: number;
  m: number;
  n: number;
  seed: number;
  out: string;
  solver?: string;
}

/** Generate (or reuse) an exported dataset; returns its metadata. */
export function ensureDataset(opts: ExportOptions): any {
  if (existsSync(opts.out) && existsSync(opts.out + ".meta.json")) {
    const meta = JSON.parse(readFileSync(opts.out + ".meta.json", "utf8"));
    if (meta.n === opts.n && meta.k === opts.k && meta.m === opts.m
        && meta.seed === opts.seed) {
      return meta;
    }
  }
  return runPrimary([
    "dataset", "--k", String(opts.k), "--m", String(opts.m),
    "--n", String(opts.n), "--seed", String(opts.seed),
    "--solver", opts.solver ?? "closed", "--out", opts.out,
  ]);
}

export interface EvalSummary {
  n: number;
  n_feasible: number;
  n_scored: number;
  relative_see_accuracy: number;
  sum_ratio: number;
}

/** Score a predictions CSV against a dataset via the primary checker (the
 * feasibility projection lives on that side). */
export function evalPredictions(datasetCsv: string, predictionsCsv: string,
                                outCsv: string): EvalSummary {
  return runPrimary([
    "dataset", "--eval", datasetCsv, "--predictions", predictionsCsv,
    "--out", outCsv,
  ]) as EvalSummary;
}
