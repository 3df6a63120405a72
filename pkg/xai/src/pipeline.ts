import { copyFileSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";

import { writeCsv } from "./csv.js";
import { ColumnTransform, Dataset, Split, fitTransforms, invertColumn,
         loadDataset, packMatrix, splitRows } from "./dataset.js";
import { Mlp } from "./mlp.js";
import { EvalSummary, evalPredictions } from "./primary.js";
import { ShapReport, kernelShap } from "./shap.js";

/** Training recipe: two 128-wide hidden layers and a mean-squared-error
 * loss; inputs are the dataset's channel coefficients (log-standardized)
 * and outputs the optimal powers (log-standardized) plus reflection
 * coefficients (linear). */
export interface SurrogateSpec {
  hidden: [number, number];
  split: [number, number, number];
  seed: number;
  epochs: number;
  batchSize: number;
  learningRate: number;
  patience: number;
  /** input column names; defaults to every dataset feature */
  inputColumns?: string[];
}

export const DEFAULT_SPEC: SurrogateSpec = {
  hidden: [128, 128],
  split: [0.8, 0.1, 0.1],
  seed: 0,
  epochs: 60,
  batchSize: 256,
  learningRate: 1e-3,
  patience: 8,
};

export interface TrainedSurrogate {
  spec: SurrogateSpec;
  model: Mlp;
  inputColumns: string[];
  outputColumns: string[];
  xTransforms: ColumnTransform[];
  yTransforms: ColumnTransform[];
  split: Split;
  dataset: Dataset;
  valMse: number;
  testMse: number;
}

export function trainSurrogate(datasetCsv: string,
                               spec: Partial<SurrogateSpec> = {},
                               log?: (msg: string) => void): TrainedSurrogate {
  const full: SurrogateSpec = { ...DEFAULT_SPEC, ...spec };
  const ds = loadDataset(datasetCsv);
  const inputColumns = full.inputColumns ?? ds.meta.features.slice();
  const colOf = new Map(ds.table.header.map((h, i) => [h, i]));
  const xIdx = inputColumns.map((c) => {
    const i = colOf.get(c);
    if (i === undefined) throw new Error(`unknown input column ${c}`);
    return i;
  });
  const yIdx = ds.labelIdx;
  const split = splitRows(ds.table.rows.length, full.split, full.seed);

  const xLog = inputColumns.map(() => true);
  const yLog = ds.meta.labels.map((c) => c.startsWith("p_"));
  const xT = fitTransforms(ds.table, xIdx, xLog, split.train);
  const yT = fitTransforms(ds.table, yIdx, yLog, split.train);

  const pack = (rows: Int32Array) => ({
    x: packMatrix(ds.table, xIdx, xT, rows),
    y: packMatrix(ds.table, yIdx, yT, rows),
  });
  const tr = pack(split.train);
  const va = pack(split.val);
  const te = pack(split.test);

  const model = new Mlp({
    inputDim: xIdx.length,
    outputDim: yIdx.length,
    hidden: full.hidden,
    seed: full.seed,
    learningRate: full.learningRate,
    batchSize: full.batchSize,
    epochs: full.epochs,
    patience: full.patience,
  });
  const hist = model.fit(tr.x, tr.y, split.train.length, va.x, va.y,
                         split.val.length,
                         log ? (e, t, v) =>
                           log(`epoch ${e}: train ${t.toExponential(3)} val ${v.toExponential(3)}`)
                           : undefined);
  return {
    spec: full,
    model,
    inputColumns,
    outputColumns: ds.meta.labels.slice(),
    xTransforms: xT,
    yTransforms: yT,
    split,
    dataset: ds,
    valMse: hist.valLoss[hist.bestEpoch] ?? hist.valLoss.at(-1) ?? NaN,
    testMse: model.mse(te.x, te.y, split.test.length),
  };
}

/** Predict labels for dataset rows; returns raw-space values with the
 * reflection coefficients clamped to [0, 1]. */
export function predictRows(sur: TrainedSurrogate,
                            rows: Int32Array): Float64Array[] {
  const colOf = new Map(sur.dataset.table.header.map((h, i) => [h, i]));
  const xIdx = sur.inputColumns.map((c) => colOf.get(c)!);
  const x = packMatrix(sur.dataset.table, xIdx, sur.xTransforms, rows);
  const out = sur.model.predict(x, rows.length);
  const d = sur.outputColumns.length;
  const preds: Float64Array[] = [];
  for (let i = 0; i < rows.length; i++) {
    const row = new Float64Array(d);
    for (let j = 0; j < d; j++) {
      let v = invertColumn(out[i * d + j], sur.yTransforms[j]);
      if (sur.outputColumns[j].startsWith("rho_")) {
        v = Math.min(1, Math.max(0, v));
      }
      row[j] = v;
    }
    preds.push(row);
  }
  return preds;
}

/** Write the held-out rows as a standalone dataset (CSV + sidecar) plus the
 * surrogate's predictions, then score them through the optimizer package's
 * evaluation endpoint. */
export function scoreOnTestSplit(sur: TrainedSurrogate, workDir: string,
                                 tag = "test"): EvalSummary {
  mkdirSync(workDir, { recursive: true });
  const rows = sur.split.test;
  const dsPath = join(workDir, `${tag}-subset.csv`);
  writeCsv(dsPath, sur.dataset.table.header,
           Array.from(rows, (r) => sur.dataset.table.rows[r]));
  const meta = { ...sur.dataset.meta, n: rows.length };
  writeFileSync(dsPath + ".meta.json", JSON.stringify(meta));
  const predPath = join(workDir, `${tag}-predictions.csv`);
  writeCsv(predPath, sur.outputColumns, predictRows(sur, rows));
  return evalPredictions(dsPath, predPath, join(workDir, `${tag}-eval.csv`));
}

export interface GlobalImportance {
  feature: string;
  meanAbsPhi: number;
}

/** Global ranking: mean |phi| over explained instances for one output
 * (default the weakest user's power, the output the reference explanation
 * plots use). */
export function shapGlobalRanking(sur: TrainedSurrogate, outIndex = 0,
                                  nInstances = 30, nBackground = 50,
                                  nCoalitions = 4096,
                                  seed = 0): GlobalImportance[] {
  const colOf = new Map(sur.dataset.table.header.map((h, i) => [h, i]));
  const xIdx = sur.inputColumns.map((c) => colOf.get(c)!);
  const trainRows = sur.split.train;
  const testRows = sur.split.test;
  const bg: Float64Array[] = [];
  for (let i = 0; i < Math.min(nBackground, trainRows.length); i++) {
    const r = trainRows[i];
    bg.push(packMatrix(sur.dataset.table, xIdx, sur.xTransforms,
                       Int32Array.of(r)));
  }
  const f = (rows: Float64Array, n: number) => sur.model.predict(rows, n);
  const acc = new Float64Array(sur.inputColumns.length);
  const n = Math.min(nInstances, testRows.length);
  for (let i = 0; i < n; i++) {
    const x = packMatrix(sur.dataset.table, xIdx, sur.xTransforms,
                         Int32Array.of(testRows[i]));
    const rep = kernelShap(f, x, bg, sur.outputColumns.length, nCoalitions,
                           seed + i);
    for (let j = 0; j < acc.length; j++) {
      acc[j] += Math.abs(rep.phi[outIndex][j]);
    }
  }
  const out = sur.inputColumns.map((feature, j) => ({
    feature,
    meanAbsPhi: acc[j] / n,
  }));
  out.sort((a, b) => b.meanAbsPhi - a.meanAbsPhi);
  return out;
}

export interface AblationRow {
  variant: string;
  removed: string[];
  nFeatures: number;
  relativeSeeAccuracy: number;
  testMse: number;
}

/** Retrain with features removed least-important-first (cumulative), plus a
 * single variant dropping only the most important feature.  Accuracy is the
 * relative achieved-objective ratio scored by the optimizer package. */
export function featureEliminationAblation(
    datasetCsv: string, ranking: GlobalImportance[], workDir: string,
    spec: Partial<SurrogateSpec> = {}, steps?: number[],
    log?: (msg: string) => void): AblationRow[] {
  mkdirSync(workDir, { recursive: true });
  const ordered = ranking.map((r) => r.feature); // most important first
  const rows: AblationRow[] = [];

  const runVariant = (variant: string, removed: string[]) => {
    const keep = ordered.filter((f) => !removed.includes(f));
    const sur = trainSurrogate(datasetCsv, { ...spec, inputColumns: keep },
                               log);
    const summary = scoreOnTestSplit(sur, workDir, variant);
    rows.push({
      variant,
      removed: removed.slice(),
      nFeatures: keep.length,
      relativeSeeAccuracy: summary.relative_see_accuracy,
      testMse: sur.testMse,
    });
    if (log) {
      log(`${variant}: accuracy ${summary.relative_see_accuracy.toFixed(4)}`);
    }
  };

  runVariant("baseline", []);
  const leastFirst = ordered.slice().reverse();
  for (const nDrop of steps ?? [1, 2]) {
    runVariant(`drop-least-${nDrop}`, leastFirst.slice(0, nDrop));
  }
  runVariant("drop-top-1", [ordered[0]]);

  const lines = ["variant,removed,n_features,relative_see_accuracy,test_mse"];
  for (const r of rows) {
    lines.push([r.variant, r.removed.join("|"), r.nFeatures,
                r.relativeSeeAccuracy, r.testMse].join(","));
  }
  writeFileSync(join(workDir, "ablation.csv"), lines.join("\n") + "\n");
  writeFileSync(join(workDir, "ablation.json"),
                JSON.stringify(rows, null, 1));
  return rows;
}

/** Persist weights and the recipe next to each other. */
export function saveModel(sur: TrainedSurrogate, prefix: string): void {
  mkdirSync(dirname(prefix) || ".", { recursive: true });
  const layers = (sur.model as any).layers.map((l: any) => ({
    w: Array.from(l.w), b: Array.from(l.b), inDim: l.inDim, outDim: l.outDim,
  }));
  writeFileSync(prefix + ".weights.json", JSON.stringify(layers));
  writeFileSync(prefix + ".spec.json", JSON.stringify({
    spec: sur.spec,
    inputColumns: sur.inputColumns,
    outputColumns: sur.outputColumns,
    xTransforms: sur.xTransforms,
    yTransforms: sur.yTransforms,
    valMse: sur.valMse,
    testMse: sur.testMse,
  }, null, 1));
}
