/** Minimal pipeline runner:
 *
 *   node dist/main.js train   --dataset d.csv --out models/run1 [--seed 0]
 *   node dist/main.js explain --dataset d.csv [--instances 30]
 *   node dist/main.js ablate  --dataset d.csv --work out/ablation
 *
 * Dataset CSVs come from the optimizer package (`ambsee dataset ...`); set
 * AMBSEE_CMD if its CLI is not reachable as `python3 -m ambsee.cli`.
 */

import { featureEliminationAblation, saveModel, scoreOnTestSplit,
         shapGlobalRanking, trainSurrogate } from "./pipeline.js";

function flag(args: string[], name: string, fallback?: string): string {
  const i = args.indexOf(`--${name}`);
  if (i >= 0 && i + 1 < args.length) return args[i + 1];
  if (fallback !== undefined) return fallback;
  throw new Error(`missing --${name}`);
}

async function main(): Promise<number> {
  const [verb, ...rest] = process.argv.slice(2);
  const log = (m: string) => console.error(m);
  if (verb === "train") {
    const dataset = flag(rest, "dataset");
    const out = flag(rest, "out", "model");
    const seed = Number(flag(rest, "seed", "0"));
    const sur = trainSurrogate(dataset, { seed }, log);
    const summary = scoreOnTestSplit(sur, out + "-eval");
    saveModel(sur, out);
    console.log(JSON.stringify({
      testMse: sur.testMse, ...summary,
    }, null, 1));
    return 0;
  }
  if (verb === "explain") {
    const dataset = flag(rest, "dataset");
    const seed = Number(flag(rest, "seed", "0"));
    const n = Number(flag(rest, "instances", "30"));
    const sur = trainSurrogate(dataset, { seed }, log);
    const ranking = shapGlobalRanking(sur, 0, n);
    console.log(JSON.stringify(ranking, null, 1));
    return 0;
  }
  if (verb === "ablate") {
    const dataset = flag(rest, "dataset");
    const work = flag(rest, "work", "ablation-out");
    const seed = Number(flag(rest, "seed", "0"));
    const sur = trainSurrogate(dataset, { seed }, log);
    const ranking = shapGlobalRanking(sur);
    const rows = featureEliminationAblation(dataset, ranking, work, { seed },
                                            undefined, log);
    console.log(JSON.stringify(rows, null, 1));
    return 0;
  }
  console.error("usage: main.js {train|explain|ablate} --dataset <csv> ...");
  return 2;
}

main().then((code) => process.exit(code), (err) => {
  console.error(err);
  process.exit(1);
});
