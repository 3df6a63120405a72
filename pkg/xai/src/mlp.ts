import { Rng } from "./rng.js";

/** Fully connected regressor: two ReLU hidden layers (128 wide by default),
 * linear output, mean-squared-error loss, Adam updates.  Written against
 * flat Float64Arrays so training 5e4-row datasets stays in the minutes range
 * without native dependencies. */

export interface MlpSpec {
  inputDim: number;
  outputDim: number;
  hidden?: [number, number];
  seed?: number;
  learningRate?: number;
  batchSize?: number;
  epochs?: number;
  patience?: number;
}

interface Layer {
  w: Float64Array; // inDim x outDim, row-major
  b: Float64Array;
  inDim: number;
  outDim: number;
  // adam state
  mw: Float64Array;
  vw: Float64Array;
  mb: Float64Array;
  vb: Float64Array;
}

function makeLayer(inDim: number, outDim: number, rng: Rng): Layer {
  const w = new Float64Array(inDim * outDim);
  const scale = Math.sqrt(2.0 / inDim); // He init for ReLU stacks
  for (let i = 0; i < w.length; i++) w[i] = scale * rng.normal();
  return {
    w, b: new Float64Array(outDim), inDim, outDim,
    mw: new Float64Array(inDim * outDim), vw: new Float64Array(inDim * outDim),
    mb: new Float64Array(outDim), vb: new Float64Array(outDim),
  };
}

/** C[n x p] += A[n x m] * W[m x p]  (C pre-filled with bias rows) */
function matmulInto(a: Float64Array, n: number, m: number, w: Float64Array,
                    p: number, c: Float64Array): void {
  for (let i = 0; i < n; i++) {
    const ai = i * m;
    const ci = i * p;
    for (let k = 0; k < m; k++) {
      const av = a[ai + k];
      if (av === 0) continue;
      const wk = k * p;
      for (let j = 0; j < p; j++) c[ci + j] += av * w[wk + j];
    }
  }
}

export interface FitHistory {
  trainLoss: number[];
  valLoss: number[];
  bestEpoch: number;
}

export class Mlp {
  readonly spec: Required<MlpSpec>;
  private layers: Layer[];
  private step = 0;

  constructor(spec: MlpSpec) {
    this.spec = {
      hidden: [128, 128], seed: 0, learningRate: 1e-3, batchSize: 256,
      epochs: 60, patience: 8, ...spec,
    } as Required<MlpSpec>;
    const rng = new Rng(this.spec.seed + 0x5eed);
    const [h1, h2] = this.spec.hidden;
    this.layers = [
      makeLayer(this.spec.inputDim, h1, rng),
      makeLayer(h1, h2, rng),
      makeLayer(h2, this.spec.outputDim, rng),
    ];
  }

  /** Forward pass for n rows packed in x (n * inputDim). */
  predict(x: Float64Array, n: number): Float64Array {
    let act = x;
    let dim = this.spec.inputDim;
    for (let li = 0; li < this.layers.length; li++) {
      const layer = this.layers[li];
      const out = new Float64Array(n * layer.outDim);
      for (let i = 0; i < n; i++) out.set(layer.b, i * layer.outDim);
      matmulInto(act, n, dim, layer.w, layer.outDim, out);
      if (li < this.layers.length - 1) {
        for (let i = 0; i < out.length; i++) if (out[i] < 0) out[i] = 0;
      }
      act = out;
      dim = layer.outDim;
    }
    return act;
  }

  mse(x: Float64Array, y: Float64Array, n: number): number {
    const pred = this.predict(x, n);
    let s = 0;
    for (let i = 0; i < pred.length; i++) {
      const d = pred[i] - y[i];
      s += d * d;
    }
    return s / pred.length;
  }

  private adam(layer: Layer, gw: Float64Array, gb: Float64Array): void {
    const lr = this.spec.learningRate;
    const b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const t = this.step;
    const c1 = 1 - Math.pow(b1, t);
    const c2 = 1 - Math.pow(b2, t);
    for (let i = 0; i < layer.w.length; i++) {
      layer.mw[i] = b1 * layer.mw[i] + (1 - b1) * gw[i];
      layer.vw[i] = b2 * layer.vw[i] + (1 - b2) * gw[i] * gw[i];
      layer.w[i] -= lr * (layer.mw[i] / c1) / (Math.sqrt(layer.vw[i] / c2) + eps);
    }
    for (let i = 0; i < layer.b.length; i++) {
      layer.mb[i] = b1 * layer.mb[i] + (1 - b1) * gb[i];
      layer.vb[i] = b2 * layer.vb[i] + (1 - b2) * gb[i] * gb[i];
      layer.b[i] -= lr * (layer.mb[i] / c1) / (Math.sqrt(layer.vb[i] / c2) + eps);
    }
  }

  private trainBatch(x: Float64Array, y: Float64Array, n: number): number {
    const L = this.layers;
    const dims = [this.spec.inputDim, L[0].outDim, L[1].outDim, L[2].outDim];
    // forward with cached activations
    const acts: Float64Array[] = [x];
    for (let li = 0; li < L.length; li++) {
      const out = new Float64Array(n * dims[li + 1]);
      for (let i = 0; i < n; i++) out.set(L[li].b, i * dims[li + 1]);
      matmulInto(acts[li], n, dims[li], L[li].w, dims[li + 1], out);
      if (li < L.length - 1) {
        for (let i = 0; i < out.length; i++) if (out[i] < 0) out[i] = 0;
      }
      acts.push(out);
    }
    const pred = acts[L.length];
    // loss grad (mean over batch and outputs)
    let loss = 0;
    let delta = new Float64Array(pred.length);
    const scale = 2.0 / pred.length;
    for (let i = 0; i < pred.length; i++) {
      const d = pred[i] - y[i];
      loss += d * d;
      delta[i] = scale * d;
    }
    loss /= pred.length;

    this.step += 1;
    for (let li = L.length - 1; li >= 0; li--) {
      const layer = L[li];
      const inAct = acts[li];
      const inDim = dims[li];
      const outDim = dims[li + 1];
      const gw = new Float64Array(inDim * outDim);
      const gb = new Float64Array(outDim);
      for (let i = 0; i < n; i++) {
        const di = i * outDim;
        const ai = i * inDim;
        for (let j = 0; j < outDim; j++) gb[j] += delta[di + j];
        for (let k = 0; k < inDim; k++) {
          const av = inAct[ai + k];
          if (av === 0) continue;
          const gk = k * outDim;
          for (let j = 0; j < outDim; j++) gw[gk + j] += av * delta[di + j];
        }
      }
      if (li > 0) {
        const prev = new Float64Array(n * inDim);
        for (let i = 0; i < n; i++) {
          const di = i * outDim;
          const pi = i * inDim;
          for (let k = 0; k < inDim; k++) {
            if (inAct[pi + k] <= 0) continue; // ReLU gate
            const wk = k * outDim;
            let s = 0;
            for (let j = 0; j < outDim; j++) s += layer.w[wk + j] * delta[di + j];
            prev[pi + k] = s;
          }
        }
        this.adam(layer, gw, gb);
        delta = prev;
      } else {
        this.adam(layer, gw, gb);
      }
    }
    return loss;
  }

  /** Minibatch training with early stopping on the validation loss; the
   * best-epoch weights are restored before returning. */
  fit(xTrain: Float64Array, yTrain: Float64Array, nTrain: number,
      xVal: Float64Array, yVal: Float64Array, nVal: number,
      log?: (epoch: number, tr: number, va: number) => void): FitHistory {
    const { batchSize, epochs, patience, inputDim, outputDim } = this.spec;
    const rng = new Rng(this.spec.seed + 0xba7c4);
    const hist: FitHistory = { trainLoss: [], valLoss: [], bestEpoch: -1 };
    let best = Infinity;
    let bestWeights: Float64Array[] | null = null;
    let stale = 0;
    const bx = new Float64Array(batchSize * inputDim);
    const by = new Float64Array(batchSize * outputDim);
    for (let epoch = 0; epoch < epochs; epoch++) {
      const order = rng.permutation(nTrain);
      let accum = 0;
      let batches = 0;
      for (let start = 0; start < nTrain; start += batchSize) {
        const n = Math.min(batchSize, nTrain - start);
        for (let i = 0; i < n; i++) {
          const src = order[start + i];
          bx.set(xTrain.subarray(src * inputDim, (src + 1) * inputDim),
                 i * inputDim);
          by.set(yTrain.subarray(src * outputDim, (src + 1) * outputDim),
                 i * outputDim);
        }
        accum += this.trainBatch(n === batchSize ? bx : bx.slice(0, n * inputDim),
                                 n === batchSize ? by : by.slice(0, n * outputDim),
                                 n);
        batches += 1;
      }
      const tr = accum / batches;
      const va = nVal > 0 ? this.mse(xVal, yVal, nVal) : tr;
      hist.trainLoss.push(tr);
      hist.valLoss.push(va);
      if (log) log(epoch, tr, va);
      if (!Number.isFinite(tr) || !Number.isFinite(va)) {
        throw new Error(`non-finite loss at epoch ${epoch}`);
      }
      if (va < best - 1e-12) {
        best = va;
        hist.bestEpoch = epoch;
        bestWeights = this.layers.flatMap((l) => [l.w.slice(), l.b.slice()]);
        stale = 0;
      } else if (++stale >= patience) {
        break;
      }
    }
    if (bestWeights) {
      for (let li = 0; li < this.layers.length; li++) {
        this.layers[li].w.set(bestWeights[2 * li]);
        this.layers[li].b.set(bestWeights[2 * li + 1]);
      }
    }
    return hist;
  }
}
