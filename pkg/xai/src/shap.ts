/** Shapley-value attribution for a black-box regressor.
 *
 * Coalition semantics: present features take their values from the explained
 * instance, absent features are filled from background rows, and the
 * coalition value v(S) is the mean model output over the background set.
 * The sampled estimator masks instances per coalition, weights them with the
 * Shapley kernel, and fits a weighted linear regression whose coefficients
 * are the attributions; the efficiency constraint phi_0 + sum(phi) = f(x) is
 * eliminated exactly, so additivity holds by construction and exhaustive
 * enumeration reproduces the definitional Shapley values.
 */

import { Rng } from "./rng.js";

export type BatchPredictor = (rows: Float64Array, n: number) => Float64Array;

export interface ShapReport {
  /** per-output attribution matrix: phi[out][feature] */
  phi: number[][];
  /** per-output base value (expected output over the background) */
  phi0: number[];
  /** per-output model prediction on the explained instance */
  fx: number[];
  nCoalitions: number;
  exhaustive: boolean;
}

function factorial(n: number): number {
  let f = 1;
  for (let i = 2; i <= n; i++) f *= i;
  return f;
}

function choose(n: number, k: number): number {
  return factorial(n) / (factorial(k) * factorial(n - k));
}

/** Marginal-contribution weight of a coalition of size s when one more
 * feature joins: s!(L-s-1)!/L!  */
export function coalitionWeight(s: number, L: number): number {
  return (factorial(s) * factorial(L - s - 1)) / factorial(L);
}

/** Shapley regression kernel for an intermediate coalition of size s. */
export function shapleyKernel(s: number, L: number): number {
  return (L - 1) / (choose(L, s) * s * (L - s));
}

/** Mean model output over masked background rows for each coalition mask.
 * masks is an array of bitmasks over L features. */
function coalitionValues(f: BatchPredictor, x: Float64Array,
                         background: Float64Array[], masks: Int32Array,
                         outDim: number): Float64Array {
  const L = x.length;
  const nb = background.length;
  const total = masks.length * nb;
  const batch = new Float64Array(total * L);
  let r = 0;
  for (let c = 0; c < masks.length; c++) {
    const mask = masks[c];
    for (let b = 0; b < nb; b++) {
      const off = r * L;
      batch.set(background[b], off);
      for (let j = 0; j < L; j++) {
        if (mask & (1 << j)) batch[off + j] = x[j];
      }
      r += 1;
    }
  }
  const preds = f(batch, total);
  const out = new Float64Array(masks.length * outDim);
  for (let c = 0; c < masks.length; c++) {
    for (let b = 0; b < nb; b++) {
      const pi = (c * nb + b) * outDim;
      for (let o = 0; o < outDim; o++) out[c * outDim + o] += preds[pi + o];
    }
  }
  for (let i = 0; i < out.length; i++) out[i] /= nb;
  return out;
}

/** Definitional Shapley values by full enumeration of all 2^L coalitions:
 * phi_j = sum_S w(|S|) [v(S u {j}) - v(S)].  Exponential; the test oracle
 * and small-L reference. */
export function exactShapley(f: BatchPredictor, x: Float64Array,
                             background: Float64Array[],
                             outDim: number): ShapReport {
  const L = x.length;
  if (L > 16) throw new Error("exact enumeration limited to 16 features");
  const nMasks = 1 << L;
  const masks = new Int32Array(nMasks);
  for (let m = 0; m < nMasks; m++) masks[m] = m;
  const v = coalitionValues(f, x, background, masks, outDim);

  const phi: number[][] = [];
  for (let o = 0; o < outDim; o++) phi.push(new Array(L).fill(0));
  for (let m = 0; m < nMasks; m++) {
    const s = popcount(m);
    for (let j = 0; j < L; j++) {
      if (m & (1 << j)) continue;
      const w = coalitionWeight(s, L);
      const withJ = m | (1 << j);
      for (let o = 0; o < outDim; o++) {
        phi[o][j] += w * (v[withJ * outDim + o] - v[m * outDim + o]);
      }
    }
  }
  const phi0 = new Array(outDim).fill(0).map((_, o) => v[o]); // v(empty set)
  const fx = new Array(outDim).fill(0)
    .map((_, o) => v[(nMasks - 1) * outDim + o]);
  return { phi, phi0, fx, nCoalitions: nMasks, exhaustive: true };
}

function popcount(m: number): number {
  let c = 0;
  while (m) {
    m &= m - 1;
    c += 1;
  }
  return c;
}

/** Kernel-regression Shapley estimator.  With nCoalitions >= 2^L - 2 every
 * intermediate coalition is enumerated once and the result equals the
 * definitional values; otherwise coalitions are sampled with probability
 * proportional to their kernel mass. */
export function kernelShap(f: BatchPredictor, x: Float64Array,
                           background: Float64Array[], outDim: number,
                           nCoalitions = 2048, seed = 0): ShapReport {
  const L = x.length;
  if (L < 2) throw new Error("need at least two features");
  const full = (1 << L) - 2; // intermediate coalitions
  const exhaustive = nCoalitions >= full;

  const masks: number[] = [];
  const weights: number[] = [];
  if (exhaustive) {
    for (let m = 1; m < (1 << L) - 1; m++) {
      masks.push(m);
      weights.push(shapleyKernel(popcount(m), L));
    }
  } else {
    if (nCoalitions < L + 2) {
      throw new Error("need at least L + 2 sampled coalitions");
    }
    // size distribution proportional to kernel mass per size
    const sizeMass: number[] = [];
    let total = 0;
    for (let s = 1; s <= L - 1; s++) {
      const mass = shapleyKernel(s, L) * choose(L, s);
      sizeMass.push(mass);
      total += mass;
    }
    const rng = new Rng(seed + 0x5a9);
    for (let c = 0; c < nCoalitions; c++) {
      let u = rng.next() * total;
      let s = 1;
      while (s < L - 1 && u > sizeMass[s - 1]) {
        u -= sizeMass[s - 1];
        s += 1;
      }
      // uniform subset of size s
      const perm = rng.permutation(L);
      let mask = 0;
      for (let i = 0; i < s; i++) mask |= 1 << perm[i];
      masks.push(mask);
      weights.push(1.0); // sampling already follows the kernel distribution
    }
  }

  const maskArr = Int32Array.from(masks);
  const v = coalitionValues(f, x, background, maskArr, outDim);
  const vEmpty = coalitionValues(f, x, background, Int32Array.of(0), outDim);
  const fxArr = f(Float64Array.from(x), 1);

  // Weighted least squares with the efficiency constraint eliminated:
  // phi_{L-1} = (f(x) - phi0) - sum_{j<L-1} phi_j.
  const d = L - 1;
  const ata = new Float64Array(d * d);
  const atb = new Float64Array(d * outDim);
  const zRow = new Float64Array(d);
  for (let c = 0; c < masks.length; c++) {
    const mask = masks[c];
    const w = weights[c];
    const zLast = mask & (1 << (L - 1)) ? 1 : 0;
    for (let j = 0; j < d; j++) {
      zRow[j] = ((mask & (1 << j)) ? 1 : 0) - zLast;
    }
    for (let i = 0; i < d; i++) {
      if (zRow[i] === 0) continue;
      for (let j = 0; j < d; j++) {
        ata[i * d + j] += w * zRow[i] * zRow[j];
      }
    }
    for (let o = 0; o < outDim; o++) {
      const target = (v[c * outDim + o] - vEmpty[o])
        - zLast * (fxArr[o] - vEmpty[o]);
      for (let i = 0; i < d; i++) {
        if (zRow[i] !== 0) atb[i * outDim + o] += w * zRow[i] * target;
      }
    }
  }
  const sol = solveMultiRhs(ata, atb, d, outDim);

  const phi: number[][] = [];
  for (let o = 0; o < outDim; o++) {
    const row = new Array(L).fill(0);
    let acc = 0;
    for (let j = 0; j < d; j++) {
      row[j] = sol[j * outDim + o];
      acc += row[j];
    }
    row[L - 1] = (fxArr[o] - vEmpty[o]) - acc;
    phi.push(row);
  }
  return {
    phi,
    phi0: Array.from(vEmpty),
    fx: Array.from(fxArr),
    nCoalitions: masks.length,
    exhaustive,
  };
}

/** Gaussian elimination with partial pivoting; B holds multiple columns. */
export function solveMultiRhs(aIn: Float64Array, bIn: Float64Array,
                              n: number, m: number): Float64Array {
  const a = aIn.slice();
  const b = bIn.slice();
  for (let col = 0; col < n; col++) {
    let piv = col;
    for (let r = col + 1; r < n; r++) {
      if (Math.abs(a[r * n + col]) > Math.abs(a[piv * n + col])) piv = r;
    }
    if (Math.abs(a[piv * n + col]) < 1e-12) {
      throw new Error("singular regression system; add more coalitions");
    }
    if (piv !== col) {
      for (let j = 0; j < n; j++) {
        const t = a[col * n + j];
        a[col * n + j] = a[piv * n + j];
        a[piv * n + j] = t;
      }
      for (let j = 0; j < m; j++) {
        const t = b[col * m + j];
        b[col * m + j] = b[piv * m + j];
        b[piv * m + j] = t;
      }
    }
    const inv = 1.0 / a[col * n + col];
    for (let r = 0; r < n; r++) {
      if (r === col) continue;
      const factor = a[r * n + col] * inv;
      if (factor === 0) continue;
      for (let j = col; j < n; j++) a[r * n + j] -= factor * a[col * n + j];
      for (let j = 0; j < m; j++) b[r * m + j] -= factor * b[col * m + j];
    }
  }
  const out = new Float64Array(n * m);
  for (let r = 0; r < n; r++) {
    const inv = 1.0 / a[r * n + r];
    for (let j = 0; j < m; j++) out[r * m + j] = b[r * m + j] * inv;
  }
  return out;
}

/** Additivity residual per output: phi0 + sum_j phi_j - f(x). */
export function additivityResidual(rep: ShapReport): number[] {
  return rep.phi.map((row, o) =>
    rep.phi0[o] + row.reduce((a, b) => a + b, 0) - rep.fx[o]);
}
