/** Tiny causal transformer language model with segment-level recurrence.
 *
 * The model attends over [cached memory states ++ current segment] with no
 * positional encodings, so a hidden state depends only on the tokens at and
 * before its position. That makes memory reuse exact: scoring a suffix
 * against cached states of a prefix reproduces the concatenated forward pass
 * bit for bit (as long as the retained context fits in mem_len).
 *
 * Memory blocks cache, per layer, the hidden states that entered that layer,
 * plus the final normalized hidden states (used to score the next token when
 * a request arrives with memory but an empty context).
 */

import { gaussian, mulberry32 } from "./rng.js";
import { BOS_SYM, EOS_SYM, Tokenizer } from "./tokenizer.js";

export interface TinyLmConfig {
  layers: number;
  width: number;
  heads: number;
  memLen: number;
  seed: number;
}

export const DEFAULT_CONFIG: Omit<TinyLmConfig, "seed"> = {
  layers: 2,
  width: 64,
  heads: 2,
  memLen: 64,
};

export interface SegmentMems {
  /** per-layer hidden states entering that layer, most recent positions last */
  layers: number[][][];
  /** final (post-norm) hidden states for the same positions */
  finals: number[][];
}

type Matrix = number[][];

interface LayerWeights {
  ln1g: number[];
  ln1b: number[];
  wq: Matrix;
  wk: Matrix;
  wv: Matrix;
  wo: Matrix;
  ln2g: number[];
  ln2b: number[];
  w1: Matrix;
  b1: number[];
  w2: Matrix;
  b2: number[];
}

function zeros(n: number): number[] {
  return new Array<number>(n).fill(0);
}

function matvec(m: Matrix, v: number[]): number[] {
  const out = zeros(m.length);
  for (let i = 0; i < m.length; i++) {
    const row = m[i];
    let acc = 0;
    for (let j = 0; j < row.length; j++) acc += row[j] * v[j];
    out[i] = acc;
  }
  return out;
}

function layerNorm(v: number[], gamma: number[], beta: number[]): number[] {
  const n = v.length;
  let mean = 0;
  for (const x of v) mean += x;
  mean /= n;
  let variance = 0;
  for (const x of v) variance += (x - mean) * (x - mean);
  variance /= n;
  const inv = 1 / Math.sqrt(variance + 1e-5);
  return v.map((x, i) => gamma[i] * (x - mean) * inv + beta[i]);
}

function gelu(x: number): number {
  return 0.5 * x * (1 + Math.tanh(Math.sqrt(2 / Math.PI) * (x + 0.044715 * x ** 3)));
}

export function logSoftmax(logits: number[]): number[] {
  const max = Math.max(...logits);
  let total = 0;
  for (const x of logits) total += Math.exp(x - max);
  const logZ = max + Math.log(total);
  return logits.map((x) => x - logZ);
}

export class TinyLm {
  readonly config: TinyLmConfig;
  readonly tokenizer: Tokenizer;
  private readonly embedding: Matrix;
  private readonly layersW: LayerWeights[];
  private readonly lnFg: number[];
  private readonly lnFb: number[];
  private readonly wOut: Matrix;
  private readonly bOut: number[];

  constructor(tokenizer: Tokenizer, config: TinyLmConfig) {
    if (config.width % config.heads !== 0) {
      throw new Error("model width must be divisible by the head count");
    }
    this.config = config;
    this.tokenizer = tokenizer;
    const normal = gaussian(mulberry32(config.seed));
    const d = config.width;
    const std = 0.5 / Math.sqrt(d);
    const mat = (rows: number, cols: number): Matrix =>
      Array.from({ length: rows }, () =>
        Array.from({ length: cols }, () => normal() * std));
    this.embedding = mat(tokenizer.size, d);
    this.layersW = Array.from({ length: config.layers }, () => ({
      ln1g: zeros(d).fill(1),
      ln1b: zeros(d),
      wq: mat(d, d),
      wk: mat(d, d),
      wv: mat(d, d),
      wo: mat(d, d),
      ln2g: zeros(d).fill(1),
      ln2b: zeros(d),
      w1: mat(4 * d, d),
      b1: zeros(4 * d),
      w2: mat(d, 4 * d),
      b2: zeros(d),
    }));
    this.lnFg = zeros(d).fill(1);
    this.lnFb = zeros(d);
    this.wOut = mat(tokenizer.size, d);
    this.bOut = zeros(tokenizer.size);
  }

  /** One causal pass over `tokens`, attending to `mems` as a prefix. */
  forward(tokens: number[], mems: SegmentMems | null): {
    layerInputs: number[][][];
    finals: number[][];
  } {
    const { heads, width: d, layers } = this.config;
    const headDim = d / heads;
    let x: Matrix = tokens.map((t) => [...this.embedding[t]]);
    const layerInputs: number[][][] = [];
    for (let l = 0; l < layers; l++) {
      const w = this.layersW[l];
      layerInputs.push(x.map((row) => [...row]));
      const memRows = mems ? mems.layers[l] : [];
      const memCount = memRows.length;
      const normedMem = memRows.map((row) => layerNorm(row, w.ln1g, w.ln1b));
      const normedCur = x.map((row) => layerNorm(row, w.ln1g, w.ln1b));
      const keySource = [...normedMem, ...normedCur];
      const keys = keySource.map((row) => matvec(w.wk, row));
      const values = keySource.map((row) => matvec(w.wv, row));
      const next: Matrix = [];
      for (let i = 0; i < x.length; i++) {
        const q = matvec(w.wq, normedCur[i]);
        const reach = memCount + i + 1; // causal: keys up to this position
        const merged = zeros(d);
        for (let h = 0; h < heads; h++) {
          const off = h * headDim;
          const scores = new Array<number>(reach);
          for (let k = 0; k < reach; k++) {
            let dot = 0;
            for (let j = 0; j < headDim; j++) dot += q[off + j] * keys[k][off + j];
            scores[k] = dot / Math.sqrt(headDim);
          }
          const probs = logSoftmax(scores).map(Math.exp);
          for (let k = 0; k < reach; k++) {
            const p = probs[k];
            for (let j = 0; j < headDim; j++) merged[off + j] += p * values[k][off + j];
          }
        }
        const attnOut = matvec(w.wo, merged);
        const afterAttn = x[i].map((v, j) => v + attnOut[j]);
        const normed2 = layerNorm(afterAttn, w.ln2g, w.ln2b);
        const hiddenUp = matvec(w.w1, normed2).map((v, j) => gelu(v + w.b1[j]));
        const mlpOut = matvec(w.w2, hiddenUp).map((v, j) => v + w.b2[j]);
        next.push(afterAttn.map((v, j) => v + mlpOut[j]));
      }
      x = next;
    }
    const finals = x.map((row) => layerNorm(row, this.lnFg, this.lnFb));
    return { layerInputs, finals };
  }

  private logitsFor(final: number[]): number[] {
    return matvec(this.wOut, final).map((v, i) => v + this.bOut[i]);
  }

  /** Natural-log distribution over the vocabulary after `context`. */
  logDistribution(context: readonly string[], mems: SegmentMems | null): number[] {
    let tokens = this.tokenizer.encode(context);
    if (mems === null) tokens = [this.tokenizer.bosId, ...tokens];
    let final: number[];
    if (tokens.length === 0) {
      if (!mems || mems.finals.length === 0) {
        throw new Error("empty context requires non-empty memory");
      }
      final = mems.finals[mems.finals.length - 1];
    } else {
      const out = this.forward(tokens, mems);
      final = out.finals[out.finals.length - 1];
    }
    return logSoftmax(this.logitsFor(final));
  }

  /** log p(word | context, mems) in nats. */
  score(context: readonly string[], word: string, mems: SegmentMems | null): number {
    const dist = this.logDistribution(context, mems);
    const target = word === EOS_SYM ? this.tokenizer.eosId : this.tokenizer.id(word);
    return dist[target];
  }

  /** Run `context` chained on `prior` and cache the newest mem_len states. */
  saveMems(context: readonly string[], prior: SegmentMems | null): SegmentMems {
    let tokens = this.tokenizer.encode(context);
    if (prior === null) tokens = [this.tokenizer.bosId, ...tokens];
    if (tokens.length === 0 && prior !== null) {
      return {
        layers: prior.layers.map((block) => block.map((row) => [...row])),
        finals: prior.finals.map((row) => [...row]),
      };
    }
    const out = this.forward(tokens, prior);
    const keep = this.config.memLen;
    const layers = out.layerInputs.map((block, l) =>
      [...(prior ? prior.layers[l] : []), ...block].slice(-keep));
    const finals = [...(prior ? prior.finals : []), ...out.finals].slice(-keep);
    return { layers, finals };
  }
}

export { BOS_SYM, EOS_SYM };
