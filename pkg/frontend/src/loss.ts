/**
 * Soft Dice, volume-aware Dice and cross-entropy losses with analytic
 * gradients over caller-provided dense arrays.
 *
 * Every reduction and elementwise expression mirrors the Python library
 * op-for-op (same pairwise summation order, same product/division
 * grouping, same portable log), which makes the float64 results
 * bit-identical across the two implementations. Float32 inputs are
 * widened to float64 for computation; the gradient is returned in the
 * input's dtype by a final downcast.
 */

import { Connectivity, Shape3, labelComponents, weightMap } from "./components.js";
import { pairwiseSum } from "./pairwiseSum.js";
import { portableLog } from "./portableLog.js";

export type ProbArray = Float64Array | Float32Array;

export interface LossOptions {
  epsilon?: number;
  /** C: scale of the weighted overlap numerator (2 matches the plain Dice numerator). */
  numeratorConstant?: number;
  connectivity?: Connectivity;
}

export interface LossResult<A extends ProbArray = Float64Array> {
  value: number;
  gradient: A;
}

export const DEFAULT_EPSILON = 1e-5;
export const DEFAULT_NUMERATOR_CONSTANT = 2.0;

function checkInputs(p: ProbArray, g: Uint8Array, shape: Shape3): void {
  const n = shape[0] * shape[1] * shape[2];
  if (!(shape.length === 3) || shape.some((d) => !Number.isInteger(d) || d <= 0)) {
    throw new RangeError(`bad shape [${shape.join(", ")}]`);
  }
  if (!(p instanceof Float64Array) && !(p instanceof Float32Array)) {
    throw new TypeError("p must be a Float64Array or Float32Array");
  }
  if (!(g instanceof Uint8Array)) {
    throw new TypeError("g must be a Uint8Array of 0/1");
  }
  if (p.length !== n || g.length !== n) {
    throw new RangeError(`shape ${shape.join("x")} implies ${n} voxels, got p=${p.length}, g=${g.length}`);
  }
}

function toF64(p: ProbArray): Float64Array {
  return p instanceof Float64Array ? p : Float64Array.from(p);
}

function castLike<A extends ProbArray>(like: A, grad: Float64Array): A {
  if (like instanceof Float32Array) {
    return Float32Array.from(grad) as A;
  }
  return grad as A;
}

function products(a: Float64Array, b: ArrayLike<number>): Float64Array {
  const out = new Float64Array(a.length);
  for (let i = 0; i < a.length; i++) out[i] = a[i] * b[i];
  return out;
}

export function soft_dice<A extends ProbArray>(p: A, g: Uint8Array, shape: Shape3, opts: LossOptions = {}): LossResult<A> {
  checkInputs(p, g, shape);
  const eps = opts.epsilon ?? DEFAULT_EPSILON;
  const pf = toF64(p);
  const gf = Float64Array.from(g);
  const inter = pairwiseSum(products(pf, gf));
  const sp2 = pairwiseSum(products(pf, pf));
  const sg = pairwiseSum(gf);
  const num = 2.0 * inter + eps;
  const den = sp2 + sg + eps;
  const value = 1.0 - num / den;
  const a = -2.0 / den;
  const b = (2.0 * num) / (den * den);
  const grad = new Float64Array(pf.length);
  for (let i = 0; i < grad.length; i++) grad[i] = a * gf[i] + b * pf[i];
  return { value, gradient: castLike(p, grad) };
}

export function va_dice<A extends ProbArray>(p: A, g: Uint8Array, shape: Shape3, opts: LossOptions = {}): LossResult<A> {
  checkInputs(p, g, shape);
  const eps = opts.epsilon ?? DEFAULT_EPSILON;
  const c = opts.numeratorConstant ?? DEFAULT_NUMERATOR_CONSTANT;
  const conn = opts.connectivity ?? 26;
  const pf = toF64(p);
  const gf = Float64Array.from(g);
  const w = weightMapFor(g, shape, conn);
  const wf = products(w, gf);
  const swp = pairwiseSum(products(wf, pf));
  const sp2 = pairwiseSum(products(pf, pf));
  const sw = pairwiseSum(wf);
  const num = c * swp + eps;
  const den = sp2 + sw + eps;
  const value = -(num / den);
  const a = -c / den;
  const b = (2.0 * num) / (den * den);
  const grad = new Float64Array(pf.length);
  for (let i = 0; i < grad.length; i++) grad[i] = a * wf[i] + b * pf[i];
  return { value, gradient: castLike(p, grad) };
}

export function cross_entropy<A extends ProbArray>(p: A, g: Uint8Array, shape: Shape3, opts: LossOptions = {}): LossResult<A> {
  checkInputs(p, g, shape);
  const eps = opts.epsilon ?? DEFAULT_EPSILON;
  const pf = toF64(p);
  const n = pf.length;
  const terms = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    terms[i] = g[i] ? portableLog(pf[i] + eps) : portableLog(1.0 - pf[i] + eps);
  }
  const value = -(pairwiseSum(terms) / n);
  const invN = 1.0 / n;
  const grad = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    grad[i] = g[i] ? -(invN / (pf[i] + eps)) : invN / (1.0 - pf[i] + eps);
  }
  return { value, gradient: castLike(p, grad) };
}

// ground truth is constant across training iterations: memoize its weight map
const weightCache = new WeakMap<Uint8Array, Map<string, Float64Array>>();

function weightMapFor(g: Uint8Array, shape: Shape3, conn: Connectivity): Float64Array {
  let perMask = weightCache.get(g);
  if (!perMask) {
    perMask = new Map();
    weightCache.set(g, perMask);
  }
  const key = `${shape.join("x")}|${conn}`;
  let w = perMask.get(key);
  if (!w) {
    w = weightMap(labelComponents(g, shape, conn));
    perMask.set(key, w);
  }
  return w;
}
