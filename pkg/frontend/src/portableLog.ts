/**
 * Bit-reproducible natural logarithm (fdlibm algorithm).
 *
 * Mirrors the Python library's vectorized port op-for-op: only IEEE-754
 * +,-,*,/ and integer bit manipulation, so both sides produce identical
 * bit patterns on every positive normal finite input. Other inputs fall
 * back to Math.log conventions.
 */

const LN2_HI = 6.93147180369123816490e-1;
const LN2_LO = 1.90821492927058770002e-10;
const LG1 = 6.666666666666735130e-1;
const LG2 = 3.999999999940941908e-1;
const LG3 = 2.857142874366239149e-1;
const LG4 = 2.222219843214978396e-1;
const LG5 = 1.818357216161805012e-1;
const LG6 = 1.531383769920937332e-1;
const LG7 = 1.479819860511658591e-1;

const MIN_NORMAL = 2.2250738585072014e-308;

const view = new DataView(new ArrayBuffer(8));

export function portableLog(x: number): number {
  if (!Number.isFinite(x) || x < MIN_NORMAL) {
    return Math.log(x);
  }
  view.setFloat64(0, x);
  let hx = view.getUint32(0);
  const lx = view.getUint32(4);

  let k = (hx >> 20) - 1023;
  hx &= 0x000fffff;
  const i = (hx + 0x95f64) & 0x100000;
  view.setUint32(0, hx | (i ^ 0x3ff00000));
  view.setUint32(4, lx);
  const xn = view.getFloat64(0);
  k += i >> 20;

  const f = xn - 1.0;
  const dk = k;

  if ((0x000fffff & (2 + hx)) < 3) {
    if (f === 0.0) {
      if (k === 0) return 0.0;
      return dk * LN2_HI + dk * LN2_LO;
    }
    const r = f * f * (0.5 - 0.33333333333333333 * f);
    if (k === 0) return f - r;
    return dk * LN2_HI - ((r - dk * LN2_LO) - f);
  }

  const s = f / (2.0 + f);
  const z = s * s;
  const w = z * z;
  const t1 = w * (LG2 + w * (LG4 + w * LG6));
  const t2 = z * (LG1 + w * (LG3 + w * (LG5 + w * LG7)));
  const r = t2 + t1;
  const ij = ((hx - 0x6147a) | (0x6b851 - hx)) | 0;
  if (ij > 0) {
    const hfsq = 0.5 * f * f;
    if (k === 0) return f - (hfsq - s * (hfsq + r));
    return dk * LN2_HI - ((hfsq - (s * (hfsq + r) + dk * LN2_LO)) - f);
  }
  if (k === 0) return f - s * (f - r);
  return dk * LN2_HI - ((s * (f - r) - dk * LN2_LO) - f);
}
