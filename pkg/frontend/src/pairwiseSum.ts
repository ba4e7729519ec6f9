/**
 * Pairwise summation in numpy's reduction order (8-way unrolled blocks of
 * up to 128 elements, then balanced halving at multiples of 8).
 *
 * The Python library computes every loss reduction with np.sum over a
 * contiguous float64 array; reproducing the identical bit pattern here
 * requires the identical order of additions, not just the same algorithm
 * family. Keep this in sync with the reduction contract pinned by the
 * Python test suite (tests/test_summation_contract.py).
 */
export function pairwiseSum(a: Float64Array, lo = 0, n = a.length - lo): number {
  if (n < 8) {
    let s = 0.0;
    for (let i = 0; i < n; i++) s += a[lo + i];
    return s;
  }
  if (n <= 128) {
    let r0 = a[lo],
      r1 = a[lo + 1],
      r2 = a[lo + 2],
      r3 = a[lo + 3],
      r4 = a[lo + 4],
      r5 = a[lo + 5],
      r6 = a[lo + 6],
      r7 = a[lo + 7];
    let i = 8;
    const unrolled = n - (n % 8);
    for (; i < unrolled; i += 8) {
      r0 += a[lo + i];
      r1 += a[lo + i + 1];
      r2 += a[lo + i + 2];
      r3 += a[lo + i + 3];
      r4 += a[lo + i + 4];
      r5 += a[lo + i + 5];
      r6 += a[lo + i + 6];
      r7 += a[lo + i + 7];
    }
    let s = ((r0 + r1) + (r2 + r3)) + ((r4 + r5) + (r6 + r7));
    for (; i < n; i++) s += a[lo + i];
    return s;
  }
  let n2 = Math.floor(n / 2);
  n2 -= n2 % 8;
  return pairwiseSum(a, lo, n2) + pairwiseSum(a, lo + n2, n - n2);
}
