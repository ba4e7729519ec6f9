"""Bit-reproducible natural logarithm (vectorized fdlibm algorithm).

np.log dispatches to SIMD/libm code that differs across platforms and
numpy versions by 1 ulp on ~5-10% of inputs, which breaks byte-identical
reports and cross-implementation parity. This port uses only IEEE-754
+,-,*,/ and integer bit manipulation, so any faithful reimplementation
(frontend/src/portableLog.ts mirrors it op-for-op) produces identical
bits. Accuracy is within 1 ulp of a correctly rounded log.

Domain: positive normal finite doubles (callers clamp with epsilon);
zero, negatives, subnormals and non-finite inputs fall back to np.log's
conventions via a final masked fixup.
"""

from __future__ import annotations

import numpy as np

_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_LG1 = 6.666666666666735130e-01
_LG2 = 3.999999999940941908e-01
_LG3 = 2.857142874366239149e-01
_LG4 = 2.222219843214978396e-01
_LG5 = 1.818357216161805012e-01
_LG6 = 1.531383769920937332e-01
_LG7 = 1.479819860511658591e-01

_TINY_NORMAL = np.float64(2.2250738585072014e-308)  # 2**-1022


def log_array(x: np.ndarray) -> np.ndarray:
    """Elementwise natural log with a platform-independent bit pattern."""
    x = np.asarray(x, dtype=np.float64)
    regular = np.isfinite(x) & (x >= _TINY_NORMAL)

    # work on a safe copy so the bit manipulation below never sees
    # zeros/negatives/subnormals (their results are patched at the end)
    xs = np.where(regular, x, 1.0)
    bits = xs.view(np.int64).copy()
    hx = (bits >> np.int64(32)).astype(np.int64)
    lx = bits & np.int64(0xFFFFFFFF)

    k = (hx >> np.int64(20)) - np.int64(1023)
    hx = hx & np.int64(0x000FFFFF)
    i = (hx + np.int64(0x95F64)) & np.int64(0x100000)
    new_hi = hx | (i ^ np.int64(0x3FF00000))
    xn = ((new_hi << np.int64(32)) | lx).view(np.float64)
    k = k + (i >> np.int64(20))

    f = xn - 1.0
    dk = k.astype(np.float64)

    # |f| < 2**-20 branch
    small = (np.int64(0x000FFFFF) & (np.int64(2) + hx)) < np.int64(3)
    r_small = f * f * (0.5 - 0.33333333333333333 * f)
    out_small = np.where(
        k == 0,
        np.where(f == 0.0, 0.0, f - r_small),
        np.where(f == 0.0, dk * _LN2_HI + dk * _LN2_LO, dk * _LN2_HI - ((r_small - dk * _LN2_LO) - f)),
    )

    # main branch
    s = f / (2.0 + f)
    z = s * s
    w = z * z
    t1 = w * (_LG2 + w * (_LG4 + w * _LG6))
    t2 = z * (_LG1 + w * (_LG3 + w * (_LG5 + w * _LG7)))
    r = t2 + t1
    ij = (hx - np.int64(0x6147A)) | (np.int64(0x6B851) - hx)
    hfsq = 0.5 * f * f
    out_a = np.where(
        k == 0,
        f - (hfsq - s * (hfsq + r)),
        dk * _LN2_HI - ((hfsq - (s * (hfsq + r) + dk * _LN2_LO)) - f),
    )
    out_b = np.where(
        k == 0,
        f - s * (f - r),
        dk * _LN2_HI - ((s * (f - r) - dk * _LN2_LO) - f),
    )
    out = np.where(small, out_small, np.where(ij > 0, out_a, out_b))

    if not regular.all():
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(regular, out, np.log(np.where(regular, 1.0, x)))
    return out


def log_scalar(x: float) -> float:
    return float(log_array(np.array([x]))[0])
