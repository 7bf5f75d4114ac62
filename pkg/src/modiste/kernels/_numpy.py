"""Numpy implementation of the dilation kernel, used when the compiled one is absent.

Chebyshev dilation separates into a horizontal and a vertical sliding
maximum, and each 1-D pass is the OR of the input shifted by -r..r with
zero fill, so the whole thing is 4*r full-array ORs.
"""

import numpy as np


def _pass(bits: np.ndarray, radius: int, axis: int) -> np.ndarray:
    out = bits.copy()
    n = bits.shape[axis]
    for d in range(1, min(radius, n - 1) + 1):
        src_lo = [slice(None), slice(None)]
        dst_lo = [slice(None), slice(None)]
        src_lo[axis] = slice(d, None)
        dst_lo[axis] = slice(None, n - d)
        out[tuple(dst_lo)] |= bits[tuple(src_lo)]
        out[tuple(src_lo)] |= bits[tuple(dst_lo)]
    return out


def dilate_chebyshev(bits: np.ndarray, radius: int) -> np.ndarray:
    """Sliding-window maximum of a boolean plane, square window side 2*radius+1."""
    if radius == 0:
        return bits.copy()
    return _pass(_pass(bits, radius, 1), radius, 0)
