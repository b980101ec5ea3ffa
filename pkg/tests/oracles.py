"""Brute-force reference implementations used to cross-check the library.

The tensor-tensor product corresponds to a matrix operation on the block
diagonal of the transformed frontal slices, so every algebra operation can
be checked by assembling that block-diagonal matrix, running the plain
matrix operation, and mapping the blocks back.
"""

import numpy as np

from tscaled.transform import fwd_stack, inv_stack


def bdiag(spec, a):
    """Block-diagonal matrix holding the transformed frontal slices."""
    ah = fwd_stack(spec, np.asarray(a, dtype=float))
    n3, m, n = ah.shape
    out = np.zeros((n3 * m, n3 * n), dtype=complex)
    for k in range(n3):
        out[k * m : (k + 1) * m, k * n : (k + 1) * n] = ah[k]
    return out


def unbdiag(spec, mat, m, n):
    """Inverse of :func:`bdiag`: extract blocks and inverse-transform."""
    n3 = spec.n3
    stack = np.stack([mat[k * m : (k + 1) * m, k * n : (k + 1) * n] for k in range(n3)])
    return inv_stack(spec, stack)


def bdiag_singvals(spec, a):
    """Singular values of every transformed slice, stacked (n3, min(m, n))."""
    return np.linalg.svd(fwd_stack(spec, np.asarray(a, dtype=float)), compute_uv=False)
