"""Pure-NumPy kernels; the fallback when the compiled core is unavailable."""

import numpy as np

NAME = "python"


def apply_matrix_kernel(amps, matrix, base, offsets, idx2d, out):
    """out <- matrix applied to the target-register block of every base index."""
    out[idx2d] = amps[idx2d] @ matrix.T


def marginal_kernel(amps, base, offsets, idx2d, out):
    """out[j] <- sum of |amplitude|^2 over each target-register configuration j."""
    blocks = amps[idx2d]
    np.sum(blocks.real**2 + blocks.imag**2, axis=0, out=out)
