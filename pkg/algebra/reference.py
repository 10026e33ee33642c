"""
Reference t-product via block-circulant matricization.

These are literal O((n*n3)^2)-memory implementations kept as test oracles for
the transform-domain products. The solver path never calls them.
"""

import numpy as np

from algebra.tensor import Tensor3, wrap
from errors import ShapeError


def bcirc(x: Tensor3) -> np.ndarray:
    """
    Block-circulant matrix of x, shape (n1*n3, n2*n3).

    Block (r, c) is frontal slice (r - c) mod n3.
    """
    n1, n2, n3 = x.dims
    out = np.zeros((n1 * n3, n2 * n3), dtype=x.data.dtype)
    for r in range(n3):
        for c in range(n3):
            out[r * n1:(r + 1) * n1, c * n2:(c + 1) * n2] = x.data[:, :, (r - c) % n3]
    return out


def unfold_blocks(x: Tensor3) -> np.ndarray:
    """Frontal slices stacked vertically, shape (n1*n3, n2)."""
    n1, n2, n3 = x.dims
    return np.vstack([x.data[:, :, k] for k in range(n3)])


def fold_blocks(matrix: np.ndarray, dims) -> Tensor3:
    """Inverse of ``unfold_blocks``."""
    n1, n2, n3 = dims
    if matrix.shape != (n1 * n3, n2):
        raise ShapeError(f"Cannot fold a {matrix.shape} block column into dims {tuple(dims)}")
    return wrap(np.stack([matrix[k * n1:(k + 1) * n1, :] for k in range(n3)], axis=2))


def tproduct_oracle(x: Tensor3, y: Tensor3) -> Tensor3:
    """
    t-product x * y = fold(bcirc(x) @ unfold(y)).

    Args:
        x: Tensor of dims (n1, n2, n3)
        y: Tensor of dims (n2, m, n3)

    Returns:
        Tensor of dims (n1, m, n3)

    Raises:
        ShapeError: On inner-dimension or slice-count mismatch
    """
    n1, n2, n3 = x.dims
    if y.n1 != n2 or y.n3 != n3:
        raise ShapeError(f"t-product needs (n1,n2,n3) x (n2,m,n3), got {x.dims} x {y.dims}")
    return fold_blocks(bcirc(x) @ unfold_blocks(y), (n1, y.n2, n3))
