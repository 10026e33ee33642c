"""
t-SVD under a Mode-3 Transform

Factorization x = U ★_M S ★_M V*, tubal and average rank, the tensor nuclear
norm and its proximal operator (t-SVT), plus element-wise shrinkage.

Everything is computed the same way: transform along mode 3, run one matrix
SVD per frontal slice, transform back. For the DFT of a real tensor the
transform-domain slices k and n3-k are complex conjugates, so only
n3//2 + 1 SVDs are computed and the rest are mirrored.

Rank definitions follow the tubal-rank / average-rank convention of the
transformed t-SVD literature (number of non-zero tubes of S; mean per-slice
rank scaled by 1/l). Other conventions exist.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Sequence, Tuple

import numpy as np

from algebra.tensor import Tensor3, wrap
from algebra.transforms import (
    TransformKind,
    TransformSpec,
    conj_transpose,
    drop_imaginary,
    mproduct,
)
from errors import InvalidArgumentError, NumericError, ShapeError

logger = logging.getLogger(__name__)

RELATIVE_RANK_TOL = 1e-8


@dataclass(frozen=True)
class TsvdFactors:
    """
    Factors of x = u ★_M s ★_M v*.

    Attributes:
        u: (n1, n1, n3), ★_M-orthogonal
        s: (n1, n2, n3), f-diagonal in the transform domain
        v: (n2, n2, n3), ★_M-orthogonal
        transform: Transform the factors were computed under
    """

    u: Tensor3
    s: Tensor3
    v: Tensor3
    transform: TransformSpec


# Slice scheduling

@lru_cache(maxsize=8)
def _pool(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="slice-svd")


def map_slices(fn: Callable[[int], object], indices: Sequence[int], workers: int = 1) -> List:
    """
    Apply fn to every slice index, in parallel when workers > 1.

    Results come back in index order, so output does not depend on the
    worker count.
    """
    if workers <= 1 or len(indices) <= 1:
        return [fn(k) for k in indices]
    return list(_pool(workers).map(fn, indices))


def _unique_slices(t: TransformSpec) -> List[int]:
    if t.kind is TransformKind.DFT:
        return list(range(t.n3 // 2 + 1))
    return list(range(t.n3))


def _mirror_index(t: TransformSpec, k: int) -> int:
    """Source slice for k under DFT conjugate symmetry (k itself when computed)."""
    if t.kind is TransformKind.DFT and k > t.n3 // 2:
        return t.n3 - k
    return k


def _slice_matrix(t: TransformSpec, xbar: np.ndarray, k: int) -> np.ndarray:
    mat = xbar[:, :, k]
    if t.kind is TransformKind.DFT and (k == 0 or 2 * k == t.n3):
        # DC and Nyquist slices of a real tensor are real.
        return np.ascontiguousarray(mat.real)
    return np.ascontiguousarray(mat)


def _svd(mat: np.ndarray, k: int, full: bool, compute_uv: bool = True):
    try:
        return np.linalg.svd(mat, full_matrices=full, compute_uv=compute_uv)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"SVD did not converge on transform-domain slice {k}: {e}") from e


def _check_real(x: Tensor3) -> None:
    if np.iscomplexobj(x.data):
        raise ShapeError("t-SVD routines take real tensors")


# Factorization

def tsvd(t: TransformSpec, x: Tensor3, workers: int = 1) -> TsvdFactors:
    """
    Compute the t-SVD of x under transform t.

    Args:
        t: Transform with t.n3 == x.n3
        x: Real tensor (n1, n2, n3)
        workers: Threads used for the per-slice SVDs

    Returns:
        TsvdFactors with full (square) u and v

    Raises:
        NumericError: If an SVD fails; the message names the slice
    """
    _check_real(x)
    if x.n3 != t.n3:
        raise ShapeError(f"Tensor has n3={x.n3}, transform has n3={t.n3}")
    n1, n2, n3 = x.dims
    xbar = t.apply(x.data)
    computed = _unique_slices(t)
    results = map_slices(lambda k: _svd(_slice_matrix(t, xbar, k), k, full=True), computed, workers)
    by_index = dict(zip(computed, results))

    dtype = complex if t.is_complex else float
    ubar = np.zeros((n1, n1, n3), dtype=dtype, order="F")
    sbar = np.zeros((n1, n2, n3), dtype=dtype, order="F")
    vbar = np.zeros((n2, n2, n3), dtype=dtype, order="F")
    r = min(n1, n2)
    for k in range(n3):
        src = _mirror_index(t, k)
        uk, sk, vhk = by_index[src]
        if src != k:
            uk, vhk = np.conj(uk), np.conj(vhk)
        ubar[:, :, k] = uk
        sbar[np.arange(r), np.arange(r), k] = sk
        vbar[:, :, k] = vhk.conj().T

    def back(bar: np.ndarray) -> Tensor3:
        out = t.apply_inverse(bar)
        return Tensor3(drop_imaginary(out, float(np.linalg.norm(out.ravel()))))

    return TsvdFactors(u=back(ubar), s=back(sbar), v=back(vbar), transform=t)


def reconstruct(f: TsvdFactors) -> Tensor3:
    """u ★_M s ★_M v*."""
    t = f.transform
    return mproduct(t, f.u, mproduct(t, f.s, conj_transpose(t, f.v)))


def transform_singular_values(t: TransformSpec, x: Tensor3, workers: int = 1) -> np.ndarray:
    """
    Singular values of every transform-domain frontal slice.

    Returns:
        Array of shape (n3, min(n1, n2)); row k is descending
    """
    _check_real(x)
    if x.n3 != t.n3:
        raise ShapeError(f"Tensor has n3={x.n3}, transform has n3={t.n3}")
    xbar = t.apply(x.data)
    computed = _unique_slices(t)
    values = map_slices(
        lambda k: _svd(_slice_matrix(t, xbar, k), k, full=False, compute_uv=False), computed, workers
    )
    by_index = dict(zip(computed, values))
    return np.vstack([by_index[_mirror_index(t, k)] for k in range(t.n3)])


def _resolve_tol(tol: float, largest: float) -> float:
    if tol < 0:
        raise InvalidArgumentError(f"Rank tolerance must be >= 0, got {tol}")
    if tol == 0:
        return RELATIVE_RANK_TOL * largest
    return tol


# Ranks and norms

def tubal_rank(f: TsvdFactors, tol: float = 0.0) -> int:
    """
    Number of diagonal tubes s(i, i, :) with ‖s(i, i, :)‖_∞ > tol.

    tol = 0 means 1e-8 times the largest tube entry.
    """
    s = f.s.data
    r = min(s.shape[0], s.shape[1])
    if r == 0:
        return 0
    tubes = np.abs(s[np.arange(r), np.arange(r), :]).max(axis=1)
    largest = float(tubes.max()) if tubes.size else 0.0
    if largest == 0.0:
        return 0
    cutoff = _resolve_tol(tol, largest)
    return int(np.count_nonzero(tubes > cutoff))


def avg_rank(t: TransformSpec, x: Tensor3, tol: float = 0.0, workers: int = 1) -> float:
    """
    Average rank (1/l) Σ_k rank(X̄^(k)).

    tol = 0 means 1e-8 times the largest transform-domain singular value.
    """
    sv = transform_singular_values(t, x, workers)
    largest = float(sv.max()) if sv.size else 0.0
    if largest == 0.0:
        return 0.0
    cutoff = _resolve_tol(tol, largest)
    return float(np.count_nonzero(sv > cutoff)) / t.l


def tnn(t: TransformSpec, x: Tensor3, workers: int = 1) -> float:
    """Tensor nuclear norm (1/l) Σ_k ‖X̄^(k)‖_*."""
    return float(transform_singular_values(t, x, workers).sum()) / t.l


# Proximal operators

def svt_array(t: TransformSpec, w: np.ndarray, tau: float, workers: int = 1) -> Tuple[np.ndarray, int]:
    """
    t-SVT on a raw (n1, n2, n3) array.

    Returns:
        (thresholded array, number of transform-domain singular values kept)
    """
    wbar = t.apply(w)
    n1, n2, n3 = w.shape
    computed = _unique_slices(t)

    def threshold(k: int):
        uk, sk, vhk = _svd(_slice_matrix(t, wbar, k), k, full=False)
        shrunk = np.maximum(sk - tau, 0.0)
        keep = int(np.count_nonzero(shrunk))
        return (uk[:, :keep] * shrunk[:keep]) @ vhk[:keep, :], keep

    results = dict(zip(computed, map_slices(threshold, computed, workers)))
    out = np.empty((n1, n2, n3), dtype=wbar.dtype, order="F")
    kept = 0
    for k in range(n3):
        src = _mirror_index(t, k)
        mat, keep = results[src]
        out[:, :, k] = np.conj(mat) if src != k else mat
        kept += keep
    back = t.apply_inverse(out)
    return drop_imaginary(back, float(np.linalg.norm(back.ravel()))), kept


def tsvt(t: TransformSpec, w: Tensor3, tau: float, workers: int = 1) -> Tensor3:
    """
    Tensor singular value thresholding D_τ(w) = U ★_M S_τ ★_M V*.

    The unique minimizer of τ‖x‖_* + ½‖x − w‖_F². Soft thresholding is
    applied to the transform-domain singular values.

    Raises:
        InvalidArgumentError: If tau <= 0
    """
    if tau <= 0:
        raise InvalidArgumentError(f"t-SVT threshold must be > 0, got {tau}")
    _check_real(w)
    if w.n3 != t.n3:
        raise ShapeError(f"Tensor has n3={w.n3}, transform has n3={t.n3}")
    out, _ = svt_array(t, w.data, tau, workers)
    return Tensor3(out)


def shrink_array(w: np.ndarray, tau: float) -> np.ndarray:
    """Element-wise soft threshold max(|w| − τ, 0) · sgn(w)."""
    return np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)


def shrink(w: Tensor3, tau: float) -> Tensor3:
    """
    Shrinkage operator S_τ, the minimizer of τ‖x‖_1 + ½‖x − w‖_F².

    Entries with |w| <= τ come out exactly zero.

    Raises:
        InvalidArgumentError: If tau <= 0
    """
    if tau <= 0:
        raise InvalidArgumentError(f"Shrinkage threshold must be > 0, got {tau}")
    return wrap(shrink_array(w.data, tau))
