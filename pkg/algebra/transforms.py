"""
Mode-3 Transforms for the ★_M-product

Builds and applies the invertible transform matrix M that defines the
★_M-product. Every transform satisfies M* M = M M* = l I:

- DFT:  the n3-point DFT matrix, l = n3 (complex)
- DCT:  orthonormal DCT-II, l = 1
- DWT4: single-level periodized Daubechies-4 wavelet, l = 1, even n3 only
- Custom: any square matrix passing the check above at 1e-8
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import fft as sp_fft
from scipy import linalg as sp_linalg

from algebra.tensor import ComplexTensor3, Tensor3, wrap
from errors import (
    InvalidTransformError,
    NumericIntegrityError,
    ShapeError,
    UnsupportedLengthError,
)

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-8
IMAG_RESIDUE_TOL = 1e-8


class TransformKind(str, Enum):
    """Supported transform families."""

    DFT = "dft"
    DCT = "dct"
    DWT4 = "dwt4"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value: Union[str, "TransformKind"]) -> "TransformKind":
        """
        Parse a transform name, accepting the CLI alias ``fft`` for DFT.

        Raises:
            ValueError: If the name is unknown
        """
        if isinstance(value, cls):
            return value
        name = str(value).strip().lower()
        if name == "fft":
            return cls.DFT
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join([k.value for k in cls] + ["fft"])
            raise ValueError(f"Unknown transform: {value} (must be one of {valid})") from None

    @property
    def label(self) -> str:
        """Name used in CLI output and reports."""
        return "fft" if self is TransformKind.DFT else self.value


@dataclass(frozen=True)
class TransformSpec:
    """
    Validated invertible mode-3 transform.

    Attributes:
        kind: Transform family
        m: n3 x n3 transform matrix (complex for DFT)
        m_inv: Inverse of m
        l: Scaling constant with M* M = l I
        n3: Transform length
    """

    kind: TransformKind
    m: np.ndarray
    m_inv: np.ndarray
    l: float
    n3: int

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.m)

    # Raw-array application along axis 2; used on the hot path.

    def apply(self, arr: np.ndarray) -> np.ndarray:
        """Apply M along axis 2 of an (n1, n2, n3) array."""
        if self.kind is TransformKind.DFT:
            return sp_fft.fft(arr, axis=2)
        if self.kind is TransformKind.DCT:
            return sp_fft.dct(arr, type=2, norm="ortho", axis=2)
        return np.einsum("kl,ijl->ijk", self.m, arr, optimize=True)

    def apply_inverse(self, arr: np.ndarray) -> np.ndarray:
        """Apply M⁻¹ along axis 2 of an (n1, n2, n3) array."""
        if self.kind is TransformKind.DFT:
            return sp_fft.ifft(arr, axis=2)
        if self.kind is TransformKind.DCT:
            return sp_fft.idct(arr, type=2, norm="ortho", axis=2)
        return np.einsum("kl,ijl->ijk", self.m_inv, arr, optimize=True)


def _dct_matrix(n3: int) -> np.ndarray:
    # Column j is the DCT of e_j, so M @ x == dct(x).
    return sp_fft.dct(np.eye(n3), type=2, norm="ortho", axis=0)


def _dwt4_matrix(n3: int) -> np.ndarray:
    if n3 % 2 != 0:
        raise UnsupportedLengthError(f"DWT4 needs an even transform length, got n3={n3}")
    s3 = np.sqrt(3.0)
    h = np.array([1.0 + s3, 3.0 + s3, 3.0 - s3, 1.0 - s3]) / (4.0 * np.sqrt(2.0))
    g = np.array([h[3], -h[2], h[1], -h[0]])
    half = n3 // 2
    m = np.zeros((n3, n3))
    for i in range(half):
        for k in range(4):
            col = (2 * i + k) % n3
            m[i, col] += h[k]
            m[half + i, col] += g[k]
    return m


def _check_condition(m: np.ndarray) -> float:
    """Return l for M* M = l I, raising if the condition fails."""
    gram = m.conj().T @ m
    l = float(np.real(np.mean(np.diag(gram))))
    if l <= 0:
        raise InvalidTransformError(f"Transform has non-positive scaling l={l}")
    eye = np.eye(m.shape[0])
    residue = max(
        float(np.max(np.abs(gram - l * eye))),
        float(np.max(np.abs(m @ m.conj().T - l * eye))),
    )
    if residue > ORTHOGONALITY_TOL * max(1.0, l):
        raise InvalidTransformError(
            f"Transform fails M*M = l*I: max residue {residue:.3e} (l={l:.6g})"
        )
    return l


def build_transform(kind, n3: int, matrix: Optional[np.ndarray] = None) -> TransformSpec:
    """
    Build a validated transform of length n3.

    Args:
        kind: TransformKind or name ('dft'/'fft', 'dct', 'dwt4', 'custom')
        n3: Transform length, >= 1
        matrix: Required for custom transforms

    Returns:
        Immutable TransformSpec

    Raises:
        UnsupportedLengthError: DWT4 with odd n3
        InvalidTransformError: Custom matrix failing the M*M = l*I check
        ValueError: Bad n3 or missing custom matrix
    """
    kind = TransformKind.parse(kind)
    if n3 < 1:
        raise ValueError(f"Transform length must be >= 1, got {n3}")

    if kind is TransformKind.DFT:
        m = sp_linalg.dft(n3)
        l = float(n3)
        m_inv = m.conj().T / l
    elif kind is TransformKind.DCT:
        m = _dct_matrix(n3)
        l = 1.0
        m_inv = m.T.copy()
    elif kind is TransformKind.DWT4:
        m = _dwt4_matrix(n3)
        l = 1.0
        m_inv = m.T.copy()
    else:
        if matrix is None:
            raise ValueError("Custom transform needs an explicit matrix")
        m = np.array(matrix)
        if m.shape != (n3, n3):
            raise ShapeError(f"Custom transform must be {n3}x{n3}, got {m.shape}")
        l = _check_condition(m)
        m_inv = m.conj().T / l

    if kind is not TransformKind.CUSTOM:
        _check_condition(m)

    m.setflags(write=False)
    m_inv.setflags(write=False)
    logger.debug(f"Built {kind.label} transform n3={n3} l={l}")
    return TransformSpec(kind=kind, m=m, m_inv=m_inv, l=l, n3=n3)


def _check_length(t: TransformSpec, x: Tensor3) -> None:
    if x.n3 != t.n3:
        raise ShapeError(f"Tensor has n3={x.n3}, transform has n3={t.n3}")


def forward(t: TransformSpec, x: Tensor3) -> Tensor3:
    """
    Transform-domain tensor x̄ = x ×₃ M.

    Returns:
        ComplexTensor3 for DFT, Tensor3 otherwise
    """
    _check_length(t, x)
    return wrap(t.apply(x.data))


def drop_imaginary(arr: np.ndarray, reference_norm: float) -> np.ndarray:
    """
    Return the real part after checking the imaginary residue is negligible.

    Raises:
        NumericIntegrityError: If ‖imag‖_F exceeds 1e-8 · reference_norm
    """
    if not np.iscomplexobj(arr):
        return arr
    residue = float(np.linalg.norm(arr.imag.ravel()))
    if residue > IMAG_RESIDUE_TOL * max(reference_norm, np.finfo(float).tiny):
        raise NumericIntegrityError(
            f"Imaginary residue {residue:.3e} exceeds {IMAG_RESIDUE_TOL:g} x ‖x‖_F={reference_norm:.3e}"
        )
    return arr.real


def inverse(t: TransformSpec, xbar: Tensor3, keep_complex: bool = False) -> Tensor3:
    """
    Back to the spatial domain: xbar ×₃ M⁻¹.

    For real pipelines the imaginary residue of a complex result is dropped
    after checking it is below 1e-8 · ‖result‖_F.

    Args:
        t: Transform
        xbar: Transform-domain tensor
        keep_complex: Return the complex result unchecked

    Raises:
        NumericIntegrityError: Imaginary residue above threshold
    """
    _check_length(t, xbar)
    out = t.apply_inverse(xbar.data)
    if keep_complex or not np.iscomplexobj(out):
        return wrap(out)
    return Tensor3(drop_imaginary(out, float(np.linalg.norm(out.ravel()))))


def facewise_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Slice-by-slice matrix products of (n1, n2, n3) and (n2, m, n3) arrays."""
    return np.einsum("ijk,jlk->ilk", a, b, optimize=True)


def mproduct(t: TransformSpec, x: Tensor3, y: Tensor3) -> Tensor3:
    """
    ★_M-product z = (x̄ △ ȳ) ×₃ M⁻¹ with △ the face-wise product.

    Args:
        t: Transform shared by both operands
        x: Tensor of dims (n1, n2, n3)
        y: Tensor of dims (n2, m, n3)

    Returns:
        Real Tensor3 when both operands are real, else ComplexTensor3

    Raises:
        ShapeError: On dimension mismatch
    """
    _check_length(t, x)
    _check_length(t, y)
    if x.n2 != y.n1:
        raise ShapeError(f"★_M-product needs (n1,n2,n3) x (n2,m,n3), got {x.dims} x {y.dims}")
    zbar = facewise_product(t.apply(x.data), t.apply(y.data))
    out = t.apply_inverse(zbar)
    if isinstance(x, ComplexTensor3) or isinstance(y, ComplexTensor3):
        return wrap(out)
    return Tensor3(drop_imaginary(out, float(np.linalg.norm(out.ravel()))))


def conj_transpose(t: TransformSpec, x: Tensor3) -> Tensor3:
    """
    Conjugate transpose x* defined by M(x*)^(k) = (M(x)^(k))*.

    Returns:
        Tensor of dims (n2, n1, n3), real for real input
    """
    _check_length(t, x)
    xbar = t.apply(x.data)
    out = t.apply_inverse(np.conj(np.transpose(xbar, (1, 0, 2))))
    if isinstance(x, ComplexTensor3):
        return wrap(out)
    return Tensor3(drop_imaginary(out, float(np.linalg.norm(out.ravel()))))


def mproduct_identity(t: TransformSpec, n: int) -> Tensor3:
    """★_M identity: every transform-domain frontal slice is I_n."""
    bar = np.repeat(np.eye(n)[:, :, None], t.n3, axis=2)
    return inverse(t, wrap(bar.astype(complex) if t.is_complex else bar))
