"""
Third-Order Tensor Core

Dense third-order tensor type and the basic algebra built on it: frontal
slices, mode-3 unfolding, mode-3 products, norms and inner products.

Storage is frontal-slice-major with column-major slices, i.e. a numpy array
of shape (n1, n2, n3) in Fortran order. Entry (i, j, k) (0-based; the math
notation X(i+1, j+1, k+1)) lives at flat offset i + j*n1 + k*n1*n2, so every
frontal slice is one contiguous block.
"""

import logging
from typing import Iterable, Tuple, Union

import numpy as np

from errors import ShapeError

logger = logging.getLogger(__name__)

Dims = Tuple[int, int, int]


class Tensor3:
    """
    Dense real third-order tensor.

    Holds the data tensors of the decomposition (input stacks, low-rank and
    sparse components, multipliers). Instances behave as values: operations
    return new tensors and never modify their inputs. ``frontal_slice``
    returns a view, so writes through it do modify the tensor.
    """

    __slots__ = ("_data",)

    _dtype = np.float64

    def __init__(self, data):
        """
        Wrap an array as a tensor.

        Args:
            data: Array-like of shape (n1, n2, n3), every dimension >= 1

        Raises:
            ShapeError: If the array is not third-order or has an empty dimension
        """
        arr = np.asarray(data)
        if arr.ndim != 3:
            raise ShapeError(f"Tensor3 needs a 3-d array, got {arr.ndim}-d with shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"Tensor3 dimensions must be >= 1, got {arr.shape}")
        self._data = self._coerce(arr)

    @classmethod
    def _coerce(cls, arr: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(arr):
            raise TypeError("Tensor3 holds real values; use ComplexTensor3 for complex data")
        return np.asfortranarray(arr, dtype=cls._dtype)

    # Construction

    @classmethod
    def zeros(cls, dims: Dims) -> "Tensor3":
        """Zero tensor of the given dims."""
        return cls(np.zeros(dims, dtype=cls._dtype, order="F"))

    @classmethod
    def from_flat(cls, flat, dims: Dims) -> "Tensor3":
        """
        Build a tensor from frontal-slice-major flat data.

        Args:
            flat: 1-d sequence of n1*n2*n3 values
            dims: (n1, n2, n3)

        Raises:
            ShapeError: If the length does not match the dims
        """
        values = np.asarray(flat).ravel()
        expected = int(np.prod(dims))
        if values.size != expected:
            raise ShapeError(f"Flat data has {values.size} values, dims {tuple(dims)} need {expected}")
        return cls(values.reshape(tuple(dims), order="F"))

    def to_flat(self) -> np.ndarray:
        """Flat copy of the data in frontal-slice-major order."""
        return self._data.ravel(order="F").copy()

    def copy(self) -> "Tensor3":
        return type(self)(self._data.copy(order="F"))

    # Shape

    @property
    def data(self) -> np.ndarray:
        """Underlying Fortran-ordered array (shared, not copied)."""
        return self._data

    @property
    def dims(self) -> Dims:
        n1, n2, n3 = self._data.shape
        return int(n1), int(n2), int(n3)

    @property
    def n1(self) -> int:
        return self.dims[0]

    @property
    def n2(self) -> int:
        return self.dims[1]

    @property
    def n3(self) -> int:
        return self.dims[2]

    @property
    def size(self) -> int:
        return int(self._data.size)

    def frontal_slice(self, k: int) -> np.ndarray:
        """
        View of frontal slice k (an n1 x n2 matrix).

        Args:
            k: Slice index, 0 <= k < n3

        Returns:
            Writable view into this tensor

        Raises:
            IndexError: If k is out of range
        """
        if not 0 <= k < self.n3:
            raise IndexError(f"Frontal slice index {k} out of range [0, {self.n3})")
        return self._data[:, :, k]

    # Arithmetic

    def _operand(self, other) -> np.ndarray:
        if isinstance(other, Tensor3):
            if other.dims != self.dims:
                raise ShapeError(f"Dims differ: {self.dims} vs {other.dims}")
            return other.data
        return other

    def __add__(self, other) -> "Tensor3":
        return wrap(self._data + self._operand(other))

    def __radd__(self, other) -> "Tensor3":
        return self.__add__(other)

    def __sub__(self, other) -> "Tensor3":
        return wrap(self._data - self._operand(other))

    def __rsub__(self, other) -> "Tensor3":
        return wrap(self._operand(other) - self._data)

    def __neg__(self) -> "Tensor3":
        return type(self)(-self._data)

    def __mul__(self, scalar) -> "Tensor3":
        if isinstance(scalar, Tensor3):
            raise TypeError("Use mproduct or an explicit element-wise op for tensor-tensor products")
        return wrap(self._data * scalar)

    def __rmul__(self, scalar) -> "Tensor3":
        return self.__mul__(scalar)

    def __truediv__(self, scalar) -> "Tensor3":
        return wrap(self._data / scalar)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dims={self.dims})"


class ComplexTensor3(Tensor3):
    """Tensor3 with complex entries; produced by complex (DFT) transforms."""

    __slots__ = ()

    _dtype = np.complex128

    @classmethod
    def _coerce(cls, arr: np.ndarray) -> np.ndarray:
        return np.asfortranarray(arr, dtype=cls._dtype)

    @property
    def real(self) -> Tensor3:
        return Tensor3(self._data.real)

    @property
    def imag(self) -> Tensor3:
        return Tensor3(self._data.imag)


TensorLike = Union[Tensor3, ComplexTensor3]


def wrap(arr: np.ndarray) -> Tensor3:
    """Wrap an array as Tensor3 or ComplexTensor3 depending on its dtype."""
    if np.iscomplexobj(arr):
        return ComplexTensor3(arr)
    return Tensor3(arr)


def identity_tensor(n: int, n3: int) -> Tensor3:
    """t-product identity: first frontal slice I_n, remaining slices zero."""
    data = np.zeros((n, n, n3), order="F")
    data[:, :, 0] = np.eye(n)
    return Tensor3(data)


def stack_frontal(tensors: Iterable[Tensor3]) -> Tensor3:
    """
    Concatenate tensors along mode 3.

    Args:
        tensors: Tensors sharing (n1, n2)

    Returns:
        Tensor with n3 equal to the sum of the inputs' n3

    Raises:
        ShapeError: If the frontal-slice shapes differ or nothing is given
    """
    items = list(tensors)
    if not items:
        raise ShapeError("stack_frontal needs at least one tensor")
    face = items[0].dims[:2]
    for item in items[1:]:
        if item.dims[:2] != face:
            raise ShapeError(f"Frontal slice shapes differ: {face} vs {item.dims[:2]}")
    return wrap(np.concatenate([item.data for item in items], axis=2))


# Unfolding and mode-3 products

def unfold3(x: Tensor3) -> np.ndarray:
    """
    Mode-3 unfolding.

    Column c = i + j*n1 of the (n3 x n1*n2) result is the mode-3 fiber x(i, j, :).
    """
    n1, n2, n3 = x.dims
    return x.data.reshape(n1 * n2, n3, order="F").T


def fold3(matrix: np.ndarray, dims: Dims) -> Tensor3:
    """
    Inverse of ``unfold3``.

    Raises:
        ShapeError: If the matrix shape is not (n3, n1*n2)
    """
    n1, n2, n3 = dims
    matrix = np.asarray(matrix)
    if matrix.shape != (n3, n1 * n2):
        raise ShapeError(f"Cannot fold a {matrix.shape} matrix into dims {tuple(dims)}")
    return wrap(matrix.T.reshape(n1, n2, n3, order="F"))


def mode3_product(x: Tensor3, m: np.ndarray) -> Tensor3:
    """
    Mode-3 product x ×₃ m: applies m to every mode-3 fiber.

    Args:
        x: Tensor of dims (n1, n2, n3)
        m: Square n3 x n3 matrix (real or complex)

    Returns:
        Tensor whose mode-3 unfolding is m @ unfold3(x); complex when m or x is

    Raises:
        ShapeError: If m is not n3 x n3
    """
    m = np.asarray(m)
    n3 = x.n3
    if m.shape != (n3, n3):
        raise ShapeError(f"Mode-3 matrix must be {n3}x{n3}, got {m.shape}")
    return fold3(m @ unfold3(x), x.dims)


# Norms and inner products

def l0_norm(x: Tensor3) -> int:
    """Number of entries that are not exactly zero."""
    return int(np.count_nonzero(x.data))


def l0_norm_eps(x: Tensor3, eps: float) -> int:
    """Number of entries with magnitude above eps (for numerically sparse output)."""
    return int(np.count_nonzero(np.abs(x.data) > eps))


def l1_norm(x: Tensor3) -> float:
    return float(np.abs(x.data).sum())


def inf_norm(x: Tensor3) -> float:
    return float(np.abs(x.data).max())


def fro_norm(x: Tensor3) -> float:
    return float(np.linalg.norm(x.data.ravel()))


def inner_product(x: Tensor3, y: Tensor3) -> float:
    """
    <x, y> = sum over frontal slices of <X^(k), Y^(k)>.

    Complex operands use the conjugate-linear first argument (np.vdot).

    Raises:
        ShapeError: If dims differ
    """
    if x.dims != y.dims:
        raise ShapeError(f"Inner product needs equal dims: {x.dims} vs {y.dims}")
    value = np.vdot(x.data.ravel(order="F"), y.data.ravel(order="F"))
    if np.iscomplexobj(value):
        return complex(value) if abs(value.imag) > 0 else float(value.real)
    return float(value)


def relative_error(estimate: Tensor3, reference: Tensor3) -> float:
    """‖estimate − reference‖_F / ‖reference‖_F; 0 when both are zero."""
    if estimate.dims != reference.dims:
        raise ShapeError(f"Dims differ: {estimate.dims} vs {reference.dims}")
    num = float(np.linalg.norm((estimate.data - reference.data).ravel()))
    den = fro_norm(reference)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den
