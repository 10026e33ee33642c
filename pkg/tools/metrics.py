"""
Quality and Evaluation Metrics

Masked intensity statistics (σ, entropy H), NCC similarity, and segmentation
overlap/distance metrics (Dice, Jaccard, average symmetric surface distance).

All functions are pure and safe to call concurrently.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from algebra.tensor import Tensor3
from errors import ShapeError, UndefinedStatisticError, VolumeFormatError

logger = logging.getLogger(__name__)

DEFAULT_BINS = 256


@dataclass(frozen=True)
class LabelVolume:
    """
    Boolean voxel mask with physical spacing.

    Attributes:
        mask: Boolean array (n1, n2, n3)
        spacing: (sx, sy, sz) in millimeters
    """

    mask: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 3:
            raise ShapeError(f"Label volume must be 3D, got shape {mask.shape}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise VolumeFormatError(f"Voxel spacing must be three positive values, got {self.spacing}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(self.mask.shape)

    @property
    def voxel_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @classmethod
    def full(cls, dims, spacing=(1.0, 1.0, 1.0)) -> "LabelVolume":
        return cls(np.ones(dims, dtype=bool), spacing)


@dataclass(frozen=True)
class MaskedStats:
    """σ and Shannon entropy (bits) of the voxels inside a mask."""

    sigma: float
    entropy_bits: float
    voxel_count: int
    bin_count: int


def _check_dims(a_dims, b_dims, what: str) -> None:
    if tuple(a_dims) != tuple(b_dims):
        raise ShapeError(f"{what}: dims differ, {tuple(a_dims)} vs {tuple(b_dims)}")


def masked_values(x: Tensor3, mask: LabelVolume) -> np.ndarray:
    _check_dims(x.dims, mask.dims, "masked_values")
    return x.data[mask.mask]


def histogram_entropy(
    values: np.ndarray,
    bins: int = DEFAULT_BINS,
    value_range: Optional[Tuple[float, float]] = None,
) -> float:
    """
    Shannon entropy in bits of a ``bins``-bin histogram.

    The bins span ``value_range`` when given, else [min, max] of the values.
    Values outside ``value_range`` are counted in the edge bins, so images
    compared on one range share their bin edges.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if value_range is None:
        lo, hi = float(values.min()), float(values.max())
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
        if hi < lo:
            raise ValueError(f"value_range must be (low, high), got {value_range}")
    if hi == lo:
        return 0.0
    counts, _ = np.histogram(np.clip(values, lo, hi), bins=bins, range=(lo, hi))
    p = counts[counts > 0] / values.size
    return float(-(p * np.log2(p)).sum())


def masked_range(x: Tensor3, mask: LabelVolume) -> Tuple[float, float]:
    """(min, max) of the voxels inside a mask."""
    values = masked_values(x, mask)
    if values.size == 0:
        raise UndefinedStatisticError("masked_range needs a non-empty mask")
    return float(values.min()), float(values.max())


def masked_stats(
    x: Tensor3,
    mask: LabelVolume,
    bins: int = DEFAULT_BINS,
    value_range: Optional[Tuple[float, float]] = None,
) -> MaskedStats:
    """
    Population standard deviation and histogram entropy inside a mask.

    Args:
        x: Image volume
        mask: Region; dims must match x
        bins: Histogram bins
        value_range: Bin span; defaults to the masked intensity range of x.
            Pass the input's masked range when scoring a decomposed image
            against its input so both histograms use the same edges.

    Raises:
        UndefinedStatisticError: Empty mask
    """
    values = masked_values(x, mask)
    if values.size == 0:
        raise UndefinedStatisticError("masked_stats needs a non-empty mask")
    return MaskedStats(
        sigma=float(np.std(values)),
        entropy_bits=histogram_entropy(values, bins, value_range),
        voxel_count=int(values.size),
        bin_count=bins,
    )


def input_ranges(volumes: Sequence[Tensor3], mask: LabelVolume) -> List[Tuple[float, float]]:
    """Masked (min, max) of every volume, used as shared bin spans."""
    return [masked_range(v, mask) for v in volumes]


def mean_masked_stats(
    volumes: Sequence[Tensor3],
    mask: LabelVolume,
    bins: int = DEFAULT_BINS,
    ranges: Optional[Sequence[Tuple[float, float]]] = None,
) -> Dict[str, float]:
    """
    Masked σ and H averaged over volumes.

    ``ranges[i]`` is the bin span for volume i; decomposed outputs are
    scored on their inputs' ranges so σ and H compare directly.
    """
    if ranges is not None and len(ranges) != len(volumes):
        raise ShapeError(f"Got {len(ranges)} ranges for {len(volumes)} volume(s)")
    stats = [
        masked_stats(v, mask, bins, None if ranges is None else ranges[i])
        for i, v in enumerate(volumes)
    ]
    return {
        "sigma": float(np.mean([s.sigma for s in stats])),
        "entropy_bits": float(np.mean([s.entropy_bits for s in stats])),
    }


def ncc(a: Tensor3, b: Tensor3, region: Optional[LabelVolume] = None) -> float:
    """
    Normalized cross correlation of a and b over a region (whole volume by default).

    Raises:
        UndefinedStatisticError: Empty region or an image constant on it
    """
    _check_dims(a.dims, b.dims, "ncc")
    if region is None:
        va, vb = a.data.ravel(), b.data.ravel()
    else:
        va, vb = masked_values(a, region), masked_values(b, region)
    if va.size == 0:
        raise UndefinedStatisticError("ncc needs a non-empty region")
    da = va - va.mean()
    db = vb - vb.mean()
    denom = float(np.sqrt(np.dot(da, da) * np.dot(db, db)))
    if denom == 0.0:
        raise UndefinedStatisticError("ncc is undefined for an image constant on the region")
    return float(np.clip(np.dot(da, db) / denom, -1.0, 1.0))


# Segmentation overlap

def _overlap(a: LabelVolume, b: LabelVolume) -> Tuple[int, int, int]:
    _check_dims(a.dims, b.dims, "overlap")
    inter = int(np.count_nonzero(a.mask & b.mask))
    return inter, a.voxel_count, b.voxel_count


def dice(a: LabelVolume, b: LabelVolume) -> float:
    """Dice coefficient in percent; two empty masks score 100."""
    inter, na, nb = _overlap(a, b)
    if na + nb == 0:
        return 100.0
    return 100.0 * 2.0 * inter / (na + nb)


def jaccard(a: LabelVolume, b: LabelVolume) -> float:
    """Jaccard index in percent; two empty masks score 100."""
    inter, na, nb = _overlap(a, b)
    union = na + nb - inter
    if union == 0:
        return 100.0
    return 100.0 * inter / union


def dice_from_jaccard(j: float) -> float:
    """Closed form DC = 2J/(1+J), both in percent."""
    frac = j / 100.0
    return 100.0 * 2.0 * frac / (1.0 + frac)


def surface(label: LabelVolume) -> np.ndarray:
    """Mask voxels with at least one 6-connected background neighbor (outside counts as background)."""
    structure = ndimage.generate_binary_structure(3, 1)
    interior = ndimage.binary_erosion(label.mask, structure=structure, border_value=0)
    return label.mask & ~interior


def _surface_distances(src: np.ndarray, dst: np.ndarray, spacing) -> np.ndarray:
    # Distance from every voxel to the nearest dst surface voxel, read at src.
    field = ndimage.distance_transform_edt(~dst, sampling=spacing)
    return field[src]


def asd(a: LabelVolume, b: LabelVolume) -> float:
    """
    Average symmetric surface distance in millimeters.

    Mean over both surface voxel sets of the Euclidean distance to the
    nearest voxel of the other surface, with distances scaled by the shared
    voxel spacing.

    Raises:
        ShapeError: Dims or spacing differ
        UndefinedStatisticError: Either mask empty
    """
    _check_dims(a.dims, b.dims, "asd")
    if not np.allclose(a.spacing, b.spacing, rtol=1e-6, atol=0.0):
        raise ShapeError(f"asd: spacing differs, {a.spacing} vs {b.spacing}")
    if a.voxel_count == 0 or b.voxel_count == 0:
        raise UndefinedStatisticError("asd needs two non-empty masks")
    sa, sb = surface(a), surface(b)
    d_ab = _surface_distances(sa, sb, a.spacing)
    d_ba = _surface_distances(sb, sa, a.spacing)
    return float((d_ab.sum() + d_ba.sum()) / (d_ab.size + d_ba.size))


# Sparse-support scoring

def sparse_support_mask(sparse: Tensor3, threshold: float, spacing=(1.0, 1.0, 1.0)) -> LabelVolume:
    """Voxels with |E| > threshold."""
    return LabelVolume(np.abs(sparse.data) > threshold, spacing)


def support_f1(estimate: Tensor3, truth: LabelVolume, threshold: float) -> float:
    """
    F1 score of the support {|estimate| > threshold} against a truth mask.

    Returns 1.0 when both supports are empty.
    """
    _check_dims(estimate.dims, truth.dims, "support_f1")
    predicted = np.abs(estimate.data) > threshold
    tp = int(np.count_nonzero(predicted & truth.mask))
    fp = int(np.count_nonzero(predicted & ~truth.mask))
    fn = int(np.count_nonzero(~predicted & truth.mask))
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)
