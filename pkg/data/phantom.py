"""
Synthetic Phantom Stacks

Builds N aligned volumes that share a low-rank background and carry
per-volume sparse anomalies, with exact ground truth (x = L + E voxel for voxel).

Background: every spatial slice is L(k) = U(k) · diag(c(k)) · V(k)ᵀ with r
columns. The r tubes c_q come from a ★_M-style product of random tubes under
the chosen transform. Without drift U and V are fixed and every
transform-domain slice of any slice segment, under any transform, has rank
<= r. ``slice_drift`` moves both factors along piecewise-linear paths between
random anchors: a segment inside one anchor interval stays at rank <= 2r while
the whole volume reaches a much higher tubal rank.

Randomness comes from numpy's counter-based Philox generator seeded by
``seed``, so phantoms are reproducible across platforms.
"""

import logging
import math
from typing import List, Literal, NamedTuple, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from algebra.tensor import Tensor3
from algebra.transforms import TransformKind, build_transform, drop_imaginary
from tools.metrics import LabelVolume

logger = logging.getLogger(__name__)

DRIFT_ANCHOR_SPACING = 5
GAIN_JITTER = 0.05
MAX_BLOBS = 10_000


class PhantomSpec(BaseModel):
    """Phantom parameters."""

    model_config = ConfigDict(frozen=True)

    dims: Tuple[int, int, int] = (64, 64, 30)
    tubal_rank: int = Field(default=5, ge=0)
    n_volumes: int = Field(default=6, ge=1)
    sparse_fraction: float = Field(default=0.03, ge=0.0, le=1.0)
    sparse_magnitude: float = Field(default=5.0, ge=0.0)
    slice_drift: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    transform: str = "dct"
    anomaly_shape: Literal["ellipsoid", "scatter"] = "ellipsoid"
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    @field_validator("dims")
    @classmethod
    def _check_dims(cls, value):
        if min(value) < 1:
            raise ValueError(f"dims must be >= 1, got {value}")
        return value

    @field_validator("transform")
    @classmethod
    def _check_transform(cls, value: str) -> str:
        kind = TransformKind.parse(value)
        if kind is TransformKind.CUSTOM:
            raise ValueError("Phantoms use a built-in transform (dct, fft, dwt4)")
        return kind.value

    @model_validator(mode="after")
    def _check_rank(self) -> "PhantomSpec":
        n1, n2, _ = self.dims
        if self.tubal_rank > min(n1, n2):
            raise ValueError(f"tubal_rank {self.tubal_rank} exceeds min(n1, n2) = {min(n1, n2)}")
        return self


class Phantom(NamedTuple):
    """Phantom volumes and their ground truth."""

    volumes: List[Tensor3]
    truth_low_rank: List[Tensor3]
    truth_sparse: List[Tensor3]
    anomaly_masks: List[LabelVolume]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _background_tubes(spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    """(r, n3) tubes c_q = M⁻¹(Mα_q ⊙ Mβ_q)."""
    n3 = spec.dims[2]
    r = spec.tubal_rank
    t = build_transform(spec.transform, n3)
    alpha = rng.standard_normal((1, r, n3))
    beta = rng.standard_normal((1, r, n3))
    prod = t.apply_inverse(t.apply(alpha) * t.apply(beta))
    tubes = drop_imaginary(prod, float(np.linalg.norm(prod.ravel())))
    return np.asarray(tubes[0])


def drift_anchor_positions(n3: int) -> np.ndarray:
    """Slice positions of the drift anchors; the paths are linear in between."""
    n_anchor = max(2, math.ceil(n3 / DRIFT_ANCHOR_SPACING) + 1)
    return np.linspace(0, n3 - 1, n_anchor)


def _drift_fields(n_rows: int, spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    """(n3, n_rows, r) smooth perturbations interpolated between random anchors."""
    n3 = spec.dims[2]
    r = spec.tubal_rank
    anchor_at = drift_anchor_positions(n3)
    n_anchor = len(anchor_at)
    anchors = rng.standard_normal((n_anchor, n_rows, r))
    positions = np.interp(np.arange(n3), anchor_at, np.arange(n_anchor))
    lower = np.minimum(np.floor(positions).astype(int), n_anchor - 2)
    w = (positions - lower)[:, None, None]
    return (1.0 - w) * anchors[lower] + w * anchors[lower + 1]


def make_background(spec: PhantomSpec, rng: np.random.Generator) -> Tensor3:
    """Shared low-rank background scaled to unit standard deviation."""
    n1, n2, n3 = spec.dims
    r = spec.tubal_rank
    if r == 0:
        return Tensor3.zeros(spec.dims)
    u = rng.standard_normal((n1, r))
    v = rng.standard_normal((n2, r))
    tubes = _background_tubes(spec, rng)
    drifting = spec.slice_drift > 0
    u_drift = _drift_fields(n1, spec, rng) if drifting else None
    v_drift = _drift_fields(n2, spec, rng) if drifting else None

    data = np.empty((n1, n2, n3), order="F")
    for k in range(n3):
        uk = u + spec.slice_drift * u_drift[k] if drifting else u
        vk = v + spec.slice_drift * v_drift[k] if drifting else v
        data[:, :, k] = (uk * tubes[:, k]) @ vk.T
    std = float(data.std())
    if std > 0:
        data /= std
    return Tensor3(data)


def _ellipsoid(dims, center, radii) -> np.ndarray:
    grid = np.ogrid[tuple(slice(0, n) for n in dims)]
    dist = sum(((g - c) / rad) ** 2 for g, c, rad in zip(grid, center, radii))
    return dist <= 1.0


def _ellipsoid_anomalies(spec: PhantomSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    dims = spec.dims
    target = int(round(spec.sparse_fraction * np.prod(dims)))
    values = np.zeros(dims, order="F")
    mask = np.zeros(dims, dtype=bool)
    max_radii = [max(1.0, n / 8.0) for n in dims]
    blobs = 0
    while np.count_nonzero(mask) < target and blobs < MAX_BLOBS:
        center = [rng.uniform(0, n) for n in dims]
        radii = [rng.uniform(min(1.0, m), m) for m in max_radii]
        blob = _ellipsoid(dims, center, radii)
        # Later blobs overwrite earlier ones where they overlap.
        values[blob] = rng.choice([-1.0, 1.0]) * spec.sparse_magnitude
        mask |= blob
        blobs += 1
    return values, mask


def _scatter_anomalies(spec: PhantomSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    size = int(np.prod(spec.dims))
    count = int(round(spec.sparse_fraction * size))
    flat = np.zeros(size)
    idx = rng.choice(size, size=count, replace=False)
    flat[idx] = rng.choice([-1.0, 1.0], size=count) * spec.sparse_magnitude
    values = flat.reshape(spec.dims, order="F")
    return np.asfortranarray(values), values != 0


def make_phantom(spec: PhantomSpec) -> Phantom:
    """
    Build a phantom stack.

    Args:
        spec: Phantom parameters

    Returns:
        Phantom(volumes, truth_low_rank, truth_sparse, anomaly_masks), one
        entry per volume; volume i is exactly truth_low_rank[i] + truth_sparse[i]
    """
    rng = make_rng(spec.seed)
    background = make_background(spec, rng)
    make_anomalies = _scatter_anomalies if spec.anomaly_shape == "scatter" else _ellipsoid_anomalies

    volumes, lows, sparses, masks = [], [], [], []
    for i in range(spec.n_volumes):
        gain = 1.0 if i == 0 else 1.0 + GAIN_JITTER * rng.standard_normal()
        low = background * gain
        if spec.sparse_fraction > 0 and spec.sparse_magnitude > 0:
            values, mask = make_anomalies(spec, rng)
        else:
            values, mask = np.zeros(spec.dims, order="F"), np.zeros(spec.dims, dtype=bool)
        sparse = Tensor3(values)
        lows.append(low)
        sparses.append(sparse)
        volumes.append(low + sparse)
        masks.append(LabelVolume(mask, spec.spacing))

    logger.info(
        f"Built phantom: {spec.n_volumes} volume(s) of {spec.dims}, rank {spec.tubal_rank}, "
        f"sparse fraction {spec.sparse_fraction}, seed {spec.seed}"
    )
    return Phantom(volumes, lows, sparses, masks)
