"""
Multi-Slice Low-Rank Tensor Decomposition

Splits a stack of aligned volumes into short runs of consecutive slices,
solves TPCP once per run on the tensor formed by concatenating every volume's
run along mode 3, and stitches the per-volume results back together.

Segment layout for d slices and length k:
- cores tile [0, d) in order, each of length k except that a 1-slice tail
  merges into the previous core (minimum core length is 2)
- each core is padded by one slice at every end that has a neighbor; the
  first and last segments are not padded at the volume boundary
- padded slices overlap the neighbor's core; every slice covered twice is
  averaged with equal weights
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from algebra.tensor import Tensor3, stack_frontal
from algebra.transforms import TransformKind, TransformSpec, build_transform
from errors import InvalidArgumentError, ShapeError, UnsupportedLengthError
from solvers.tpcp import TpcpConfig, TpcpResult, default_lambda, tpcp_solve
from tools.metrics import DEFAULT_BINS, LabelVolume, input_ranges, mean_masked_stats

logger = logging.getLogger(__name__)


class Segment(NamedTuple):
    """Half-open slice ranges of one segment."""

    core_start: int
    core_end: int
    padded_start: int
    padded_end: int

    @property
    def padded_length(self) -> int:
        return self.padded_end - self.padded_start


@dataclass(frozen=True)
class SegmentPlan:
    """Segments covering d slices with nominal length k."""

    k: int
    n_slices: int
    segments: List[Segment]
    overlap: int = 1

    def coverage(self) -> np.ndarray:
        """How many padded segments cover each slice."""
        counts = np.zeros(self.n_slices, dtype=int)
        for seg in self.segments:
            counts[seg.padded_start:seg.padded_end] += 1
        return counts


def plan_segments(d: int, k: int) -> SegmentPlan:
    """
    Partition d slices into segments of length k.

    Args:
        d: Number of slices, >= 2
        k: Segment length, >= 2

    Returns:
        SegmentPlan; a 1-slice remainder is merged into the last full segment

    Raises:
        InvalidArgumentError: d < 2 or k < 2
    """
    if d < 2:
        raise InvalidArgumentError(f"Need at least 2 slices, got d={d}")
    if k < 2:
        raise InvalidArgumentError(f"Segment length must be >= 2, got k={k}")

    cores = []
    start = 0
    while start < d:
        end = min(start + k, d)
        if d - end == 1:
            end = d
        cores.append((start, end))
        start = end

    segments = [
        Segment(
            core_start=s,
            core_end=e,
            padded_start=s - 1 if s > 0 else s,
            padded_end=e + 1 if e < d else e,
        )
        for s, e in cores
    ]
    return SegmentPlan(k=k, n_slices=d, segments=segments)


def segment_tensor_lengths(n_volumes: int, d: int, k: int) -> List[int]:
    """Mode-3 length N * padded_length of every segment tensor, in slice order."""
    plan = plan_segments(d, min(k, d))
    return [n_volumes * seg.padded_length for seg in plan.segments]


def odd_length_error(n_volumes: int, d: int, k: int) -> Optional[str]:
    """Message naming the odd segment tensor lengths DWT4 cannot handle, or None."""
    odd = sorted({n for n in segment_tensor_lengths(n_volumes, d, k) if n % 2})
    if not odd:
        return None
    return (
        f"DWT4 needs an even segment tensor length; {n_volumes} volume(s) with k={k} "
        f"over {d} slices gives {', '.join(str(n) for n in odd)}"
    )


@dataclass
class MultiSliceResult:
    """Stitched decomposition of every input volume."""

    low_rank_volumes: List[Tensor3]
    sparse_volumes: List[Tensor3]
    per_segment: List[Dict[str, Any]] = field(default_factory=list)
    plan: Optional[SegmentPlan] = None

    @property
    def all_converged(self) -> bool:
        return all(s["converged"] for s in self.per_segment)

    @property
    def mean_solve_seconds(self) -> float:
        if not self.per_segment:
            return 0.0
        return float(np.mean([s["solve_seconds"] for s in self.per_segment]))


def _check_volumes(volumes: Sequence[Tensor3]) -> None:
    if not volumes:
        raise ShapeError("ms_lrtd needs at least one volume")
    dims = volumes[0].dims
    for i, vol in enumerate(volumes[1:], start=1):
        if vol.dims != dims:
            raise ShapeError(f"Volume {i} has dims {vol.dims}, volume 0 has {dims}")


class _TransformCache:
    """Transforms of the template's kind, built once per length."""

    def __init__(self, template: TransformSpec):
        self.template = template
        self._built: Dict[int, TransformSpec] = {}

    def get(self, n3: int) -> TransformSpec:
        if n3 == self.template.n3:
            return self.template
        if self.template.kind is TransformKind.CUSTOM:
            raise InvalidArgumentError(
                f"Custom transform has length {self.template.n3}, segment tensor needs {n3}"
            )
        if n3 not in self._built:
            self._built[n3] = build_transform(self.template.kind, n3)
        return self._built[n3]


def ms_lrtd(
    volumes: Sequence[Tensor3],
    k: int,
    cfg: TpcpConfig,
    workers: int = 1,
    global_lambda: bool = False,
    progress: Optional[Callable[[int, TpcpResult], None]] = None,
) -> MultiSliceResult:
    """
    Multi-slice decomposition of aligned volumes.

    Args:
        volumes: N aligned volumes with equal dims (n1, n2, d)
        k: Segment length; k >= d gives a single unpadded segment
        cfg: Solver template; its transform kind is rebuilt for each
            segment tensor length N * padded_length
        workers: Segments solved concurrently (slice-level threads when
            there is only one segment)
        global_lambda: Use one λ from the first segment tensor's dims
            instead of recomputing λ per segment
        progress: Called with (segment index, result) as segments finish

    Returns:
        MultiSliceResult with outputs in the input order

    Raises:
        ShapeError: Volumes with different dims
        InvalidArgumentError: Invalid k or slice count
        UnsupportedLengthError: DWT4 with an odd segment tensor length
    """
    _check_volumes(volumes)
    n1, n2, d = volumes[0].dims
    n_vol = len(volumes)
    plan = plan_segments(d, min(k, d))
    transforms = _TransformCache(cfg.transform)

    lam = None
    if global_lambda:
        first = plan.segments[0]
        lam = default_lambda((n1, n2, n_vol * first.padded_length)) if cfg.lambda_ == "auto" else cfg.lambda_

    if cfg.transform.kind is TransformKind.DWT4:
        message = odd_length_error(n_vol, d, k)
        if message:
            raise UnsupportedLengthError(message)

    jobs = []
    for seg in plan.segments:
        length = n_vol * seg.padded_length
        seg_cfg = cfg.with_transform(transforms.get(length))
        if lam is not None:
            seg_cfg = seg_cfg.model_copy(update={"lambda_": lam})
        jobs.append((seg, seg_cfg))

    inner_workers = workers if len(jobs) == 1 else 1
    logger.info(
        f"Multi-slice LRTD: {n_vol} volume(s) of {volumes[0].dims}, k={plan.k}, "
        f"{len(jobs)} segment(s), transform {cfg.transform.kind.label}"
    )

    def solve(index: int) -> TpcpResult:
        seg, seg_cfg = jobs[index]
        x = stack_frontal(
            Tensor3(vol.data[:, :, seg.padded_start:seg.padded_end]) for vol in volumes
        )
        result = tpcp_solve(x, seg_cfg, workers=inner_workers)
        logger.info(
            f"Segment {index + 1}/{len(jobs)} slices [{seg.padded_start}, {seg.padded_end}): "
            f"{result.iterations} iterations, converged={result.converged}"
        )
        if progress is not None:
            progress(index, result)
        return result

    start = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="segment") as pool:
            results = list(pool.map(solve, range(len(jobs))))
    else:
        results = [solve(i) for i in range(len(jobs))]

    low_sum = [np.zeros((n1, n2, d), order="F") for _ in range(n_vol)]
    sparse_sum = [np.zeros((n1, n2, d), order="F") for _ in range(n_vol)]
    counts = plan.coverage()
    per_segment = []
    for index, ((seg, _), result) in enumerate(zip(jobs, results)):
        length = seg.padded_length
        for v in range(n_vol):
            part = slice(v * length, (v + 1) * length)
            low_sum[v][:, :, seg.padded_start:seg.padded_end] += result.low_rank.data[:, :, part]
            sparse_sum[v][:, :, seg.padded_start:seg.padded_end] += result.sparse.data[:, :, part]
        summary = result.summary()
        summary.update(
            {
                "segment": index,
                "core": [seg.core_start, seg.core_end],
                "padded": [seg.padded_start, seg.padded_end],
                "residual_trace": [rec.primal_residual for rec in result.trace],
            }
        )
        per_segment.append(summary)

    weights = counts[None, None, :].astype(float)
    merged = MultiSliceResult(
        low_rank_volumes=[Tensor3(s / weights) for s in low_sum],
        sparse_volumes=[Tensor3(s / weights) for s in sparse_sum],
        per_segment=per_segment,
        plan=plan,
    )
    elapsed = time.perf_counter() - start
    failed = sum(1 for s in per_segment if not s["converged"])
    if failed:
        logger.warning(f"{failed} of {len(per_segment)} segment(s) did not converge")
    logger.info(f"Multi-slice LRTD finished in {elapsed:.2f}s")
    return merged


class SweepRow(NamedTuple):
    k: int
    sigma: float
    entropy_bits: float


def sweep_segment_length(
    volumes: Sequence[Tensor3],
    k_values: Sequence[int],
    mask: LabelVolume,
    cfg: TpcpConfig,
    bins: int = DEFAULT_BINS,
    workers: int = 1,
) -> List[SweepRow]:
    """
    Run ms_lrtd for every k and measure the low-rank output inside a mask.

    σ and H are averaged over the volumes. Each output is scored on the
    histogram span of its input so rows compare across k and with the input.

    Raises:
        InvalidArgumentError: Any k < 2 or an empty k list
    """
    if not k_values:
        raise InvalidArgumentError("Segment length sweep needs at least one k")
    bad = [k for k in k_values if k < 2]
    if bad:
        raise InvalidArgumentError(f"Segment lengths must be >= 2, got {bad}")

    ranges = input_ranges(volumes, mask)
    rows = []
    for k in k_values:
        result = ms_lrtd(volumes, k, cfg, workers=workers)
        stats = mean_masked_stats(result.low_rank_volumes, mask, bins, ranges)
        row = SweepRow(k=int(k), sigma=stats["sigma"], entropy_bits=stats["entropy_bits"])
        logger.info(f"Sweep k={row.k}: sigma={row.sigma:.6g} H={row.entropy_bits:.4f} bits")
        rows.append(row)
    return rows
