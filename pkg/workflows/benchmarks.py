"""
Benchmark Workflows

Transform comparison (masked σ, H and mean per-segment solve time under each
transform) and the segment-length sweep with its CSV table and plot.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from algebra.tensor import Tensor3  # noqa: E402
from algebra.transforms import TransformKind, build_transform  # noqa: E402
from config.settings import Settings  # noqa: E402
from errors import UnsupportedLengthError  # noqa: E402
from solvers.multislice import (  # noqa: E402
    SweepRow,
    ms_lrtd,
    odd_length_error,
    plan_segments,
    sweep_segment_length,
)
from solvers.tpcp import TpcpConfig  # noqa: E402
from tools.metrics import DEFAULT_BINS, LabelVolume, input_ranges, mean_masked_stats  # noqa: E402
from tools.report import write_csv  # noqa: E402

logger = logging.getLogger(__name__)

DEFAULT_TRANSFORMS = ("dct", "fft", "dwt4")
BENCH_HEADER = ("transform", "sigma", "entropy_bits", "mean_solve_ms")
SWEEP_HEADER = ("k", "sigma", "entropy_bits")


def template_config(
    settings: Settings,
    transform: str,
    volumes: Sequence[Tensor3],
    k: int,
    **overrides,
) -> TpcpConfig:
    """Solver config whose transform length matches the first segment tensor."""
    d = volumes[0].n3
    plan = plan_segments(d, min(k, d))
    n3 = len(volumes) * plan.segments[0].padded_length
    return TpcpConfig.from_settings(settings, build_transform(transform, n3), **overrides)


def raw_stats(volumes: Sequence[Tensor3], mask: LabelVolume, bins: int = DEFAULT_BINS) -> Dict[str, float]:
    """Mean masked σ and H of the inputs themselves."""
    return mean_masked_stats(volumes, mask, bins, input_ranges(volumes, mask))


def check_transform_lengths(
    transforms: Sequence[str], n_volumes: int, d: int, segment_length: int
) -> Optional[str]:
    """Error message when a requested dwt4 run would hit an odd segment tensor length."""
    if not any(TransformKind.parse(t) is TransformKind.DWT4 for t in transforms):
        return None
    return odd_length_error(n_volumes, d, segment_length)


def bench_transforms(
    volumes: Sequence[Tensor3],
    mask: LabelVolume,
    segment_length: int,
    settings: Settings,
    transforms: Sequence[str] = DEFAULT_TRANSFORMS,
    bins: int = DEFAULT_BINS,
    workers: int = 1,
    **overrides,
) -> List[Dict[str, Union[str, float]]]:
    """
    Decompose the stack under each transform and measure the low-rank output.

    Timing covers the solver only (mean over segments of the solve time).
    The outputs are scored on the histogram span of the matching input, so
    every row compares directly with raw_stats.

    Returns:
        Rows with keys transform, sigma, entropy_bits, mean_solve_ms

    Raises:
        UnsupportedLengthError: dwt4 requested with an odd segment tensor
            length; raised before any transform runs
    """
    message = check_transform_lengths(transforms, len(volumes), volumes[0].n3, segment_length)
    if message:
        raise UnsupportedLengthError(message)

    ranges = input_ranges(volumes, mask)
    rows = []
    for name in transforms:
        label = TransformKind.parse(name).label
        cfg = template_config(settings, name, volumes, segment_length, **overrides)
        result = ms_lrtd(volumes, segment_length, cfg, workers=workers)
        stats = mean_masked_stats(result.low_rank_volumes, mask, bins, ranges)
        row = {
            "transform": label,
            "sigma": stats["sigma"],
            "entropy_bits": stats["entropy_bits"],
            "mean_solve_ms": result.mean_solve_seconds * 1000.0,
        }
        logger.info(
            f"Transform {label}: sigma={row['sigma']:.6g} H={row['entropy_bits']:.4f} bits "
            f"mean solve {row['mean_solve_ms']:.2f} ms"
        )
        rows.append(row)
    return rows


def run_sweep(
    volumes: Sequence[Tensor3],
    mask: LabelVolume,
    k_values: Sequence[int],
    settings: Settings,
    transform: str,
    bins: int = DEFAULT_BINS,
    workers: int = 1,
    **overrides,
) -> List[SweepRow]:
    """Segment-length sweep with a template config built from settings."""
    cfg = template_config(settings, transform, volumes, min(k_values), **overrides)
    return sweep_segment_length(volumes, list(k_values), mask, cfg, bins=bins, workers=workers)


def write_bench_csv(path: Union[str, Path], rows: Sequence[Dict]) -> Path:
    return write_csv(path, BENCH_HEADER, [[r[h] for h in BENCH_HEADER] for r in rows])


def write_sweep_csv(path: Union[str, Path], rows: Sequence[SweepRow]) -> Path:
    return write_csv(path, SWEEP_HEADER, [[r.k, r.sigma, r.entropy_bits] for r in rows])


def plot_sweep(path: Union[str, Path], rows: Sequence[SweepRow], raw_sigma: Optional[float] = None) -> Path:
    """σ vs K line plot (PNG or SVG by extension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.k for r in rows], [r.sigma for r in rows], marker="o", label="low-rank output")
    if raw_sigma is not None:
        ax.axhline(raw_sigma, linestyle="--", color="gray", label="input")
    ax.set_xlabel("Segment length K (slices)")
    ax.set_ylabel("Masked intensity σ")
    ax.set_xticks([r.k for r in rows])
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"Saved plot: {path}")
    return path
