#!/usr/bin/env python3
"""
SliceLRTD - CLI Entry Point

Command-line interface for multi-slice low-rank tensor decomposition of
aligned volume stacks.

Usage:
    python main.py phantom --dims 64,64,30 --volumes 6 --out-dir ./phantom
    python main.py decompose --input ./phantom/phantom_*.mhd --out-dir ./outputs
    python main.py metrics --a ./outputs/mask.mhd --b ./phantom/mask_00.mhd
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from algebra.tensor import relative_error  # noqa: E402
from algebra.transforms import build_transform  # noqa: E402
from algebra.tsvd import avg_rank, reconstruct, tnn, tsvd, tubal_rank  # noqa: E402
from config.settings import Settings, apply_defaults, load_defaults  # noqa: E402
from data.phantom import PhantomSpec, make_phantom  # noqa: E402
from data.volume_io import (  # noqa: E402
    ElementType,
    VolumeMeta,
    normalize_joint,
    read_label,
    read_volume,
    write_label,
    write_volume,
)
from errors import LrtdError  # noqa: E402
from tools.decomposition_tool import DecompositionTool, volume_stem  # noqa: E402
from tools.metrics import asd, dice, jaccard, masked_range, masked_stats, ncc  # noqa: E402
from tools.report import RunReport  # noqa: E402
from workflows.benchmarks import (  # noqa: E402
    bench_transforms,
    check_transform_lengths,
    plot_sweep,
    raw_stats,
    run_sweep,
    write_bench_csv,
    write_sweep_csv,
)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

TRANSFORM_CHOICES = ['dct', 'fft', 'dwt4']

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ {self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def setup_logging(level: str, log_file: Optional[str] = None) -> None:
    """Configure root logging to stdout and an optional file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, handlers=handlers, force=True)


def int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def dims_arg(text: str):
    values = int_list(text)
    if len(values) != 3 or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected n1,n2,n3 with every value >= 1, got {text!r}")
    return tuple(values)


def lambda_arg(text: str):
    if text == 'auto':
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive number, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"lambda must be positive, got {value}")
    return value


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = CliParser(
        description='SliceLRTD - Multi-slice low-rank tensor decomposition',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate a 6-volume phantom stack with anomaly masks
  python main.py phantom --dims 64,64,30 --rank 5 --volumes 6 --out-dir ./phantom

  # Decompose it with the defaults (DCT, K=5, automatic lambda)
  python main.py decompose --input ./phantom/phantom_0*.mhd --out-dir ./outputs \\
      --truth-masks ./phantom/mask_0*.mhd

  # t-SVD ranks of a single volume
  python main.py tsvd --input ./phantom/phantom_00.mhd --transform fft

  # Compare transforms and sweep the segment length inside a mask
  python main.py bench-transforms --inputs ./phantom/phantom_0*.mhd --mask ./roi.mhd
  python main.py sweep-k --inputs ./phantom/phantom_0*.mhd --mask ./roi.mhd --plot sweep.png

  # Segmentation and image metrics
  python main.py metrics --a seg.mhd --b truth.mhd
  python main.py metrics --image vol.mhd --mask roi.mhd --reference other.mhd
        """
    )
    parser.add_argument('--log-level', help='Logging level (default: LOG_LEVEL setting)')
    parser.add_argument('--config', help='YAML parameter table (default: config/defaults.yaml)')

    sub = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    # decompose
    p = sub.add_parser('decompose', help='Multi-slice decomposition of a volume stack')
    p.add_argument('--input', nargs='+', required=True, help='Input volume headers (equal dims)')
    p.add_argument('--transform', choices=TRANSFORM_CHOICES, help='Mode-3 transform (default: dct)')
    p.add_argument('--segment-length', type=int, help='Slices per segment K, >= 2 (default: 5)')
    p.add_argument('--lambda', dest='lambda_', type=lambda_arg, help="'auto' or a positive value")
    p.add_argument('--global-lambda', action='store_true', help='One lambda for every segment')
    p.add_argument('--mask', help='Optional label volume for masked statistics of the outputs')
    p.add_argument('--truth-masks', nargs='+', help='Anomaly masks, one per input, for support Dice')
    p.add_argument('--support-threshold', type=float, help='|E| threshold in normalized units')
    p.add_argument('--max-iters', type=int, help='ADMM iteration cap')
    p.add_argument('-o', '--out-dir', help='Output directory (default: OUTPUT_DIR setting)')
    p.add_argument('--workers', type=int, help='Worker threads (0 = all cores)')
    p.add_argument('--report', help='Report path (default: <out-dir>/decompose_report.json)')

    # tsvd
    p = sub.add_parser('tsvd', help='t-SVD ranks and norms of one volume')
    p.add_argument('--input', required=True, help='Volume header')
    p.add_argument('--transform', choices=TRANSFORM_CHOICES, help='Mode-3 transform (default: dct)')
    p.add_argument('--rank-tol', type=float, default=0.0, help='Rank tolerance (0 = relative 1e-8)')
    p.add_argument('--workers', type=int, help='Worker threads (0 = all cores)')
    p.add_argument('--report', help='Report path')

    # bench-transforms
    p = sub.add_parser('bench-transforms', help='Compare dct, fft and dwt4')
    p.add_argument('--inputs', nargs='+', required=True, help='Input volume headers')
    p.add_argument('--mask', required=True, help='Label volume for masked statistics')
    p.add_argument('--segment-length', type=int, help='Slices per segment K (default: 5)')
    p.add_argument('--max-iters', type=int, help='ADMM iteration cap')
    p.add_argument('-o', '--out-dir', help='Output directory')
    p.add_argument('--csv', help='Table path (default: <out-dir>/bench_transforms.csv)')
    p.add_argument('--workers', type=int, help='Worker threads (0 = all cores)')
    p.add_argument('--report', help='Report path (default: <out-dir>/bench_report.json)')

    # sweep-k
    p = sub.add_parser('sweep-k', help='Masked statistics over segment lengths')
    p.add_argument('--inputs', nargs='+', required=True, help='Input volume headers')
    p.add_argument('--mask', required=True, help='Label volume for masked statistics')
    p.add_argument('--k-values', type=int_list, help='Comma-separated K values (default: 2,...,11)')
    p.add_argument('--transform', choices=TRANSFORM_CHOICES, help='Mode-3 transform (default: dct)')
    p.add_argument('--max-iters', type=int, help='ADMM iteration cap')
    p.add_argument('-o', '--out-dir', help='Output directory')
    p.add_argument('--csv', help='Table path (default: <out-dir>/sweep_k.csv)')
    p.add_argument('--plot', help='Optional sigma-vs-K plot (.png or .svg)')
    p.add_argument('--workers', type=int, help='Worker threads (0 = all cores)')
    p.add_argument('--report', help='Report path (default: <out-dir>/sweep_report.json)')

    # phantom
    p = sub.add_parser('phantom', help='Write a synthetic phantom stack')
    p.add_argument('--dims', type=dims_arg, default=(64, 64, 30), help='n1,n2,n3 (default: 64,64,30)')
    p.add_argument('--rank', type=int, default=5, help='Background tubal rank')
    p.add_argument('--volumes', type=int, default=6, help='Number of volumes')
    p.add_argument('--sparse-fraction', type=float, default=0.03, help='Anomaly voxel fraction')
    p.add_argument('--sparse-magnitude', type=float, default=5.0, help='Anomaly intensity offset')
    p.add_argument('--slice-drift', type=float, default=0.0, help='Background drift along slices')
    p.add_argument('--anomaly-shape', choices=['ellipsoid', 'scatter'], default='ellipsoid')
    p.add_argument('--transform', choices=TRANSFORM_CHOICES, default='dct', help='Background transform')
    p.add_argument('--seed', type=int, default=0, help='Random seed')
    p.add_argument('-o', '--out-dir', required=True, help='Output directory')
    p.add_argument('--report', help='Report path')

    # metrics
    p = sub.add_parser('metrics', help='Segmentation or image metrics')
    p.add_argument('--a', help='Label volume A (segmentation)')
    p.add_argument('--b', help='Label volume B (reference)')
    p.add_argument('--image', help='Image volume for masked statistics')
    p.add_argument('--mask', help='Label volume restricting the statistics')
    p.add_argument('--reference', help='Second image for NCC against --image')
    p.add_argument('--bins', type=int, help='Histogram bins (default: 256)')
    p.add_argument('--report', help='Report path')

    return parser.parse_args(argv)


def load_settings(args: argparse.Namespace):
    """Settings from env/.env overlaid with the YAML parameter table."""
    settings = Settings()
    defaults = load_defaults(args.config or settings.DEFAULTS_FILE)
    return apply_defaults(settings, defaults), defaults


def command_echo(args: argparse.Namespace, argv: Optional[Sequence[str]]) -> Dict[str, Any]:
    return {'name': args.command, 'argv': list(sys.argv[1:] if argv is None else argv)}


def banner(title: str) -> None:
    print("\n" + "="*80)
    print(title)
    print("="*80)


def print_errors(result: Dict[str, Any]) -> None:
    if result.get('errors'):
        print("\nInput Validation Errors:")
        for error in result['errors']:
            print(f"  ❌ {error}")
    elif result.get('error'):
        print(f"\nError: {result['error']}")


# Commands

def resolve_segment_length(value: Optional[int], settings: Settings) -> Optional[int]:
    """Explicit --segment-length or the configured default; None after printing a usage error."""
    segment_length = settings.DEFAULT_SEGMENT_LENGTH if value is None else value
    if segment_length < 2:
        print(f"❌ --segment-length must be >= 2, got {segment_length}")
        return None
    return segment_length


def cmd_decompose(args, settings: Settings, defaults: Dict[str, Any], argv) -> int:
    segment_length = resolve_segment_length(args.segment_length, settings)
    if segment_length is None:
        return EXIT_ERROR

    decompose_defaults = defaults.get('decompose', {}) or {}
    tpcp_defaults = defaults.get('tpcp', {}) or {}
    transform = args.transform or settings.DEFAULT_TRANSFORM
    lambda_ = args.lambda_ if args.lambda_ is not None else tpcp_defaults.get('lambda', 'auto')
    threshold = args.support_threshold
    if threshold is None:
        threshold = decompose_defaults.get('support_threshold', 0.1)
    workers = settings.resolved_workers(args.workers)
    out_dir = Path(args.out_dir or settings.OUTPUT_DIR)

    tool = DecompositionTool(settings, output_dir=str(out_dir), workers=workers)
    result = tool.run_decomposition(
        inputs=args.input,
        transform=transform,
        segment_length=segment_length,
        lambda_=lambda_,
        global_lambda=args.global_lambda,
        truth_masks=args.truth_masks,
        support_threshold=threshold,
        max_iters=args.max_iters,
    )

    banner("DECOMPOSITION RESULTS")
    if not result.get('success'):
        print("\n❌ Decomposition failed")
        print_errors(result)
        return EXIT_ERROR

    metrics = result['metrics']
    if args.mask:
        # Outputs are scored on their input's masked range so H compares with the input.
        mask = read_label(args.mask)
        input_paths = {volume_stem(p): p for p in args.input}
        for name, path in result['outputs'].items():
            if name.endswith('.lowrank'):
                span = masked_range(read_volume(input_paths[name[:-len('.lowrank')]])[0], mask)
                stats = masked_stats(read_volume(path)[0], mask, settings.HISTOGRAM_BINS, span)
                metrics[f"{name}.masked_sigma"] = stats.sigma
                metrics[f"{name}.masked_entropy_bits"] = stats.entropy_bits

    report = RunReport(
        command=command_echo(args, argv),
        config=result['config'],
        segments=result['segments'],
        timings=result['timings'],
        outputs=result['outputs'],
        metrics=metrics,
    )
    report_path = report.save(args.report or out_dir / 'decompose_report.json')

    n_segments = len(result['segments'])
    converged = sum(1 for s in result['segments'] if s['converged'])
    print(f"\nSegments converged: {converged}/{n_segments}")
    print(f"Lambda: {result['config']['lambda']}")
    if 'mean_support_dice' in metrics:
        print(f"Sparse support Dice: {metrics['mean_support_dice']:.2f}%")
    print(f"Outputs: {len(result['outputs'])} volumes in {out_dir}")
    print(f"Report: {report_path}")

    if not result['all_converged']:
        print("\n⚠️  Some segments did not converge (outputs written)")
        return EXIT_NOT_CONVERGED
    print("\n✅ Decomposition completed successfully!")
    return EXIT_OK


def cmd_tsvd(args, settings: Settings, defaults: Dict[str, Any], argv) -> int:
    transform = args.transform or settings.DEFAULT_TRANSFORM
    workers = settings.resolved_workers(args.workers)
    x, meta = read_volume(args.input)
    t = build_transform(transform, x.n3)

    start = time.perf_counter()
    factors = tsvd(t, x, workers=workers)
    elapsed = time.perf_counter() - start
    metrics = {
        'tubal_rank': tubal_rank(factors, args.rank_tol),
        'average_rank': avg_rank(t, x, args.rank_tol, workers=workers),
        'tnn': tnn(t, x, workers=workers),
        'reconstruction_error': relative_error(reconstruct(factors), x),
    }

    banner("T-SVD RESULTS")
    print(f"\nVolume: {args.input} {meta.dims}, transform {t.kind.label}")
    print(f"  - Tubal rank: {metrics['tubal_rank']}")
    print(f"  - Average rank: {metrics['average_rank']:.4f}")
    print(f"  - Tensor nuclear norm: {metrics['tnn']:.6g}")
    print(f"  - Reconstruction error: {metrics['reconstruction_error']:.3e}")

    if args.report:
        report = RunReport(
            command=command_echo(args, argv),
            config={'transform': t.kind.label, 'rank_tol': args.rank_tol, 'workers': workers},
            timings={'tsvd_seconds': elapsed},
            metrics=metrics,
        )
        report.save(args.report)
    print("\n✅ t-SVD completed successfully!")
    return EXIT_OK


def _load_stack(paths: Sequence[str]):
    volumes = [read_volume(p)[0] for p in paths]
    normalized, offset, scale = normalize_joint(volumes)
    return normalized, offset, scale


def cmd_bench_transforms(args, settings: Settings, defaults: Dict[str, Any], argv) -> int:
    segment_length = resolve_segment_length(args.segment_length, settings)
    if segment_length is None:
        return EXIT_ERROR
    transforms = (defaults.get('benchmarks', {}) or {}).get('transforms', TRANSFORM_CHOICES)
    workers = settings.resolved_workers(args.workers)
    out_dir = Path(args.out_dir or settings.OUTPUT_DIR)

    volumes, offset, scale = _load_stack(args.inputs)
    length_error = check_transform_lengths(transforms, len(volumes), volumes[0].n3, segment_length)
    if length_error:
        print(f"❌ {length_error}")
        print("   Change --segment-length or the number of inputs, or drop dwt4 from benchmarks.transforms")
        return EXIT_ERROR
    mask = read_label(args.mask)
    start = time.perf_counter()
    rows = bench_transforms(
        volumes, mask, segment_length, settings,
        transforms=transforms, bins=settings.HISTOGRAM_BINS, workers=workers,
        max_iters=args.max_iters,
    )
    elapsed = time.perf_counter() - start
    raw = raw_stats(volumes, mask, settings.HISTOGRAM_BINS)
    csv_path = write_bench_csv(args.csv or out_dir / 'bench_transforms.csv', rows)

    report = RunReport(
        command=command_echo(args, argv),
        config={'segment_length': segment_length, 'transforms': [r['transform'] for r in rows],
                'intensity_offset': offset, 'intensity_scale': scale, 'workers': workers},
        timings={'bench_seconds': elapsed},
        outputs={'table': str(csv_path)},
        metrics={'raw_sigma': raw['sigma'], 'raw_entropy_bits': raw['entropy_bits']},
        tables={'transforms': rows},
    )
    report_path = report.save(args.report or out_dir / 'bench_report.json')

    banner("TRANSFORM BENCHMARK")
    print(f"\n{'transform':<10}{'sigma':>14}{'H [bits]':>12}{'solve [ms]':>14}")
    print(f"{'input':<10}{raw['sigma']:>14.6g}{raw['entropy_bits']:>12.4f}{'':>14}")
    for r in rows:
        print(f"{r['transform']:<10}{r['sigma']:>14.6g}{r['entropy_bits']:>12.4f}{r['mean_solve_ms']:>14.2f}")
    print(f"\nTable: {csv_path}")
    print(f"Report: {report_path}")
    print("\n✅ Benchmark completed successfully!")
    return EXIT_OK


def cmd_sweep_k(args, settings: Settings, defaults: Dict[str, Any], argv) -> int:
    k_values = args.k_values or (defaults.get('benchmarks', {}) or {}).get('k_values', list(range(2, 12)))
    bad = [k for k in k_values if k < 2]
    if not k_values or bad:
        print(f"❌ --k-values must all be >= 2, got {k_values}")
        return EXIT_ERROR
    transform = args.transform or settings.DEFAULT_TRANSFORM
    workers = settings.resolved_workers(args.workers)
    out_dir = Path(args.out_dir or settings.OUTPUT_DIR)

    volumes, offset, scale = _load_stack(args.inputs)
    mask = read_label(args.mask)
    start = time.perf_counter()
    rows = run_sweep(
        volumes, mask, k_values, settings, transform,
        bins=settings.HISTOGRAM_BINS, workers=workers, max_iters=args.max_iters,
    )
    elapsed = time.perf_counter() - start
    raw = raw_stats(volumes, mask, settings.HISTOGRAM_BINS)

    outputs = {'table': str(write_sweep_csv(args.csv or out_dir / 'sweep_k.csv', rows))}
    if args.plot:
        outputs['plot'] = str(plot_sweep(args.plot, rows, raw_sigma=raw['sigma']))

    report = RunReport(
        command=command_echo(args, argv),
        config={'transform': transform, 'k_values': list(k_values),
                'intensity_offset': offset, 'intensity_scale': scale, 'workers': workers},
        timings={'sweep_seconds': elapsed},
        outputs=outputs,
        metrics={'raw_sigma': raw['sigma'], 'raw_entropy_bits': raw['entropy_bits']},
        tables={'sweep': [r._asdict() for r in rows]},
    )
    report_path = report.save(args.report or out_dir / 'sweep_report.json')

    banner("SEGMENT LENGTH SWEEP")
    print(f"\n{'K':>4}{'sigma':>14}{'H [bits]':>12}")
    for r in rows:
        print(f"{r.k:>4}{r.sigma:>14.6g}{r.entropy_bits:>12.4f}")
    print(f"\nTable: {outputs['table']}")
    print(f"Report: {report_path}")
    print("\n✅ Sweep completed successfully!")
    return EXIT_OK


def cmd_phantom(args, settings: Settings, defaults: Dict[str, Any], argv) -> int:
    spec = PhantomSpec(
        dims=args.dims,
        tubal_rank=args.rank,
        n_volumes=args.volumes,
        sparse_fraction=args.sparse_fraction,
        sparse_magnitude=args.sparse_magnitude,
        slice_drift=args.slice_drift,
        anomaly_shape=args.anomaly_shape,
        transform=args.transform,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    phantom = make_phantom(spec)
    report = RunReport(
        command=command_echo(args, argv),
        config=spec.model_dump(mode='json'),
        metrics={'anomaly_voxels': [m.voxel_count for m in phantom.anomaly_masks]},
    )

    for i, (vol, low, sparse, mask) in enumerate(zip(*phantom)):
        meta = VolumeMeta(vol.dims, spec.spacing, ElementType.F32)
        for prefix, tensor in (('phantom', vol), ('lowrank_truth', low), ('sparse_truth', sparse)):
            name = f"{prefix}_{i:02d}"
            report.add_output(name, write_volume(out_dir / f"{name}.mhd", tensor, meta))
        report.add_output(f"mask_{i:02d}", write_label(out_dir / f"mask_{i:02d}.mhd", mask))

    banner("PHANTOM")
    print(f"\n✅ Wrote {spec.n_volumes} volume(s) of {spec.dims} to {out_dir}")
    print(f"  - Tubal rank: {spec.tubal_rank}")
    print(f"  - Anomaly voxels: {[m.voxel_count for m in phantom.anomaly_masks]}")

    if args.report:
        report.save(args.report)
    return EXIT_OK


def cmd_metrics(args, settings: Settings, defaults: Dict[str, Any], argv) -> int:
    bins = settings.HISTOGRAM_BINS if args.bins is None else args.bins
    metrics: Dict[str, Any] = {}

    if args.a and args.b:
        a, b = read_label(args.a), read_label(args.b)
        metrics['dice'] = dice(a, b)
        metrics['jaccard'] = jaccard(a, b)
        metrics['asd_mm'] = asd(a, b)
    elif args.image:
        image, meta = read_volume(args.image)
        region = read_label(args.mask) if args.mask else None
        if region is not None:
            stats = masked_stats(image, region, bins)
            metrics['sigma'] = stats.sigma
            metrics['entropy_bits'] = stats.entropy_bits
            metrics['voxel_count'] = stats.voxel_count
        if args.reference:
            metrics['ncc'] = ncc(image, read_volume(args.reference)[0], region)
        if not metrics:
            print("❌ --image needs --mask and/or --reference")
            return EXIT_ERROR
    else:
        print("❌ metrics needs --a and --b, or --image with --mask/--reference")
        return EXIT_ERROR

    banner("METRICS")
    for name, value in metrics.items():
        print(f"  - {name}: {value:.6g}" if isinstance(value, float) else f"  - {name}: {value}")

    if args.report:
        RunReport(command=command_echo(args, argv), config={'bins': bins}, metrics=metrics).save(args.report)
    return EXIT_OK


COMMANDS = {
    'decompose': cmd_decompose,
    'tsvd': cmd_tsvd,
    'bench-transforms': cmd_bench_transforms,
    'sweep-k': cmd_sweep_k,
    'phantom': cmd_phantom,
    'metrics': cmd_metrics,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = parse_args(argv)

    try:
        settings, defaults = load_settings(args)
    except (OSError, ValueError) as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_ERROR

    setup_logging(args.log_level or settings.LOG_LEVEL, settings.LOG_FILE)

    print("="*80)
    print(f"SliceLRTD - {args.command}")
    print("="*80)

    try:
        return COMMANDS[args.command](args, settings, defaults, argv)
    except (LrtdError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed with exception: {str(e)}", exc_info=True)
        print(f"\n❌ {args.command} failed: {str(e)}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
