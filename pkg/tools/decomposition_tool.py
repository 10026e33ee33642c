"""
Decomposition Tool - Workflow Wrapper

Provides a structured interface to the multi-slice decomposition with input
validation, intensity normalization, error handling, and result persistence.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from algebra.tensor import Tensor3
from algebra.transforms import build_transform
from config.settings import Settings
from data.volume_io import (
    VolumeMeta,
    denormalize,
    normalize_joint,
    read_label,
    read_volume,
    write_volume,
)
from errors import LrtdError
from solvers.multislice import ms_lrtd, plan_segments
from solvers.tpcp import TpcpConfig
from tools.metrics import dice, jaccard, sparse_support_mask
from tools.validator import VolumeValidator

logger = logging.getLogger(__name__)


def volume_stem(path: str) -> str:
    return Path(path).stem


class DecompositionTool:
    """
    Tool wrapper for multi-slice decomposition of volume stacks.

    Provides:
    - Input validation before any solve
    - Joint [0, 1] normalization of the stack and de-normalized outputs
    - Error handling that returns result dicts instead of raising
    - Result persistence (low-rank and sparse volume pairs)
    - Structured logging
    """

    def __init__(
        self,
        settings: Settings,
        output_dir: Optional[str] = None,
        workers: int = 1,
    ):
        """
        Initialize Decomposition Tool.

        Args:
            settings: Application settings (ADMM constants, defaults)
            output_dir: Directory for output volumes (settings.OUTPUT_DIR if omitted)
            workers: Worker threads for segments and slice SVDs
        """
        self.settings = settings
        self.validator = VolumeValidator()
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR)
        self.workers = workers
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Output directory: {self.output_dir}")

    def load_inputs(self, paths: Sequence[str]):
        """Read every input volume; returns (volumes, metas)."""
        volumes, metas = [], []
        for path in paths:
            tensor, meta = read_volume(path)
            volumes.append(tensor)
            metas.append(meta)
        return volumes, metas

    def build_config(self, transform: str, n3: int, lambda_="auto", max_iters: Optional[int] = None) -> TpcpConfig:
        spec = build_transform(transform, n3)
        return TpcpConfig.from_settings(self.settings, spec, lambda_=lambda_, max_iters=max_iters)

    def run_decomposition(
        self,
        inputs: Sequence[str],
        transform: str,
        segment_length: int,
        lambda_="auto",
        global_lambda: bool = False,
        truth_masks: Optional[Sequence[str]] = None,
        support_threshold: float = 0.1,
        max_iters: Optional[int] = None,
    ) -> Dict[str, Any]:
        """
        Decompose a stack of volumes and save the results.

        Args:
            inputs: Input header paths (equal dims)
            transform: dct, fft or dwt4
            segment_length: K
            lambda_: "auto" or a positive value
            global_lambda: One λ for all segments
            truth_masks: Optional anomaly masks, one per input, for Dice scoring
            support_threshold: |E| threshold in normalized units for the support masks
            max_iters: Override for the ADMM iteration cap

        Returns:
            Dictionary with:
            {
                "success": bool,
                "all_converged": bool,
                "outputs": {name: path},
                "segments": [...],
                "config": {...},
                "timings": {...},
                "metrics": {...},
                "error": str (on failure)
            }
        """
        timings: Dict[str, float] = {}
        try:
            is_valid, errors = self.validator.validate_paths(inputs)
            if not is_valid:
                return {"success": False, "error": "; ".join(errors), "errors": errors}

            start = time.perf_counter()
            volumes, metas = self.load_inputs(inputs)
            timings["read_seconds"] = time.perf_counter() - start

            is_valid, errors = self.validator.validate_stack(volumes, metas, segment_length, transform)
            if not is_valid:
                return {"success": False, "error": "; ".join(errors), "errors": errors}

            normalized, offset, scale = normalize_joint(volumes)
            n_vol = len(volumes)
            d = volumes[0].n3
            k = min(segment_length, d)
            plan = plan_segments(d, k)
            cfg = self.build_config(transform, n_vol * plan.segments[0].padded_length, lambda_, max_iters)

            start = time.perf_counter()
            result = ms_lrtd(normalized, k, cfg, workers=self.workers, global_lambda=global_lambda)
            timings["decompose_seconds"] = time.perf_counter() - start
            timings["mean_segment_solve_seconds"] = result.mean_solve_seconds

            start = time.perf_counter()
            outputs = self._save_outputs(inputs, metas, result.low_rank_volumes, result.sparse_volumes, offset, scale)
            timings["write_seconds"] = time.perf_counter() - start

            metrics: Dict[str, Any] = {}
            if truth_masks:
                metrics.update(self._score_supports(result.sparse_volumes, metas, truth_masks, support_threshold))

            lambdas = sorted({s["lambda"] for s in result.per_segment})
            config = {
                "transform": cfg.transform.kind.label,
                "segment_length": k,
                "lambda": lambdas[0] if len(lambdas) == 1 else lambdas,
                "global_lambda": global_lambda,
                "mu0": cfg.mu0,
                "mu_max": cfg.mu_max,
                "rho": cfg.rho,
                "eps": cfg.eps,
                "max_iters": cfg.max_iters,
                "workers": self.workers,
                "intensity_offset": offset,
                "intensity_scale": scale,
            }

            if result.all_converged:
                logger.info(f"Decomposition of {n_vol} volume(s) completed successfully")
            else:
                logger.warning("Decomposition completed with non-converged segments")

            return {
                "success": True,
                "all_converged": result.all_converged,
                "outputs": outputs,
                "segments": result.per_segment,
                "config": config,
                "timings": timings,
                "metrics": metrics,
            }

        except (LrtdError, ValueError, OSError) as e:
            logger.error(f"Decomposition failed: {str(e)}", exc_info=True)
            return {"success": False, "error": str(e)}

    def _save_outputs(
        self,
        inputs: Sequence[str],
        metas: Sequence[VolumeMeta],
        low_rank: List[Tensor3],
        sparse: List[Tensor3],
        offset: float,
        scale: float,
    ) -> Dict[str, str]:
        """
        Save <name>.lowrank and <name>.sparse volume pairs in input intensity units.

        Returns:
            Output name -> header path
        """
        outputs = {}
        for path, meta, low, sp in zip(inputs, metas, low_rank, sparse):
            stem = volume_stem(path)
            out_meta = VolumeMeta(meta.dims, meta.spacing)
            low_path = write_volume(
                self.output_dir / f"{stem}.lowrank.mhd", denormalize(low, offset, scale), out_meta
            )
            sparse_path = write_volume(
                self.output_dir / f"{stem}.sparse.mhd", denormalize(sp, 0.0, scale), out_meta
            )
            outputs[f"{stem}.lowrank"] = str(low_path)
            outputs[f"{stem}.sparse"] = str(sparse_path)
        return outputs

    def _score_supports(
        self,
        sparse: List[Tensor3],
        metas: Sequence[VolumeMeta],
        truth_masks: Sequence[str],
        threshold: float,
    ) -> Dict[str, Any]:
        if len(truth_masks) != len(sparse):
            raise ValueError(f"Got {len(truth_masks)} truth masks for {len(sparse)} volumes")
        dices, jaccards = [], []
        for sp, meta, mask_path in zip(sparse, metas, truth_masks):
            truth = read_label(mask_path)
            support = sparse_support_mask(sp, threshold, meta.spacing)
            dices.append(dice(support, truth))
            jaccards.append(jaccard(support, truth))
        mean_dice = sum(dices) / len(dices)
        logger.info(f"Sparse support Dice vs truth masks: mean {mean_dice:.2f}%")
        return {
            "support_threshold": threshold,
            "support_dice": dices,
            "support_jaccard": jaccards,
            "mean_support_dice": mean_dice,
        }
