"""
Input and Report Validator

Checks decomposition inputs before any solve runs, and checks run reports
against the fixed report schema.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from algebra.tensor import Tensor3
from algebra.transforms import TransformKind
from data.volume_io import VolumeMeta
from tools.report import REPORT_VERSION

logger = logging.getLogger(__name__)


class VolumeValidator:
    """
    Validator for volume stacks and run reports.

    Validates:
    - Input files exist and have a supported extension
    - Volumes share dims
    - Segment length and transform fit the stack
    - Run reports carry every required key
    """

    SUPPORTED_EXTENSIONS = [".mhd", ".mha"]

    REQUIRED_REPORT_FIELDS = [
        "report_version",
        "command",
        "config",
        "segments",
        "timings",
        "outputs",
        "metrics",
        "tables",
        "created_at",
    ]

    def __init__(self):
        """Initialize validator."""
        logger.debug("VolumeValidator initialized")

    def validate_paths(self, paths: Sequence[str]) -> Tuple[bool, List[str]]:
        """
        Validate input volume paths.

        Returns:
            Tuple of (is_valid, error_messages)
        """
        errors = []
        if not paths:
            errors.append("At least one input volume is required")
        for path in paths:
            p = Path(path)
            if p.suffix.lower() not in self.SUPPORTED_EXTENSIONS:
                errors.append(f"Unsupported volume file: {path} (expected {', '.join(self.SUPPORTED_EXTENSIONS)})")
            elif not p.exists():
                errors.append(f"Input volume not found: {path}")
        return len(errors) == 0, errors

    def validate_stack(
        self,
        volumes: Sequence[Tensor3],
        metas: Sequence[VolumeMeta],
        segment_length: int,
        transform: str,
    ) -> Tuple[bool, List[str]]:
        """
        Validate a loaded volume stack against the decomposition settings.

        Args:
            volumes: Loaded volumes
            metas: Their metadata
            segment_length: Requested K
            transform: Transform name

        Returns:
            Tuple of (is_valid, error_messages)
        """
        errors = []

        if segment_length < 2:
            errors.append(f"Segment length must be >= 2, got {segment_length}")

        try:
            kind = TransformKind.parse(transform)
        except ValueError as e:
            errors.append(str(e))
            kind = None
        if kind is TransformKind.CUSTOM:
            errors.append("Custom transforms are library-only; use dct, fft or dwt4")

        if volumes:
            dims = volumes[0].dims
            for idx, vol in enumerate(volumes[1:], start=1):
                if vol.dims != dims:
                    errors.append(f"Volume {idx} has dims {vol.dims}, volume 0 has {dims}")
            if dims[2] < 2:
                errors.append(f"Volumes need at least 2 slices, got {dims[2]}")
        else:
            errors.append("No volumes loaded")

        spacings = {tuple(m.spacing) for m in metas}
        if len(spacings) > 1:
            logger.warning(f"Input volumes have differing spacing: {sorted(spacings)}")

        is_valid = len(errors) == 0
        if is_valid:
            logger.info(f"Input validation passed ({len(volumes)} volume(s) of {volumes[0].dims})")
        else:
            logger.warning(f"Input validation failed with {len(errors)} errors")
        return is_valid, errors

    def validate_report(self, report: Dict[str, Any]) -> Tuple[bool, List[str]]:
        """
        Validate a run report dict.

        Returns:
            Tuple of (is_valid, error_messages)
        """
        errors = []
        for field in self.REQUIRED_REPORT_FIELDS:
            if field not in report:
                errors.append(f"Missing required field: {field}")
        extra = set(report) - set(self.REQUIRED_REPORT_FIELDS)
        if extra:
            errors.append(f"Unexpected fields: {sorted(extra)}")

        if report.get("report_version") != REPORT_VERSION:
            errors.append(
                f"Invalid report_version: {report.get('report_version')} (expected {REPORT_VERSION})"
            )

        config = report.get("config", {})
        if isinstance(config, dict):
            for key, value in config.items():
                if value == "auto":
                    errors.append(f"Config value '{key}' left unresolved")
        else:
            errors.append("'config' must be an object")

        outputs = report.get("outputs", {})
        if isinstance(outputs, dict):
            for name, path in outputs.items():
                if not Path(path).exists():
                    errors.append(f"Reported output {name} does not exist: {path}")
        else:
            errors.append("'outputs' must be an object")

        return len(errors) == 0, errors
