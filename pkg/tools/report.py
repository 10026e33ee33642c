"""
Run Report

Machine-readable record of one CLI invocation, written as JSON. The key set
is fixed and versioned by ``report_version``.
"""

import csv
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

REPORT_VERSION = "1.0.0"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunReport(BaseModel):
    """
    Report of one command run.

    Attributes:
        command: Command echo (sub-command name and argv)
        config: Resolved configuration (no "auto" placeholders)
        segments: Per-segment solver summaries and residual traces
        timings: Wall-clock seconds per phase
        outputs: Output name -> file path
        metrics: Scalar metrics
        tables: Named tables, each a list of row dicts
    """

    model_config = ConfigDict(extra="forbid")

    report_version: str = REPORT_VERSION
    command: Dict[str, Any] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict)
    segments: List[Dict[str, Any]] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    created_at: str = Field(default_factory=_now)

    def add_output(self, name: str, path: Union[str, Path]) -> None:
        self.outputs[name] = str(path)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Saved run report: {path}")
        return path


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    """Write a table as CSV with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Saved table: {path} ({len(rows)} rows)")
    return path
