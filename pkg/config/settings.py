"""
Settings and Configuration for SliceLRTD

Manages environment variables, the YAML parameter table and system
configuration.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic_settings import BaseSettings

logger = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).parent / "defaults.yaml"


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Execution
    WORKERS: int = 0  # 0 = available cores

    # Decomposition defaults
    DEFAULT_TRANSFORM: str = "dct"
    DEFAULT_SEGMENT_LENGTH: int = 5

    # ADMM constants
    TPCP_MU0: float = 1e-3
    TPCP_MU_MAX: float = 1e10
    TPCP_RHO: float = 1.1
    TPCP_EPS: float = 1e-8
    TPCP_MAX_ITERS: int = 500

    # Metrics
    HISTOGRAM_BINS: int = 256

    # Outputs
    OUTPUT_DIR: str = "./outputs"
    DEFAULTS_FILE: str = str(DEFAULTS_PATH)

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"

    def resolved_workers(self, requested: Optional[int] = None) -> int:
        """Worker count from a CLI value or WORKERS; 0 means all cores."""
        value = self.WORKERS if requested is None else requested
        return value if value > 0 else (os.cpu_count() or 1)


def load_defaults(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load the YAML parameter table.

    Args:
        path: YAML file; the packaged defaults.yaml when omitted

    Returns:
        Parsed mapping (empty if the file is empty)

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the top level is not a mapping
    """
    path = Path(path) if path else DEFAULTS_PATH
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path} must contain a mapping at the top level")
    logger.debug(f"Loaded defaults from {path}")
    return data


def apply_defaults(settings: Settings, defaults: Dict[str, Any]) -> Settings:
    """Overlay the YAML ``tpcp`` / ``decompose`` / ``metrics`` sections onto settings."""
    tpcp = defaults.get("tpcp", {}) or {}
    decompose = defaults.get("decompose", {}) or {}
    metrics = defaults.get("metrics", {}) or {}
    updates = {
        "TPCP_MU0": tpcp.get("mu0"),
        "TPCP_MU_MAX": tpcp.get("mu_max"),
        "TPCP_RHO": tpcp.get("rho"),
        "TPCP_EPS": tpcp.get("eps"),
        "TPCP_MAX_ITERS": tpcp.get("max_iters"),
        "DEFAULT_TRANSFORM": decompose.get("transform"),
        "DEFAULT_SEGMENT_LENGTH": decompose.get("segment_length"),
        "HISTOGRAM_BINS": metrics.get("histogram_bins"),
    }
    return settings.model_copy(update={k: v for k, v in updates.items() if v is not None})


# Global settings instance
settings = Settings()
