"""
Tensor Principal Component Pursuit (TPCP) Solver

Splits a data tensor x into a low-rank part L and a sparse part E by solving

    min ‖L‖_* + λ‖E‖_1   subject to   x = L + E

with the ADMM iteration:

    L_{k+1} = t-SVT_{1/μ_k}(x − E_k + Y_k/μ_k)
    E_{k+1} = S_{λ/μ_k}(x − L_{k+1} + Y_k/μ_k)
    stop when ‖ΔL‖_∞, ‖ΔE‖_∞ and ‖x − L − E‖_∞ are all < ε
    Y_{k+1} = Y_k + μ_k (x − L_{k+1} − E_{k+1})
    μ_{k+1} = min(ρ μ_k, μ_max)

starting from L = E = Y = 0. ε is absolute; inputs are expected to be
intensity-normalized to [0, 1].
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from algebra.tensor import Dims, Tensor3, l1_norm
from algebra.transforms import TransformSpec
from algebra.tsvd import shrink_array, svt_array, tnn
from errors import NumericError, ShapeError

logger = logging.getLogger(__name__)


def default_lambda(dims: Dims) -> float:
    """λ₀ = 1/√(max(n1, n2)·n3)."""
    n1, n2, n3 = dims
    if min(n1, n2, n3) < 1:
        raise ShapeError(f"Invalid dims for λ₀: {tuple(dims)}")
    return 1.0 / math.sqrt(max(n1, n2) * n3)


class TpcpConfig(BaseModel):
    """
    ADMM hyperparameters.

    ``lambda_`` is either a positive value or "auto", which resolves to
    λ₀ = 1/√(max(n1, n2)·n3) for the tensor being solved.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    transform: TransformSpec
    lambda_: Union[float, Literal["auto"]] = "auto"
    mu0: float = 1e-3
    mu_max: float = 1e10
    rho: float = 1.1
    eps: float = 1e-8
    max_iters: int = 500

    @field_validator("lambda_")
    @classmethod
    def _check_lambda(cls, value):
        if value != "auto" and not value > 0:
            raise ValueError(f"lambda must be > 0 or 'auto', got {value}")
        return value

    @field_validator("mu0", "mu_max", "eps")
    @classmethod
    def _check_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"must be > 0, got {value}")
        return value

    @field_validator("rho")
    @classmethod
    def _check_rho(cls, value: float) -> float:
        if not value > 1:
            raise ValueError(f"rho must be > 1, got {value}")
        return value

    @field_validator("max_iters")
    @classmethod
    def _check_iters(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"max_iters must be >= 1, got {value}")
        return value

    @model_validator(mode="after")
    def _check_mu_range(self) -> "TpcpConfig":
        if self.mu0 > self.mu_max:
            raise ValueError(f"mu0 ({self.mu0}) must not exceed mu_max ({self.mu_max})")
        return self

    @classmethod
    def from_settings(cls, settings, transform: TransformSpec, **overrides) -> "TpcpConfig":
        """Build a config from ``config.settings.Settings`` values plus overrides."""
        values = {
            "transform": transform,
            "mu0": settings.TPCP_MU0,
            "mu_max": settings.TPCP_MU_MAX,
            "rho": settings.TPCP_RHO,
            "eps": settings.TPCP_EPS,
            "max_iters": settings.TPCP_MAX_ITERS,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def resolve_lambda(self, dims: Dims) -> float:
        return default_lambda(dims) if self.lambda_ == "auto" else float(self.lambda_)

    def with_transform(self, transform: TransformSpec) -> "TpcpConfig":
        return self.model_copy(update={"transform": transform})

    def describe(self, dims: Optional[Dims] = None) -> Dict[str, Any]:
        """Plain dict for reports; λ is resolved when dims are given."""
        return {
            "transform": self.transform.kind.label,
            "lambda": self.resolve_lambda(dims) if dims is not None else self.lambda_,
            "mu0": self.mu0,
            "mu_max": self.mu_max,
            "rho": self.rho,
            "eps": self.eps,
            "max_iters": self.max_iters,
        }


class IterationRecord(NamedTuple):
    """Residuals after one ADMM iteration, and the μ used in it."""

    primal_residual: float
    delta_low_rank: float
    delta_sparse: float
    mu: float


@dataclass
class TpcpResult:
    """Solver output."""

    low_rank: Tensor3
    sparse: Tensor3
    iterations: int
    converged: bool
    trace: List[IterationRecord] = field(default_factory=list)
    resolved_lambda: float = 0.0
    elapsed_seconds: float = 0.0
    objective: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.trace[-1].primal_residual if self.trace else 0.0

    def summary(self) -> Dict[str, Any]:
        """Report-friendly dict (no tensors)."""
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "lambda": self.resolved_lambda,
            "final_primal_residual": self.final_residual,
            "final_mu": self.trace[-1].mu if self.trace else None,
            "solve_seconds": self.elapsed_seconds,
            "objective": self.objective,
        }


def objective(t: TransformSpec, low_rank: Tensor3, sparse: Tensor3, lam: float) -> float:
    """TPCP objective ‖L‖_* + λ‖E‖_1."""
    return tnn(t, low_rank) + lam * l1_norm(sparse)


def _inf(arr: np.ndarray) -> float:
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def tpcp_solve(
    x: Tensor3,
    cfg: TpcpConfig,
    workers: int = 1,
    progress: Optional[Callable[[int, IterationRecord], None]] = None,
) -> TpcpResult:
    """
    Run ADMM on x.

    Args:
        x: Real data tensor with x.n3 == cfg.transform.n3
        cfg: Solver configuration
        workers: Threads for the per-slice SVDs inside t-SVT
        progress: Optional callback invoked after every iteration

    Returns:
        TpcpResult; ``converged`` is False when max_iters ran out

    Raises:
        ShapeError: If x.n3 differs from the transform length
        NumericError: If an iterate becomes non-finite
    """
    t = cfg.transform
    if x.n3 != t.n3:
        raise ShapeError(f"Tensor has n3={x.n3}, transform has n3={t.n3}")
    lam = cfg.resolve_lambda(x.dims)

    data = x.data
    low = np.zeros_like(data)
    sparse = np.zeros_like(data)
    mult = np.zeros_like(data)
    mu = cfg.mu0
    trace: List[IterationRecord] = []
    converged = False

    start = time.perf_counter()
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        low_next, _ = svt_array(t, data - sparse + mult / mu, 1.0 / mu, workers)
        sparse_next = shrink_array(data - low_next + mult / mu, lam / mu)
        residual = data - low_next - sparse_next

        record = IterationRecord(
            primal_residual=_inf(residual),
            delta_low_rank=_inf(low_next - low),
            delta_sparse=_inf(sparse_next - sparse),
            mu=mu,
        )
        trace.append(record)
        low, sparse = low_next, sparse_next

        if not all(
            math.isfinite(v) for v in (record.primal_residual, record.delta_low_rank, record.delta_sparse)
        ):
            raise NumericError(f"Non-finite iterate at ADMM iteration {iteration}")

        if progress is not None:
            progress(iteration, record)

        if iteration % 50 == 0:
            logger.debug(
                f"iter {iteration}: primal={record.primal_residual:.3e} "
                f"dL={record.delta_low_rank:.3e} dE={record.delta_sparse:.3e} mu={mu:.3e}"
            )

        if max(record.primal_residual, record.delta_low_rank, record.delta_sparse) < cfg.eps:
            converged = True
            break

        mult = mult + mu * residual
        mu = min(cfg.rho * mu, cfg.mu_max)

    elapsed = time.perf_counter() - start
    if converged:
        logger.info(f"TPCP converged in {iteration} iterations ({elapsed * 1000:.1f} ms, dims={x.dims})")
    else:
        logger.warning(
            f"TPCP did not converge in {cfg.max_iters} iterations "
            f"(primal residual {trace[-1].primal_residual:.3e}, dims={x.dims})"
        )

    return TpcpResult(
        low_rank=Tensor3(low),
        sparse=Tensor3(sparse),
        iterations=iteration,
        converged=converged,
        trace=trace,
        resolved_lambda=lam,
        elapsed_seconds=elapsed,
        objective=lam * float(np.abs(sparse).sum()) + tnn(t, Tensor3(low), workers),
    )
