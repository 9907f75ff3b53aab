from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


class CostBreakdown(BaseModel):
    model_config = ConfigDict(frozen=True)

    final_cost: float
    tikhonov: float = 0.0
    penalty: float = 0.0

    @computed_field
    @property
    def total(self) -> float:
        return self.final_cost + self.tikhonov + self.penalty

    def scaled(self, factor: float) -> "CostBreakdown":
        return CostBreakdown(final_cost=factor * self.final_cost, tikhonov=factor * self.tikhonov,
                             penalty=factor * self.penalty)


class IterationRecord(BaseModel):
    iteration: int
    cost: CostBreakdown
    grad_norm: float
    step: float
    max_amplitudes: List[float] = Field(default_factory=list)


class OptimizationResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    alpha: np.ndarray
    history: List[IterationRecord]
    reason: str


class Trajectory(BaseModel):
    """Observables sampled every `stride` steps, plus the final state."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    stride: int
    times: np.ndarray
    energies: np.ndarray  # (samples, Q)
    entropy: np.ndarray
    integrand: np.ndarray
    final_state: np.ndarray
    step_integrand: Optional[np.ndarray] = None  # J(rho(t_n)) at every step
    states: Optional[List[np.ndarray]] = None

    @model_validator(mode="after")
    def _check_samples(self) -> "Trajectory":
        samples = len(self.times)
        if not (len(self.energies) == len(self.entropy) == len(self.integrand) == samples):
            raise ValueError("sample arrays disagree in length")
        return self


class BasisReport(BaseModel):
    hermitian: bool
    unit_trace: bool
    psd: bool
    independent: bool
    min_singular_value: float = 0.0

    @property
    def ok(self) -> bool:
        return self.hermitian and self.unit_trace and self.psd and self.independent


class GradcheckEntry(BaseModel):
    coord: int
    eps: float
    adjoint: float
    fd: float
    rel_err: float


class GradcheckReport(BaseModel):
    entries: List[GradcheckEntry]  # full eps sweep
    best: Dict[int, GradcheckEntry]  # per coordinate, minimum error over eps

    @property
    def max_error(self) -> float:
        return max((entry.rel_err for entry in self.best.values()), default=0.0)

    def flagged(self, tol: float) -> List[int]:
        return sorted(coord for coord, entry in self.best.items() if entry.rel_err > tol)


class RunSummary(BaseModel):
    command: str
    run_id: str
    termination_reason: Optional[str] = None
    iterations: Optional[int] = None
    final_cost: Optional[CostBreakdown] = None
    average_fidelity: float
    oracle_average_fidelity: Optional[float] = None
    subsystem_fidelities: Dict[str, float]
    target_levels: List[int]
    files: List[str]
