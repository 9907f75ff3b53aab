from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.system import CompositeSystem


class PropagationGrid(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    final_time: float = Field(..., gt=0)  # us
    steps: int = Field(..., ge=1)

    @property
    def dt(self) -> float:
        return self.final_time / self.steps

    @property
    def times(self) -> np.ndarray:
        # linspace pins the last point to final_time exactly
        return np.linspace(0.0, self.final_time, self.steps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        times = self.times
        return 0.5 * (times[:-1] + times[1:])

    def trapezoid_weights(self) -> np.ndarray:
        weights = np.full(self.steps + 1, self.dt)
        weights[0] = weights[-1] = 0.5 * self.dt
        return weights


class ObjectiveSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    target_index: int = Field(0, ge=0)
    unitary: Optional[np.ndarray] = None
    gamma1: float = Field(0.0, ge=0)
    gamma2: float = Field(0.0, ge=0)
    penalty_width: float = Field(0.1, gt=0)  # us


class OptimizerOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iters: int = Field(100, ge=0)
    lbfgs_memory: int = Field(10, ge=1)
    grad_tol: float = Field(1e-2, gt=0)  # relative to the initial projected gradient norm
    cost_tol: float = Field(1e-6, gt=0)
    armijo_c1: float = Field(1e-4, gt=0, lt=1)
    backtrack: float = Field(0.5, gt=0, lt=1)
    max_trials: int = Field(30, ge=1)
    init_amplitude_scale: Optional[float] = Field(None, ge=0)  # MHz; None -> 0.25 x coefficient bound
    seed: int = 0


class InitialStateMode(str, Enum):
    FULL_ENSEMBLE = "full-ensemble"
    PARTIAL_ENSEMBLE = "partial-ensemble"
    FILE = "file"


class ControlSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_splines: int = Field(..., ge=3)
    carrier_freqs_mhz: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    lab_amp_bound_mhz: Optional[float] = Field(None, gt=0)  # None means unbounded


class TargetSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    index: int = Field(0, ge=0)
    unitary_file: Optional[str] = None
    initial_state: InitialStateMode = InitialStateMode.FULL_ENSEMBLE
    basis_subsystems: List[int] = Field(default_factory=list)
    state_file: Optional[str] = None

    @model_validator(mode="after")
    def _check_mode(self) -> "TargetSection":
        if self.initial_state is InitialStateMode.PARTIAL_ENSEMBLE and not self.basis_subsystems:
            raise ValueError("partial-ensemble requires basis_subsystems")
        if self.initial_state is InitialStateMode.FILE and not self.state_file:
            raise ValueError("initial_state = file requires state_file")
        return self


class ObjectiveSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma1: float = Field(0.0, ge=0)
    gamma2: float = Field(0.0, ge=0)
    penalty_width_us: float = Field(0.1, gt=0)


class OutputSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: str = "out"
    stride: int = Field(10, ge=1)
    sample_rate_ghz: Optional[float] = Field(None, gt=0)  # None -> 4x highest lab carrier
    oracle_fidelity: bool = False
    pure_state_trajectories: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    system: CompositeSystem
    controls: List[ControlSection]
    grid: PropagationGrid
    target: TargetSection = TargetSection()
    objective: ObjectiveSection = ObjectiveSection()
    optimizer: OptimizerOptions = OptimizerOptions()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _check_dimensions(self) -> "RunConfig":
        count = self.system.count
        if len(self.controls) != count:
            raise ValueError(f"expected {count} control sections, got {len(self.controls)}")
        if self.target.index >= self.system.dim:
            raise ValueError(f"target index {self.target.index} outside dimension {self.system.dim}")
        for q in self.target.basis_subsystems:
            if not 1 <= q <= count:
                raise ValueError(f"basis subsystem {q} outside 1..{count}")
        if len(set(self.target.basis_subsystems)) != len(self.target.basis_subsystems):
            raise ValueError("basis_subsystems lists a subsystem twice")
        return self
