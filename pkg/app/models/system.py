import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

TWO_PI = 2.0 * math.pi


class SubsystemSpec(BaseModel):
    """One qudit or cavity. Frequencies are given as /2pi values, times in microseconds."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    levels: int = Field(..., ge=2)
    freq_ghz: float
    selfkerr_mhz: float = 0.0
    t1_us: Optional[float] = None  # None means infinite
    t2_us: Optional[float] = None

    @field_validator("t1_us", "t2_us")
    @classmethod
    def _positive_when_finite(cls, value: Optional[float]) -> Optional[float]:
        if value is None or math.isinf(value):
            return None
        if value <= 0:
            raise ValueError("decoherence time must be positive when given")
        return value

    @property
    def omega(self) -> float:
        """Transition frequency in rad/us."""
        return TWO_PI * 1e3 * self.freq_ghz

    @property
    def xi(self) -> float:
        """Self-Kerr coefficient in rad/us."""
        return TWO_PI * self.selfkerr_mhz


class CompositeSystem(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    subsystems: List[SubsystemSpec] = Field(..., min_length=1)
    # keys (p, q) with p > q, 1-based; values are xi_pq/2pi in MHz
    crosskerr_mhz: Dict[Tuple[int, int], float] = Field(default_factory=dict)

    @field_validator("crosskerr_mhz")
    @classmethod
    def _check_crosskerr(cls, value: Dict[Tuple[int, int], float],
                         info: ValidationInfo) -> Dict[Tuple[int, int], float]:
        count = len(info.data.get("subsystems", []))
        normalized: Dict[Tuple[int, int], float] = {}
        for (p, q), coefficient in value.items():
            if not (1 <= p <= count and 1 <= q <= count) or p == q:
                raise ValueError(f"cross-Kerr pair ({p},{q}) references an invalid subsystem pair")
            key = (max(p, q), min(p, q))
            if key in normalized and normalized[key] != coefficient:
                raise ValueError(f"cross-Kerr pair ({p},{q}) given twice with different values")
            normalized[key] = coefficient
        return normalized

    @property
    def dims(self) -> List[int]:
        return [sub.levels for sub in self.subsystems]

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def count(self) -> int:
        return len(self.subsystems)

    def crosskerr(self, p: int, q: int) -> float:
        """Cross-Kerr coefficient between subsystems p and q in rad/us."""
        return TWO_PI * self.crosskerr_mhz.get((max(p, q), min(p, q)), 0.0)
