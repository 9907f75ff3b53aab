from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class ControlChannel(BaseModel):
    """B-spline envelopes times carrier waves driving one subsystem."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_splines: int = Field(..., ge=3)
    carrier_freqs: List[float] = Field(..., min_length=1)  # rotating frame, rad/us

    @property
    def num_carriers(self) -> int:
        return len(self.carrier_freqs)

    @property
    def size(self) -> int:
        return 2 * self.num_splines * self.num_carriers


class ControlParameterization(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    channels: List[ControlChannel] = Field(..., min_length=1)
    final_time: float = Field(..., gt=0)

    def channel(self, q: int) -> ControlChannel:
        return self.channels[q - 1]

    def knot_spacing(self, q: int) -> float:
        return self.final_time / (self.channel(q).num_splines - 2)

    def centers(self, q: int) -> np.ndarray:
        spacing = self.knot_spacing(q)
        return spacing * (np.arange(self.channel(q).num_splines) - 0.5)

    @property
    def size(self) -> int:
        return sum(channel.size for channel in self.channels)

    def offsets(self) -> List[int]:
        offsets = [0]
        for channel in self.channels:
            offsets.append(offsets[-1] + channel.size)
        return offsets

    def block(self, alpha: np.ndarray, q: int) -> np.ndarray:
        """View of subsystem q's coefficients with shape (num_splines, num_carriers, 2)."""
        offsets = self.offsets()
        channel = self.channel(q)
        return alpha[offsets[q - 1]:offsets[q]].reshape(channel.num_splines, channel.num_carriers, 2)

    def complex_block(self, alpha: np.ndarray, q: int) -> np.ndarray:
        block = self.block(alpha, q)
        return block[..., 0] + 1j * block[..., 1]
