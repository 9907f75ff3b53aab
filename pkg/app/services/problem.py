"""One pure-state preparation problem: fixed system, controls, grid, objective and initial state."""

import logging
from typing import Callable, Optional

import numpy as np

from app.exceptions import DimensionError
from app.models.control import ControlParameterization
from app.models.results import CostBreakdown
from app.models.run import ObjectiveSpec, PropagationGrid
from app.models.system import CompositeSystem
from app.services.dynamics import Propagator, vec
from app.services.objective import objective_observable, penalty_weights, tikhonov
from app.services.operators import to_dense

logger = logging.getLogger(__name__)


class ControlProblem:
    """Discrete total cost as a function of the control vector alpha.

    The cost is Re(sum_n g_n^T x_n) + gamma1 |alpha|^2 on the forward IMR states x_n,
    where g_n = c (delta_{n,N_T} + gamma2 omega_n w(t_n)) and c = vec(N^T).
    `weight` multiplies the whole cost.
    """

    def __init__(self, system: CompositeSystem, controls: ControlParameterization, grid: PropagationGrid,
                 spec: ObjectiveSpec, rho0: np.ndarray, couple_controls: bool = True, weight: float = 1.0,
                 propagator: Optional[Propagator] = None):
        rho0 = np.asarray(rho0, dtype=complex)
        if rho0.shape != (system.dim, system.dim):
            raise DimensionError(f"Initial state has shape {rho0.shape}, expected {(system.dim, system.dim)}")
        self.system = system
        self.controls = controls
        self.grid = grid
        self.spec = spec
        self.weight = weight
        self.propagator = propagator or Propagator(system, controls, grid, couple_controls=couple_controls)
        self.observable = objective_observable(spec, system.dim)
        self.contraction = vec(to_dense(self.observable).T)
        self.penalty = spec.gamma2 * penalty_weights(grid, spec.penalty_width)
        self.x0 = vec(rho0)

    @property
    def size(self) -> int:
        return self.controls.size

    def step_weights(self) -> np.ndarray:
        """Coefficient of J(x_n) in the cost, for n = 0..N_T."""
        weights = self.penalty.copy()
        weights[-1] += 1.0
        return weights

    def forward(self, alpha: np.ndarray,
                observer: Optional[Callable[[int, np.ndarray], None]] = None) -> CostBreakdown:
        samples = np.zeros(self.grid.steps + 1)

        def record(n: int, x: np.ndarray) -> None:
            samples[n] = float(np.real(self.contraction @ x))
            if observer is not None:
                observer(n, x)

        self.propagator.run(alpha, self.x0, observer=record)
        cost = CostBreakdown(
            final_cost=samples[-1],
            tikhonov=tikhonov(alpha, self.spec.gamma1),
            penalty=float(np.dot(self.penalty, samples)),
        )
        return cost.scaled(self.weight) if self.weight != 1.0 else cost

    def cost(self, alpha: np.ndarray) -> CostBreakdown:
        return self.forward(np.asarray(alpha, dtype=float))
