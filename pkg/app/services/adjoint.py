"""Exact gradient of the discrete cost through the IMR scheme, and a central-difference check.

Forward step n:  A_n x_{n+1} = B_n x_n,  A_n = I - h/2 L_n,  B_n = I + h/2 L_n.
Backward sweep:  p_{N_T} = g_{N_T};  q = A_n^{-T} p_{n+1};  p_n = g_n + q + h/2 L_n^T q.
Step sensitivity to a real control coordinate theta:  Re(h/2 q^T dL_n/dtheta (x_n + x_{n+1})).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.exceptions import AdjointSolveError, PropagationError
from app.models.control import ControlParameterization
from app.models.results import CostBreakdown, GradcheckEntry, GradcheckReport
from app.models.run import ObjectiveSpec, PropagationGrid
from app.models.system import CompositeSystem
from app.services.problem import ControlProblem

logger = logging.getLogger(__name__)

DEFAULT_EPS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7)


class CheckpointStore:
    """Forward states for the backward sweep.

    Every state is kept when they fit in the memory budget; otherwise every k-th state is kept
    and the segment in between is recomputed from its checkpoint on first access.
    """

    def __init__(self, problem: ControlProblem, d: np.ndarray, budget_gib: Optional[float] = None,
                 stride: Optional[int] = None):
        self.problem = problem
        self.d = d
        steps = problem.grid.steps
        if stride is None:
            budget = (budget_gib if budget_gib is not None else settings.memory_budget_gib) * 2 ** 30
            needed = problem.x0.shape[0] * (steps + 1) * 16
            stride = 1 if needed <= budget else math.ceil(needed / budget)
        self.stride = max(1, min(int(stride), steps))
        self._checkpoints: Dict[int, np.ndarray] = {}
        self._segment_start: Optional[int] = None
        self._segment: List[np.ndarray] = []
        logger.debug(f"Checkpoint stride {self.stride} over {steps} steps")

    def record(self, n: int, x: np.ndarray) -> None:
        if n % self.stride == 0 or n == self.problem.grid.steps:
            self._checkpoints[n] = x

    def state(self, n: int) -> np.ndarray:
        if n in self._checkpoints:
            return self._checkpoints[n]
        start = (n // self.stride) * self.stride
        if self._segment_start != start:
            end = min(start + self.stride, self.problem.grid.steps)
            self._segment = self.problem.propagator.replay(self.d, self._checkpoints[start], start, end)
            self._segment_start = start
        return self._segment[n - start]

    def __len__(self) -> int:
        return len(self._checkpoints)


def cost_and_gradient(problem: ControlProblem, alpha: np.ndarray,
                      stride: Optional[int] = None) -> Tuple[CostBreakdown, np.ndarray]:
    alpha = np.asarray(alpha, dtype=float)
    propagator = problem.propagator
    grid = problem.grid
    half = 0.5 * grid.dt
    d = propagator.midpoint_controls(alpha)

    store = CheckpointStore(problem, d, stride=stride)
    cost = problem.forward(alpha, observer=store.record)

    weights = problem.step_weights()
    contraction = problem.contraction
    control_ops = propagator.generator.control_matrices()
    sensitivities = np.zeros((len(control_ops), grid.steps))

    p = weights[-1] * contraction
    x_next = store.state(grid.steps)
    for n in range(grid.steps - 1, -1, -1):
        x_n = store.state(n)
        generator, solver = propagator.operators(n, d)
        try:
            q = solver.solve(p, transpose=True)
        except PropagationError as e:
            raise AdjointSolveError(f"Backward solve failed at step {n}: {e.message}", details=e.details)
        v = x_n + x_next
        for k, op in enumerate(control_ops):
            sensitivities[k, n] = half * np.real(q @ (op @ v))
        p = weights[n] * contraction + q + half * (generator.T @ q)
        x_next = x_n

    grad = np.zeros(problem.size)
    offsets = problem.controls.offsets()
    for index, design in enumerate(propagator.designs):
        u_re, u_im = sensitivities[2 * index], sensitivities[2 * index + 1]
        d_re = np.einsum("tsn,t->sn", design.real, u_re) + np.einsum("tsn,t->sn", design.imag, u_im)
        d_im = np.einsum("tsn,t->sn", design.real, u_im) - np.einsum("tsn,t->sn", design.imag, u_re)
        grad[offsets[index]:offsets[index + 1]] = np.stack([d_re, d_im], axis=-1).ravel()

    grad += 2.0 * problem.spec.gamma1 * alpha
    grad *= problem.weight
    if not np.all(np.isfinite(grad)):
        raise AdjointSolveError("Gradient has non-finite entries")
    return cost, grad


def gradient(system: CompositeSystem, controls: ControlParameterization, alpha: np.ndarray, rho0: np.ndarray,
             grid: PropagationGrid, spec: ObjectiveSpec) -> Tuple[CostBreakdown, np.ndarray]:
    return cost_and_gradient(ControlProblem(system, controls, grid, spec, rho0), alpha)


def _central_difference(problem: ControlProblem, alpha: np.ndarray, coord: int, eps: float) -> float:
    shift = np.zeros_like(alpha)
    shift[coord] = eps
    plus = problem.cost(alpha + shift).total
    minus = problem.cost(alpha - shift).total
    return (plus - minus) / (2.0 * eps)


def fd_check(problem: ControlProblem, alpha: np.ndarray, coords: Sequence[int],
             eps_list: Sequence[float] = DEFAULT_EPS, adjoint: Optional[np.ndarray] = None) -> GradcheckReport:
    """Relative error of the adjoint gradient against central differences, per coordinate and step."""
    alpha = np.asarray(alpha, dtype=float)
    if adjoint is None:
        _, adjoint = cost_and_gradient(problem, alpha)
    # absolute floor for coordinates whose derivative vanishes
    floor = 1e-8 * max(float(np.max(np.abs(adjoint))), 1e-300)

    jobs = [(coord, eps) for coord in coords for eps in eps_list]
    with ThreadPoolExecutor(max_workers=max(settings.threads, 1)) as pool:
        values = list(pool.map(lambda job: _central_difference(problem, alpha, *job), jobs))

    entries = []
    for (coord, eps), fd in zip(jobs, values):
        exact = float(adjoint[coord])
        scale = max(abs(exact), abs(fd), floor)
        entries.append(GradcheckEntry(coord=coord, eps=eps, adjoint=exact, fd=fd, rel_err=abs(exact - fd) / scale))

    best: Dict[int, GradcheckEntry] = {}
    for entry in entries:
        if entry.coord not in best or entry.rel_err < best[entry.coord].rel_err:
            best[entry.coord] = entry
    report = GradcheckReport(entries=entries, best=best)
    logger.info(f"Gradient check over {len(coords)} coordinates: max relative error {report.max_error:.3e}")
    return report


def sample_coordinates(size: int, count: int, seed: int = 0) -> List[int]:
    rng = np.random.default_rng(seed)
    count = min(count, size)
    return sorted(int(c) for c in rng.choice(size, size=count, replace=False))
