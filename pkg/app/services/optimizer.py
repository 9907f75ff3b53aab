"""Box-constrained L-BFGS with a projected backtracking line search."""

import logging
from collections import deque
from typing import Callable, Deque, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.control import ControlParameterization
from app.models.results import CostBreakdown, IterationRecord, OptimizationResult
from app.models.run import OptimizerOptions
from app.services.adjoint import cost_and_gradient
from app.services.problem import ControlProblem

logger = logging.getLogger(__name__)

CURVATURE_TOL = 1e-12
DEFAULT_SCALE_FRACTION = 0.25
UNBOUNDED_SCALE = 2.0 * np.pi * 0.25  # rad/us, used when a subsystem has no amplitude bound

Objective = Callable[[np.ndarray], Tuple[CostBreakdown, np.ndarray]]
CostFunction = Callable[[np.ndarray], CostBreakdown]


def coefficient_bounds(param: ControlParameterization,
                       lab_amp_bounds: Sequence[Optional[float]]) -> Tuple[np.ndarray, np.ndarray]:
    """Box |alpha part| <= bound / (2 sqrt(2) N_f) per subsystem; None leaves a subsystem unbounded.

    With partition-of-unity envelopes this keeps max_t |f^q(t)| <= bound.
    """
    upper = np.full(param.size, np.inf)
    offsets = param.offsets()
    for q, (channel, bound) in enumerate(zip(param.channels, lab_amp_bounds), start=1):
        if bound is not None:
            upper[offsets[q - 1]:offsets[q]] = bound / (2.0 * np.sqrt(2.0) * channel.num_carriers)
    return -upper, upper


def default_amplitude_scale(upper: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(upper), DEFAULT_SCALE_FRACTION * upper, UNBOUNDED_SCALE)


def initial_guess(param: ControlParameterization, amplitude_scale: Union[float, np.ndarray],
                  seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    scale = np.broadcast_to(np.asarray(amplitude_scale, dtype=float), (param.size,))
    if np.any(scale < 0):
        raise ValueError("amplitude scale must be nonnegative")
    return rng.uniform(-1.0, 1.0, size=param.size) * scale


def project(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.clip(x, lower, upper)


def projected_gradient(x: np.ndarray, g: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return x - project(x - g, lower, upper)


def _two_loop(g: np.ndarray, pairs: Deque[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Inverse-Hessian approximation applied to g."""
    r = g.copy()
    stack = []
    for s, y in reversed(pairs):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, r)
        r -= a * y
        stack.append((s, y, rho, a))
    if pairs:
        s, y = pairs[-1]
        r *= np.dot(s, y) / np.dot(y, y)
    for s, y, rho, a in reversed(stack):
        b = rho * np.dot(y, r)
        r += (a - b) * s
    return r


class LineSearchResult:
    def __init__(self, x: np.ndarray, cost: CostBreakdown, step: float):
        self.x = x
        self.cost = cost
        self.step = step


def _projected_armijo(cost_fn: CostFunction, x: np.ndarray, cost: CostBreakdown, g: np.ndarray,
                      direction: np.ndarray, t0: float, lower: np.ndarray, upper: np.ndarray,
                      opts: OptimizerOptions) -> Optional[LineSearchResult]:
    """Backtracking on cost values only; the caller differentiates the accepted point."""
    t = t0
    for _ in range(opts.max_trials):
        trial = project(x + t * direction, lower, upper)
        moved = trial - x
        if np.any(moved):
            decrease = min(float(np.dot(g, moved)), 0.0)
            trial_cost = cost_fn(trial)
            if trial_cost.total <= cost.total + opts.armijo_c1 * decrease:
                return LineSearchResult(trial, trial_cost, t)
        t *= opts.backtrack
    return None


def minimize(problem: Union[ControlProblem, Objective], alpha0: np.ndarray, opts: OptimizerOptions,
             lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None,
             amplitude_fn: Optional[Callable[[np.ndarray], List[float]]] = None,
             cost_fn: Optional[CostFunction] = None) -> OptimizationResult:
    """Minimize the cost from alpha0; returns the last (best) accepted iterate and the history.

    Line-search trials are judged with cost_fn alone (a forward sweep for a ControlProblem);
    the gradient is evaluated once per accepted iterate.
    """
    if isinstance(problem, ControlProblem):
        fun: Objective = lambda alpha: cost_and_gradient(problem, alpha)
        cost_fn = cost_fn or problem.cost
    else:
        fun = problem
        cost_fn = cost_fn or (lambda alpha: problem(alpha)[0])
    alpha0 = np.asarray(alpha0, dtype=float)
    lower = np.full(alpha0.shape, -np.inf) if lower is None else lower
    upper = np.full(alpha0.shape, np.inf) if upper is None else upper

    x = project(alpha0, lower, upper)
    cost, g = fun(x)
    pg_norm = float(np.linalg.norm(projected_gradient(x, g, lower, upper)))
    initial_norm = pg_norm
    pairs: Deque[Tuple[np.ndarray, np.ndarray]] = deque(maxlen=opts.lbfgs_memory)

    def record(iteration: int, step: float) -> IterationRecord:
        amplitudes = amplitude_fn(x) if amplitude_fn is not None else []
        entry = IterationRecord(iteration=iteration, cost=cost, grad_norm=pg_norm, step=step,
                                max_amplitudes=amplitudes)
        logger.info(f"iter {iteration}: cost={cost.total:.6e} (final {cost.final_cost:.6e}) "
                    f"|pg|={pg_norm:.3e} step={step:.3e}")
        return entry

    history = [record(0, 0.0)]
    iteration = 0
    while True:
        if cost.total <= opts.cost_tol:
            reason = "cost_tol"
            break
        if pg_norm <= opts.grad_tol * initial_norm:
            reason = "grad_tol"
            break
        if iteration >= opts.max_iters:
            reason = "max_iters"
            break

        result = None
        if pairs:
            direction = -_two_loop(g, pairs)
            if np.dot(direction, g) < 0:
                result = _projected_armijo(cost_fn, x, cost, g, direction, 1.0, lower, upper, opts)
        if result is None:
            # steepest descent restart
            pairs.clear()
            t0 = min(1.0, 1.0 / max(float(np.linalg.norm(g)), 1e-300))
            result = _projected_armijo(cost_fn, x, cost, g, -g, t0, lower, upper, opts)
        if result is None:
            reason = "line_search_failed"
            break

        new_cost, new_g = fun(result.x)
        s, y = result.x - x, new_g - g
        if np.dot(s, y) > CURVATURE_TOL * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y))
        x, cost, g = result.x, new_cost, new_g
        pg_norm = float(np.linalg.norm(projected_gradient(x, g, lower, upper)))
        iteration += 1
        history.append(record(iteration, result.step))

    logger.info(f"Optimization stopped after {iteration} iterations: {reason}")
    return OptimizationResult(alpha=x, history=history, reason=reason)
