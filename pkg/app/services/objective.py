"""Target observables and the discrete total cost.

    J(rho)   = Tr(N_m rho),  N_m = diag(|i - m|)   (or U^dag N_m U for a general pure target)
    total    = J(rho(T)) + gamma1 |alpha|^2 + gamma2 sum_n omega_n w(t_n) J(rho(t_n))
    w(t)     = exp(-((t - T)/a)^2) / a,  omega_n the trapezoid weights of the grid
"""

import logging
from typing import Optional

import numpy as np
from scipy import sparse

from app.config import settings
from app.exceptions import DimensionError, InvalidIndexError, StateValidationError
from app.models.control import ControlParameterization
from app.models.results import CostBreakdown
from app.models.run import ObjectiveSpec, PropagationGrid
from app.models.system import CompositeSystem
from app.services.dynamics import Propagator, propagate
from app.services.operators import OperatorMatrix, to_dense

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-10


def target_observable(n: int, m: int) -> OperatorMatrix:
    if not 0 <= m < n:
        raise InvalidIndexError(f"Target index {m} outside dimension {n}", details={"n": n, "m": m})
    weights = np.abs(np.arange(n) - m).astype(complex)
    if n <= settings.dense_operator_max_dim:
        return np.diag(weights)
    return sparse.diags(weights, format="csr")


def transformed_observable(unitary: np.ndarray, m: int) -> np.ndarray:
    """U^dag N_m U; zero expectation only on the pure state U^dag e_m."""
    unitary = np.asarray(unitary, dtype=complex)
    n = unitary.shape[0]
    if unitary.shape != (n, n):
        raise DimensionError(f"Transform must be square, got shape {unitary.shape}")
    defect = np.linalg.norm(unitary.conj().T @ unitary - np.eye(n))
    if defect > UNITARY_TOL:
        raise StateValidationError(f"Transform is not unitary (|U^dag U - I| = {defect:.3e})",
                                   details={"defect": float(defect)})
    return unitary.conj().T @ to_dense(target_observable(n, m)) @ unitary


def objective_observable(spec: ObjectiveSpec, n: int) -> OperatorMatrix:
    """The transformed observable when a unitary is configured, N_m otherwise."""
    if spec.unitary is not None:
        if spec.unitary.shape != (n, n):
            raise DimensionError(f"Transform has shape {spec.unitary.shape}, system dimension is {n}")
        return transformed_observable(spec.unitary, spec.target_index)
    return target_observable(n, spec.target_index)


def final_cost(observable: OperatorMatrix, rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    if observable.shape != rho.shape:
        raise DimensionError(f"Observable {observable.shape} and state {rho.shape} disagree")
    if sparse.issparse(observable):
        value = observable.multiply(rho.T).sum()
    else:
        value = np.sum(observable * rho.T)
    return float(np.real(value))


def tikhonov(alpha: np.ndarray, gamma1: float) -> float:
    return float(gamma1 * np.dot(alpha, alpha))


def penalty_weights(grid: PropagationGrid, width: float) -> np.ndarray:
    """Trapezoid weight times w(t_n) at every grid point."""
    times = grid.times
    gaussian = np.exp(-((times - grid.final_time) / width) ** 2) / width
    return grid.trapezoid_weights() * gaussian


def integral_penalty(samples: np.ndarray, grid: PropagationGrid, gamma2: float, width: float) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.steps + 1,):
        raise DimensionError(f"Expected {grid.steps + 1} penalty samples, got {samples.shape}")
    if gamma2 == 0.0:
        return 0.0
    return float(gamma2 * np.dot(penalty_weights(grid, width), samples))


def total_cost(system: CompositeSystem, controls: ControlParameterization, alpha: np.ndarray,
               rho0: np.ndarray, grid: PropagationGrid, spec: ObjectiveSpec,
               propagator: Optional[Propagator] = None) -> CostBreakdown:
    observable = objective_observable(spec, system.dim)
    trajectory = propagate(system, controls, alpha, rho0, grid, record_stride=grid.steps,
                           observable=observable, propagator=propagator)
    cost = CostBreakdown(
        final_cost=final_cost(observable, trajectory.final_state),
        tikhonov=tikhonov(alpha, spec.gamma1),
        penalty=integral_penalty(trajectory.step_integrand, grid, spec.gamma2, spec.penalty_width),
    )
    logger.debug(f"Total cost {cost.total:.6e} (final {cost.final_cost:.6e})")
    return cost
