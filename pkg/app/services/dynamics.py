"""Vectorized Lindblad dynamics in the rotating frame, advanced with the implicit midpoint rule.

Vectorization stacks columns: vec(A X B) = (B^T kron A) vec(X), so
    -i[H, rho]            ->  -i (I kron H - H^T kron I)
    L rho L^dag           ->  conj(L) kron L
    -(L^dag L rho + rho L^dag L)/2  ->  -(I kron L^dag L + (L^dag L)^T kron I)/2
The rotating-wave control Hamiltonian is d a^dag + conj(d) a = Re(d) (a + a^dag) + Im(d) i(a^dag - a).
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg
from scipy.special import xlogy

from app.config import settings
from app.exceptions import DimensionError, InvalidIndexError, PropagationError
from app.models.control import ControlParameterization
from app.models.results import Trajectory
from app.models.run import PropagationGrid
from app.models.system import CompositeSystem
from app.services.controls import carrier_design, stack_controls
from app.services.operators import (
    OperatorMatrix, collapse_sparse, drift_hamiltonian, lowering_sparse, number_sparse, to_dense, to_sparse,
)

logger = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-8


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(x: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(x.shape[0])))
    return x.reshape(n, n, order="F")


def commutator_superoperator(hamiltonian: sparse.spmatrix) -> sparse.csc_matrix:
    n = hamiltonian.shape[0]
    identity = sparse.identity(n, dtype=complex, format="csc")
    return (-1j * (sparse.kron(identity, hamiltonian) - sparse.kron(hamiltonian.T, identity))).tocsc()


def dissipator_superoperator(collapse: Sequence[sparse.spmatrix], n: int) -> sparse.csc_matrix:
    identity = sparse.identity(n, dtype=complex, format="csc")
    total = sparse.csc_matrix((n * n, n * n), dtype=complex)
    for op in collapse:
        op = sparse.csc_matrix(op, dtype=complex)
        product = (op.conj().T @ op).tocsc()
        total = total + sparse.kron(op.conj(), op) \
            - 0.5 * sparse.kron(identity, product) - 0.5 * sparse.kron(product.T, identity)
    return total.tocsc()


class Superoperator:
    """Linear map on vectorized density matrices."""

    def __init__(self, matrix: sparse.spmatrix):
        self.matrix = sparse.csc_matrix(matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))


class LindbladGenerator:
    """Constant part plus control parts, all stored on one shared sparsity pattern.

    Generator data at control values d_q is  constant + sum_q (Re d_q K_q^re + Im d_q K_q^im),
    so assembling the per-step matrix is a dense axpy over the stored entries.
    """

    def __init__(self, system: CompositeSystem, couple_controls: bool = True):
        self.system = system
        n = system.dim
        self.dim = n * n

        drift = to_sparse(drift_hamiltonian(system, "rotating"))
        constant = commutator_superoperator(drift) + dissipator_superoperator(collapse_sparse(system), n)

        parts = []
        for q in range(1, system.count + 1):
            lowering = lowering_sparse(system, q)
            raising = lowering.conj().T
            parts.append(commutator_superoperator(lowering + raising))
            parts.append(commutator_superoperator(1j * (raising - lowering)))

        identity = sparse.identity(self.dim, dtype=complex, format="csc")
        pattern = abs(identity) + abs(constant)
        for part in parts:
            pattern = pattern + abs(part)
        pattern = sparse.csc_matrix(pattern)
        pattern.sum_duplicates()
        pattern.sort_indices()

        self._indices = pattern.indices
        self._indptr = pattern.indptr
        columns = np.repeat(np.arange(self.dim), np.diff(pattern.indptr))
        self._keys = columns.astype(np.int64) * self.dim + pattern.indices

        self.identity_data = self._align(identity)
        self.constant_data = self._align(constant)
        if couple_controls:
            self.control_data = np.array([self._align(part) for part in parts])
        else:
            self.control_data = np.zeros((len(parts), len(self._keys)), dtype=complex)
        logger.debug(f"Lindblad generator: N^2={self.dim}, nnz={len(self._keys)}, controls={len(parts)}")

    def _align(self, mat: sparse.spmatrix) -> np.ndarray:
        coo = sparse.coo_matrix(mat)
        coo.sum_duplicates()
        keep = coo.data != 0
        keys = coo.col[keep].astype(np.int64) * self.dim + coo.row[keep]
        positions = np.searchsorted(self._keys, keys)
        data = np.zeros(len(self._keys), dtype=complex)
        data[positions] = coo.data[keep]
        return data

    def _matrix(self, data: np.ndarray) -> sparse.csc_matrix:
        return sparse.csc_matrix((data, self._indices, self._indptr), shape=(self.dim, self.dim))

    @staticmethod
    def coefficients(d: np.ndarray) -> np.ndarray:
        """Interleaved (Re d_1, Im d_1, Re d_2, ...) for complex control values d_q."""
        d = np.asarray(d, dtype=complex)
        return np.column_stack([d.real, d.imag]).ravel()

    def data(self, d: np.ndarray) -> np.ndarray:
        return self.constant_data + self.coefficients(d) @ self.control_data

    def matrix(self, d: np.ndarray) -> sparse.csc_matrix:
        return self._matrix(self.data(d))

    def control_matrices(self) -> List[sparse.csc_matrix]:
        """K_q^re, K_q^im in the interleaved coefficient order."""
        return [self._matrix(row) for row in self.control_data]

    def midpoint_system(self, d: np.ndarray, dt: float) -> Tuple[sparse.csc_matrix, sparse.csc_matrix]:
        """Generator L at the step midpoint and the implicit matrix I - dt/2 L."""
        data = self.data(d)
        return self._matrix(data), self._matrix(self.identity_data - 0.5 * dt * data)


class MidpointSolver:
    """Solves (I - dt/2 L) x = b, directly for small N^2 and with GMRES above that.

    Direct solves use a dense LU up to settings.dense_solve_max_dim and a sparse LU beyond it.
    """

    def __init__(self, lhs: sparse.csc_matrix, step: Optional[int] = None):
        self.lhs = lhs
        self.step = step
        self._lu = None
        self._dense_lu = None
        size = lhs.shape[0]
        if size <= min(settings.dense_solve_max_dim, settings.direct_solve_max_dim):
            self._dense_lu = linalg.lu_factor(lhs.toarray(), check_finite=False)
            if not np.all(np.isfinite(self._dense_lu[0])) or np.any(np.diag(self._dense_lu[0]) == 0):
                logger.error(f"Dense factorization failed at step {step}")
                raise PropagationError("Midpoint matrix is singular", step=step)
        elif size <= settings.direct_solve_max_dim:
            try:
                self._lu = splinalg.splu(lhs)
            except RuntimeError as e:
                logger.error(f"Factorization failed at step {step}: {e}")
                raise PropagationError("Midpoint matrix is singular", step=step)

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        if self._dense_lu is not None:
            x = linalg.lu_solve(self._dense_lu, rhs, trans=1 if transpose else 0, check_finite=False)
        elif self._lu is not None:
            x = self._lu.solve(rhs, trans="T" if transpose else "N")
        else:
            matrix = self.lhs.T.tocsc() if transpose else self.lhs
            x, info = splinalg.gmres(matrix, rhs, rtol=settings.solve_rtol, atol=0.0,
                                     restart=settings.gmres_restart)
            if info != 0:
                logger.error(f"GMRES did not converge at step {self.step} (info={info})")
                raise PropagationError("Iterative midpoint solve did not converge", step=self.step,
                                       details={"info": info})
        if not np.all(np.isfinite(x)):
            raise PropagationError("Midpoint solve produced non-finite values", step=self.step)
        return x


def imr_step(state: np.ndarray, t_n: float, dt: float,
             generator: Union[Superoperator, Callable[[float], Superoperator]]) -> np.ndarray:
    """One implicit-midpoint step with the generator evaluated at t_n + dt/2."""
    superop = generator if isinstance(generator, Superoperator) else generator(t_n + 0.5 * dt)
    x = vec(state)
    identity = sparse.identity(superop.dim, dtype=complex, format="csc")
    solver = MidpointSolver((identity - 0.5 * dt * superop.matrix).tocsc())
    x_next = solver.solve(x + 0.5 * dt * (superop.matrix @ x))
    return unvec(x_next)


def assemble_generator(system: CompositeSystem, controls: ControlParameterization, alpha: np.ndarray,
                       t: float, generator: Optional[LindbladGenerator] = None) -> Superoperator:
    """Rotating-frame Lindblad generator with the controls evaluated at time t."""
    generator = generator or LindbladGenerator(system)
    d = stack_controls(controls, alpha, [t])[:, 0]
    return Superoperator(generator.matrix(d))


class Propagator:
    """Forward IMR sweep for one system, parameterization and grid."""

    def __init__(self, system: CompositeSystem, controls: ControlParameterization, grid: PropagationGrid,
                 couple_controls: bool = True):
        if len(controls.channels) != system.count:
            raise DimensionError(f"{len(controls.channels)} control channels for {system.count} subsystems")
        self.system = system
        self.controls = controls
        self.grid = grid
        self.generator = LindbladGenerator(system, couple_controls=couple_controls)
        self.designs = [carrier_design(controls, q, grid.midpoints) for q in range(1, system.count + 1)]

    def midpoint_controls(self, alpha: np.ndarray) -> np.ndarray:
        """d_q at every step midpoint, shape (Q, steps)."""
        if alpha.shape != (self.controls.size,):
            raise DimensionError(f"Control vector has length {alpha.shape}, expected {self.controls.size}")
        return np.array([
            np.einsum("tsn,sn->t", design, self.controls.complex_block(alpha, q))
            for q, design in enumerate(self.designs, start=1)
        ])

    def operators(self, n: int, d: np.ndarray) -> Tuple[sparse.csc_matrix, MidpointSolver]:
        generator, lhs = self.generator.midpoint_system(d[:, n], self.grid.dt)
        return generator, MidpointSolver(lhs, step=n)

    def step(self, n: int, x: np.ndarray, d: np.ndarray) -> np.ndarray:
        generator, solver = self.operators(n, d)
        return solver.solve(x + 0.5 * self.grid.dt * (generator @ x))

    def run(self, alpha: np.ndarray, x0: np.ndarray,
            observer: Optional[Callable[[int, np.ndarray], None]] = None) -> np.ndarray:
        d = self.midpoint_controls(alpha)
        x = np.asarray(x0, dtype=complex)
        steps = self.grid.steps
        report_every = max(steps // 10, 1)
        if observer is not None:
            observer(0, x)
        for n in range(steps):
            x = self.step(n, x, d)
            if observer is not None:
                observer(n + 1, x)
            if (n + 1) % report_every == 0:
                logger.debug(f"Propagated {n + 1}/{steps} steps (t={self.grid.times[n + 1]:.6g} us)")
        return x

    def replay(self, d: np.ndarray, x_start: np.ndarray, n_start: int, n_end: int) -> List[np.ndarray]:
        """States n_start..n_end recomputed from the state at n_start."""
        states = [x_start]
        for n in range(n_start, n_end):
            states.append(self.step(n, states[-1], d))
        return states


def expected_energy(system: CompositeSystem, q: int, rho: np.ndarray) -> float:
    value = np.sum(number_sparse(system, q).diagonal() * np.diagonal(rho))
    return float(value.real)


def entropy(rho: np.ndarray, tol: float = POSITIVITY_TOL) -> float:
    """Von Neumann entropy normalized by log N, in [0, 1].

    The midpoint scheme keeps the trace but not positivity, so states with zero eigenvalues
    drift slightly negative; those eigenvalues are clipped to zero and the rest renormalized.
    """
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    eigenvalues = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigenvalues.min() < -tol:
        logger.warning(f"Density matrix has eigenvalue {eigenvalues.min():.3e} below -{tol:g}; clipped to 0")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    if n < 2 or eigenvalues.sum() <= 0.0:
        return 0.0
    eigenvalues /= eigenvalues.sum()
    return float(np.clip(-np.sum(xlogy(eigenvalues, eigenvalues)) / np.log(n), 0.0, 1.0))


def average_fidelity(states: Union[np.ndarray, Sequence[np.ndarray]], m: int) -> float:
    """Mean population of level m; one propagated ensemble, or the list of propagated basis states."""
    if isinstance(states, np.ndarray) and states.ndim == 2:
        states = [states]
    states = list(states)
    if not states:
        raise DimensionError("No states given")
    n = states[0].shape[0]
    if not 0 <= m < n:
        raise InvalidIndexError(f"Target index {m} outside dimension {n}", details={"m": m, "n": n})
    return float(np.mean([state[m, m].real for state in states]))


def reduced_density(system: CompositeSystem, rho: np.ndarray, q: int) -> np.ndarray:
    """Partial trace over every subsystem except q."""
    if not 1 <= q <= system.count:
        raise InvalidIndexError(f"Subsystem index {q} outside 1..{system.count}", details={"q": q})
    dims = system.dims
    before = int(np.prod(dims[:q - 1]))
    after = int(np.prod(dims[q:]))
    levels = dims[q - 1]
    tensor = np.asarray(rho).reshape(before, levels, after, before, levels, after)
    return np.einsum("iajibj->ab", tensor)


def target_levels(system: CompositeSystem, m: int) -> List[int]:
    """Per-subsystem levels of the composite basis index m."""
    if not 0 <= m < system.dim:
        raise InvalidIndexError(f"Target index {m} outside dimension {system.dim}", details={"m": m})
    return [int(level) for level in np.unravel_index(m, system.dims)]


def subsystem_fidelity(system: CompositeSystem, rho: np.ndarray, q: int, level: int) -> float:
    reduced = reduced_density(system, rho, q)
    if not 0 <= level < reduced.shape[0]:
        raise InvalidIndexError(f"Level {level} outside subsystem {q}", details={"q": q, "level": level})
    return float(reduced[level, level].real)


def propagate(system: CompositeSystem, controls: ControlParameterization, alpha: np.ndarray,
              rho0: np.ndarray, grid: PropagationGrid, record_stride: int = 10,
              observable: Optional[OperatorMatrix] = None, keep_states: bool = False,
              propagator: Optional[Propagator] = None) -> Trajectory:
    """Advance rho0 over the grid; observables are sampled every record_stride steps and at T."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (system.dim, system.dim):
        raise DimensionError(f"Initial state has shape {rho0.shape}, expected {(system.dim, system.dim)}")
    propagator = propagator or Propagator(system, controls, grid)

    numbers = [number_sparse(system, q).diagonal().real for q in range(1, system.count + 1)]
    weights = vec(to_dense(observable).T) if observable is not None else None
    times, energies, entropies, integrand, states = [], [], [], [], []
    step_integrand = np.zeros(grid.steps + 1)

    def record(n: int, x: np.ndarray) -> None:
        if weights is not None:
            step_integrand[n] = float(np.real(weights @ x))
        if n % record_stride == 0 or n == grid.steps:
            rho = unvec(x)
            diagonal = np.diagonal(rho).real
            times.append(grid.times[n])
            energies.append([float(number @ diagonal) for number in numbers])
            entropies.append(entropy(rho))
            integrand.append(step_integrand[n])
            if keep_states:
                states.append(rho.copy())

    final = propagator.run(alpha, vec(rho0), observer=record)
    return Trajectory(
        stride=record_stride,
        times=np.array(times),
        energies=np.array(energies),
        entropy=np.array(entropies),
        integrand=np.array(integrand),
        final_state=unvec(final).copy(),
        step_integrand=step_integrand if weights is not None else None,
        states=states if keep_states else None,
    )
