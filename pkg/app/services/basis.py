"""Density-matrix basis whose elements are themselves pure states.

B^kj = (e_k e_k^dag + e_j e_j^dag)/2 plus
    0                                     for k = j
    (e_k e_j^dag + e_j e_k^dag)/2         for k < j
    i (e_j e_k^dag - e_k e_j^dag)/2       for k > j
"""

import logging
from typing import Iterator, List, Optional, Sequence

import numpy as np
from scipy import linalg

from app.config import settings
from app.exceptions import DimensionError, InvalidIndexError, StateValidationError
from app.models.results import BasisReport

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
RANK_TOL = 1e-10


def basis_matrix(n: int, k: int, j: int) -> np.ndarray:
    if not (0 <= k < n and 0 <= j < n):
        raise InvalidIndexError(f"Basis index ({k},{j}) outside dimension {n}", details={"n": n, "k": k, "j": j})

    mat = np.zeros((n, n), dtype=complex)
    mat[k, k] += 0.5
    mat[j, j] += 0.5
    if k < j:
        mat[k, j] += 0.5
        mat[j, k] += 0.5
    elif k > j:
        mat[j, k] += 0.5j
        mat[k, j] -= 0.5j
    return mat


def basis_matrices(n: int) -> List[np.ndarray]:
    """All B^kj in row-major (k, j) order."""
    return [basis_matrix(n, k, j) for k in range(n) for j in range(n)]


def ensemble_state(n: int) -> np.ndarray:
    """Uniform average of the n^2 basis matrices."""
    if n < 2:
        raise DimensionError(f"Ensemble needs dimension >= 2, got {n}", details={"n": n})
    return sum(basis_matrices(n)) / n ** 2


def _ground_state(n: int) -> np.ndarray:
    mat = np.zeros((n, n), dtype=complex)
    mat[0, 0] = 1.0
    return mat


def _check_partition(count: int, basis_subsystems: Sequence[int], ground_subsystems: Sequence[int]) -> None:
    basis_set, ground_set = set(basis_subsystems), set(ground_subsystems)
    if basis_set & ground_set:
        raise DimensionError("Basis and ground subsystem lists overlap",
                             details={"overlap": sorted(basis_set & ground_set)})
    if basis_set | ground_set != set(range(1, count + 1)) \
            or len(basis_subsystems) + len(ground_subsystems) != count:
        raise DimensionError("Basis and ground subsystem lists must partition the subsystems",
                             details={"basis": list(basis_subsystems), "ground": list(ground_subsystems)})


def ensemble_state_partial(dims: Sequence[int], basis_subsystems: Sequence[int],
                           ground_subsystems: Optional[Sequence[int]] = None) -> np.ndarray:
    """Ensemble over the basis subsystems jointly, ground state on the rest, in system order.

    Basis subsystems are treated as one joint register (the Kronecker product of the
    basis subsystems in system order), so listing every subsystem gives the full ensemble.
    """
    if ground_subsystems is None:
        ground_subsystems = [q for q in range(1, len(dims) + 1) if q not in basis_subsystems]
    _check_partition(len(dims), basis_subsystems, ground_subsystems)
    return _kron_partial(dims, basis_subsystems, ensemble_state)


def _kron_partial(dims: Sequence[int], basis_subsystems: Sequence[int], joint_state) -> np.ndarray:
    basis_dims = [dims[q - 1] for q in sorted(basis_subsystems)]
    joint = joint_state(int(np.prod(basis_dims)))
    # Build in the order (basis register, ground register), then permute into system order.
    ground = [q for q in range(1, len(dims) + 1) if q not in basis_subsystems]
    ground_dim = int(np.prod([dims[q - 1] for q in ground])) if ground else 1
    product = np.kron(joint, _ground_state(ground_dim)) if ground else joint
    order = sorted(basis_subsystems) + ground
    return _permute_subsystems(product, [dims[q - 1] for q in order], order)


def _permute_subsystems(mat: np.ndarray, dims_in_order: List[int], order: List[int]) -> np.ndarray:
    count = len(order)
    tensor = mat.reshape(dims_in_order + dims_in_order)
    # axis i of the tensor belongs to subsystem order[i]; move subsystem q to axis q-1
    perm = [order.index(q) for q in range(1, count + 1)]
    tensor = tensor.transpose(perm + [p + count for p in perm])
    dim = int(np.prod(dims_in_order))
    return tensor.reshape(dim, dim)


def basis_initial_states(dims: Sequence[int], basis_subsystems: Sequence[int]) -> Iterator[np.ndarray]:
    """The pure initial states B^kj (on the basis register) x ground, whose mean is the partial ensemble."""
    basis_dims = [dims[q - 1] for q in sorted(basis_subsystems)]
    n = int(np.prod(basis_dims))
    for k in range(n):
        for j in range(n):
            yield _kron_partial(dims, basis_subsystems, lambda _n, k=k, j=j: basis_matrix(_n, k, j))


def pure_initial_state(dims: Sequence[int], basis_subsystems: Sequence[int], k: int) -> np.ndarray:
    """e_k e_k^dag on the basis register, ground state elsewhere."""
    return _kron_partial(dims, basis_subsystems, lambda n: basis_matrix(n, k, k))


def _features(mat: np.ndarray) -> np.ndarray:
    """n^2 real coordinates of a Hermitian matrix: diagonal, Re and Im of the strict upper triangle."""
    upper = np.triu_indices(mat.shape[0], k=1)
    return np.concatenate([mat.diagonal().real, mat[upper].real, mat[upper].imag])


def density_from_coefficients(z: np.ndarray) -> np.ndarray:
    """The parameterization map F_N(z) = sum_kj z_kj B^kj."""
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    return sum(z[k, j] * basis_matrix(n, k, j) for k in range(n) for j in range(n))


def expand_in_basis(rho: np.ndarray) -> np.ndarray:
    """Real coefficients z with rho = sum_kj z_kj B^kj."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    if rho.shape != (n, n):
        raise DimensionError(f"Expected a square matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise StateValidationError("Cannot expand a non-Hermitian matrix in the density basis",
                                   details={"max_asymmetry": float(np.max(np.abs(rho - rho.conj().T)))})

    system_matrix = np.column_stack([_features(b) for b in basis_matrices(n)])
    z = linalg.solve(system_matrix, _features(rho))
    return z.reshape(n, n)


def q2_admissible(z00: float, z11: float, z10: float) -> bool:
    """Closed-form admissible set for N = 2: an ellipsoid in shifted coordinates."""
    xi = z00 + (z10 - 1.0) / 2.0
    eta = z11 + (z10 - 1.0) / 2.0
    return 2.0 * xi ** 2 + 2.0 * eta ** 2 + z10 ** 2 <= 1.0


def q2_matrix(z00: float, z11: float, z10: float) -> np.ndarray:
    """F_2(z) with z01 fixed by the unit-trace condition."""
    z01 = 1.0 - z00 - z11 - z10
    return density_from_coefficients(np.array([[z00, z01], [z10, z11]]))


def is_admissible(z: np.ndarray, tol: float = PSD_TOL) -> bool:
    """Eigenvalue oracle: do the coefficients produce a positive semi-definite matrix."""
    rho = density_from_coefficients(z)
    return bool(np.linalg.eigvalsh(rho).min() >= tol)


def verify_basis(n: int, matrices: Optional[Sequence[np.ndarray]] = None) -> BasisReport:
    if n < 2:
        raise DimensionError(f"Basis check needs dimension >= 2, got {n}", details={"n": n})
    if n > settings.verify_basis_max_dim:
        raise DimensionError(
            f"Dimension {n} above the configured cap {settings.verify_basis_max_dim}",
            details={"n": n, "cap": settings.verify_basis_max_dim},
        )

    if matrices is None:
        matrices = basis_matrices(n)

    hermitian = all(np.max(np.abs(b - b.conj().T)) < HERMITIAN_TOL for b in matrices)
    unit_trace = all(abs(np.trace(b) - 1.0) < TRACE_TOL for b in matrices)
    psd = all(np.linalg.eigvalsh(0.5 * (b + b.conj().T)).min() >= PSD_TOL for b in matrices)

    vectorized = np.array([np.concatenate([b.real.ravel(), b.imag.ravel()]) for b in matrices])
    singular_values = linalg.svdvals(vectorized)
    min_singular = float(singular_values.min()) if len(matrices) >= n ** 2 else 0.0
    independent = len(matrices) == n ** 2 and min_singular > RANK_TOL

    report = BasisReport(hermitian=hermitian, unit_trace=unit_trace, psd=psd,
                         independent=independent, min_singular_value=min_singular)
    logger.info(f"Basis check n={n}: {report.model_dump()}")
    return report

