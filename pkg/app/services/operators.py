"""Time-independent operators of a composite qudit-cavity system.

Composite indices put subsystem 1 on the slowest-varying Kronecker factor.
All frequencies are angular, in rad/us.
"""

import logging
from typing import List, Literal, Union

import numpy as np
from scipy import sparse

from app.config import settings
from app.exceptions import InvalidIndexError
from app.models.system import CompositeSystem

logger = logging.getLogger(__name__)

OperatorMatrix = Union[np.ndarray, sparse.csr_matrix]


def _check_subsystem(system: CompositeSystem, q: int) -> None:
    if not 1 <= q <= system.count:
        raise InvalidIndexError(
            f"Subsystem index {q} outside 1..{system.count}",
            details={"q": q, "count": system.count},
        )


def _embed(system: CompositeSystem, q: int, local: sparse.spmatrix) -> sparse.csr_matrix:
    before = int(np.prod(system.dims[:q - 1]))
    after = int(np.prod(system.dims[q:]))
    embedded = sparse.kron(sparse.identity(before, format="csr"), local, format="csr")
    return sparse.kron(embedded, sparse.identity(after, format="csr"), format="csr")


def _finalize(system: CompositeSystem, op: sparse.spmatrix) -> OperatorMatrix:
    op = sparse.csr_matrix(op, dtype=complex)
    if system.dim <= settings.dense_operator_max_dim:
        return op.toarray()
    return op


def to_sparse(op: OperatorMatrix) -> sparse.csr_matrix:
    return sparse.csr_matrix(op, dtype=complex)


def to_dense(op: OperatorMatrix) -> np.ndarray:
    if sparse.issparse(op):
        return op.toarray()
    return np.asarray(op, dtype=complex)


def lowering_sparse(system: CompositeSystem, q: int) -> sparse.csr_matrix:
    _check_subsystem(system, q)
    levels = system.dims[q - 1]
    local = sparse.diags(np.sqrt(np.arange(1, levels, dtype=float)), offsets=1, format="csr")
    return _embed(system, q, local).astype(complex)


def number_sparse(system: CompositeSystem, q: int) -> sparse.csr_matrix:
    _check_subsystem(system, q)
    levels = system.dims[q - 1]
    local = sparse.diags(np.arange(levels, dtype=float), format="csr")
    return _embed(system, q, local).astype(complex)


def lowering_operator(system: CompositeSystem, q: int) -> OperatorMatrix:
    """I x ... x A_{n_q} x ... x I with sqrt(1..n_q-1) on the superdiagonal of A."""
    return _finalize(system, lowering_sparse(system, q))


def number_operator(system: CompositeSystem, q: int) -> OperatorMatrix:
    return _finalize(system, number_sparse(system, q))


def drift_hamiltonian(system: CompositeSystem, frame: Literal["lab", "rotating"] = "rotating") -> OperatorMatrix:
    """Dispersive drift Hamiltonian; the rotating frame drops the sum of omega_q a_q^dag a_q."""
    if frame not in ("lab", "rotating"):
        raise InvalidIndexError(f"Unknown frame '{frame}'", details={"frame": frame})

    dim = system.dim
    hamiltonian = sparse.csr_matrix((dim, dim), dtype=complex)
    numbers = [number_sparse(system, q) for q in range(1, system.count + 1)]
    identity = sparse.identity(dim, dtype=complex, format="csr")

    for q, sub in enumerate(system.subsystems, start=1):
        n_q = numbers[q - 1]
        if frame == "lab":
            hamiltonian = hamiltonian + sub.omega * n_q
        # a^dag a^dag a a = n (n - 1)
        hamiltonian = hamiltonian - 0.5 * sub.xi * (n_q @ (n_q - identity))
        for p in range(q + 1, system.count + 1):
            coupling = system.crosskerr(p, q)
            if coupling:
                hamiltonian = hamiltonian - coupling * (numbers[p - 1] @ n_q)

    return _finalize(system, hamiltonian)


def collapse_sparse(system: CompositeSystem) -> List[sparse.csr_matrix]:
    operators = []
    for q, sub in enumerate(system.subsystems, start=1):
        if sub.t1_us is not None:
            operators.append(lowering_sparse(system, q) / np.sqrt(sub.t1_us))
        if sub.t2_us is not None:
            operators.append(number_sparse(system, q) / np.sqrt(sub.t2_us))
    logger.debug(f"Built {len(operators)} collapse operators for dims {system.dims}")
    return operators


def collapse_operators(system: CompositeSystem) -> List[OperatorMatrix]:
    """Decay a_q/sqrt(T1) and dephasing a_q^dag a_q/sqrt(T2) for every finite decoherence time."""
    return [_finalize(system, op) for op in collapse_sparse(system)]
