"""CSV and JSON files emitted by the subcommands."""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from app.exceptions import ConfigError, DimensionError
from app.models.control import ControlParameterization
from app.models.results import GradcheckReport, IterationRecord, RunSummary, Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_csv(path: PathLike, header: Sequence[str], rows: np.ndarray, fmt: Union[str, Sequence[str]] = "%.17g") -> Path:
    path = Path(path)
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt=fmt)
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def write_trajectory(path: PathLike, trajectory: Trajectory) -> Path:
    count = trajectory.energies.shape[1]
    header = ["t_us"] + [f"energy_q{q}" for q in range(1, count + 1)] + ["entropy", "objective_integrand"]
    rows = np.column_stack([trajectory.times, trajectory.energies, trajectory.entropy, trajectory.integrand])
    return write_csv(path, header, rows)


def write_history(path: PathLike, history: List[IterationRecord], count: int) -> Path:
    header = ["iter", "total", "final_cost", "tikhonov", "penalty", "grad_norm", "step"] \
        + [f"max_amp_q{q}" for q in range(1, count + 1)]
    rows = []
    for record in history:
        amplitudes = list(record.max_amplitudes) or [float("nan")] * count
        cost = record.cost
        rows.append([record.iteration, cost.total, cost.final_cost, cost.tikhonov, cost.penalty,
                     record.grad_norm, record.step] + amplitudes)
    fmt = ["%d"] + ["%.17g"] * (len(header) - 1)
    return write_csv(path, header, np.array(rows), fmt=fmt)


def write_controls(path: PathLike, samples: np.ndarray) -> Path:
    return write_csv(path, ["t_us", "re_d", "im_d", "f_lab"], samples)


def write_spectrum(path: PathLike, spectrum: List[Tuple[float, float]]) -> Path:
    return write_csv(path, ["freq_ghz", "magnitude"], np.array(spectrum))


def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """Row-major `row,col,re,im` listing of every entry."""
    matrix = np.asarray(matrix, dtype=complex)
    rows, cols = np.indices(matrix.shape)
    table = np.column_stack([rows.ravel(), cols.ravel(), matrix.real.ravel(), matrix.imag.ravel()])
    return write_csv(path, ["row", "col", "re", "im"], table, fmt=["%d", "%d", "%.17g", "%.17g"])


def write_alpha(path: PathLike, param: ControlParameterization, alpha: np.ndarray) -> Path:
    rows = []
    for q, channel in enumerate(param.channels, start=1):
        block = param.block(alpha, q)
        for s in range(channel.num_splines):
            for n in range(channel.num_carriers):
                rows.append([q, s, n, block[s, n, 0], block[s, n, 1]])
    return write_csv(path, ["q", "s", "n", "re", "im"], np.array(rows), fmt=["%d", "%d", "%d", "%.17g", "%.17g"])


def load_alpha(path: PathLike, param: ControlParameterization) -> np.ndarray:
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read control vector file {path}: {e}")
    if table.shape[1] != 5:
        raise ConfigError(f"Control vector file {path} must have columns q,s,n,re,im")

    alpha = np.zeros(param.size)
    offsets = param.offsets()
    for q, s, n, re, im in table:
        q, s, n = int(q), int(s), int(n)
        if not 1 <= q <= len(param.channels):
            raise DimensionError(f"Control vector file references subsystem {q}", details={"q": q})
        channel = param.channel(q)
        if not (0 <= s < channel.num_splines and 0 <= n < channel.num_carriers):
            raise DimensionError(f"Control vector entry (q={q}, s={s}, n={n}) outside the parameterization")
        index = offsets[q - 1] + 2 * (s * channel.num_carriers + n)
        alpha[index], alpha[index + 1] = re, im
    return alpha


def write_gradcheck(path: PathLike, report: GradcheckReport) -> Path:
    rows = [[e.coord, e.eps, e.adjoint, e.fd, e.rel_err] for e in report.entries]
    return write_csv(path, ["coord", "eps", "adjoint", "fd", "rel_err"], np.array(rows),
                     fmt=["%d", "%.3g", "%.17g", "%.17g", "%.6e"])


def write_summary(path: PathLike, summary: RunSummary) -> Path:
    path = Path(path)
    path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    return path
