"""Quadratic B-spline envelopes modulating carrier waves.

Rotating frame:  d^q(t) = sum_s S_s(t) sum_n (a1 + i a2)_{s,n} exp(i t Omega_q^n)
Lab frame:       f^q(t) = 2 Re(d^q(t) exp(i omega_q t))
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from app.exceptions import InvalidIndexError, UndersamplingError
from app.models.control import ControlParameterization
from app.models.system import TWO_PI, CompositeSystem

logger = logging.getLogger(__name__)


def cardinal_bspline(u: np.ndarray) -> np.ndarray:
    """Cardinal quadratic B-spline supported on [0, 3]."""
    u = np.asarray(u, dtype=float)
    return np.where(
        (u >= 0) & (u < 1), 0.5 * u ** 2,
        np.where(
            (u >= 1) & (u < 2), -u ** 2 + 3 * u - 1.5,
            np.where((u >= 2) & (u <= 3), 0.5 * (3 - u) ** 2, 0.0),
        ),
    )


def bspline_value(param: ControlParameterization, q: int, s: int, t):
    channel = param.channel(q)
    if not 0 <= s < channel.num_splines:
        raise InvalidIndexError(f"Spline index {s} outside 0..{channel.num_splines - 1}",
                                details={"s": s, "num_splines": channel.num_splines})
    spacing = param.knot_spacing(q)
    center = param.centers(q)[s]
    return cardinal_bspline((np.asarray(t) - center) / spacing + 1.5)


def spline_matrix(param: ControlParameterization, q: int, times: np.ndarray) -> np.ndarray:
    """S_s(t) for every time (rows) and spline (columns)."""
    spacing = param.knot_spacing(q)
    centers = param.centers(q)
    return cardinal_bspline((np.asarray(times)[:, None] - centers[None, :]) / spacing + 1.5)


def carrier_design(param: ControlParameterization, q: int, times: np.ndarray) -> np.ndarray:
    """E[t, s, n] = S_s(t) exp(i t Omega_n), so that d(t) = sum_sn E[t, s, n] alpha_sn."""
    times = np.asarray(times, dtype=float)
    phases = np.exp(1j * np.outer(times, param.channel(q).carrier_freqs))
    return spline_matrix(param, q, times)[:, :, None] * phases[:, None, :]


def rotating_control(param: ControlParameterization, alpha: np.ndarray, q: int, t):
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    values = np.einsum("tsn,sn->t", carrier_design(param, q, times), param.complex_block(alpha, q))
    return complex(values[0]) if scalar else values


def lab_control(param: ControlParameterization, alpha: np.ndarray, q: int, t, omega_q: float):
    d = rotating_control(param, alpha, q, t)
    return 2.0 * np.real(d * np.exp(1j * omega_q * np.asarray(t, dtype=float)))


def max_lab_amplitude(param: ControlParameterization, alpha: np.ndarray, q: int, omega_q: float,
                      grid: np.ndarray) -> float:
    if np.size(grid) == 0:
        return 0.0
    return float(np.max(np.abs(lab_control(param, alpha, q, np.asarray(grid), omega_q))))


def control_samples(param: ControlParameterization, alpha: np.ndarray, q: int, omega_q: float,
                    times: np.ndarray) -> np.ndarray:
    """Rows of (t_us, re_d, im_d, f_lab)."""
    times = np.asarray(times, dtype=float)
    d = rotating_control(param, alpha, q, times)
    f_lab = 2.0 * np.real(d * np.exp(1j * omega_q * times))
    return np.column_stack([times, d.real, d.imag, f_lab])


def lab_carrier_frequencies(param: ControlParameterization, system: CompositeSystem, q: int) -> List[float]:
    """Lab-frame carrier frequencies omega_q + Omega_q^n, in GHz."""
    omega_q = system.subsystems[q - 1].omega
    return [(omega_q + freq) / TWO_PI / 1e3 for freq in param.channel(q).carrier_freqs]


def resonant_carriers(system: CompositeSystem, q: int, count: int) -> List[float]:
    """Omega_q^n = -(n-1) xi_q, n = 1..count, in rad/us: drives the n-1 -> n transition."""
    xi = system.subsystems[q - 1].xi
    return [-n * xi for n in range(count)]


def control_spectrum(param: ControlParameterization, alpha: np.ndarray, q: int, omega_q: float,
                     sample_rate: float) -> List[Tuple[float, float]]:
    """Magnitude of the discrete Fourier transform of f^q; sample_rate and frequencies in GHz."""
    highest = max(abs(omega_q + freq) for freq in param.channel(q).carrier_freqs) / TWO_PI / 1e3
    if sample_rate < 2.0 * highest:
        raise UndersamplingError(
            f"Sample rate {sample_rate} GHz below twice the highest lab carrier {highest:.6f} GHz",
            details={"sample_rate_ghz": sample_rate, "highest_carrier_ghz": highest},
        )

    dt_us = 1.0 / (sample_rate * 1e3)
    count = int(np.floor(param.final_time / dt_us)) + 1
    times = np.arange(count) * dt_us
    signal = lab_control(param, alpha, q, times, omega_q)

    magnitudes = np.abs(np.fft.rfft(signal)) / count
    freqs_ghz = np.fft.rfftfreq(count, d=dt_us) / 1e3
    logger.debug(f"Spectrum of control {q}: {count} samples at {sample_rate} GHz")
    return list(zip(freqs_ghz.tolist(), magnitudes.tolist()))


def stack_controls(param: ControlParameterization, alpha: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """d^q(t) for every subsystem (rows) and time (columns)."""
    return np.array([rotating_control(param, alpha, q, np.asarray(times, dtype=float))
                     for q in range(1, len(param.channels) + 1)])
