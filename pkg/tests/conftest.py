import numpy as np
import pytest

from app.models.control import ControlChannel, ControlParameterization
from app.models.run import ObjectiveSpec, PropagationGrid
from app.models.system import CompositeSystem, SubsystemSpec


def random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def projector(n: int, k: int) -> np.ndarray:
    rho = np.zeros((n, n), dtype=complex)
    rho[k, k] = 1.0
    return rho


def single_channel(num_splines: int, final_time: float, carriers=(0.0,), count: int = 1) -> ControlParameterization:
    channels = [ControlChannel(num_splines=num_splines, carrier_freqs=list(carriers)) for _ in range(count)]
    return ControlParameterization(channels=channels, final_time=final_time)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def closed_qubit():
    return CompositeSystem(subsystems=[SubsystemSpec(levels=2, freq_ghz=4.41666)])


@pytest.fixture
def decaying_qubit():
    return CompositeSystem(subsystems=[SubsystemSpec(levels=2, freq_ghz=4.41666, t1_us=1.0)])


@pytest.fixture
def qudit():
    return CompositeSystem(subsystems=[SubsystemSpec(levels=3, freq_ghz=4.41666, selfkerr_mhz=230.56)])


@pytest.fixture
def open_pair():
    """Two coupled qubits with decay and dephasing, N = 4."""
    return CompositeSystem(
        subsystems=[
            SubsystemSpec(levels=2, freq_ghz=4.4, selfkerr_mhz=0.0, t1_us=2.0, t2_us=1.5),
            SubsystemSpec(levels=2, freq_ghz=6.8, selfkerr_mhz=0.0, t1_us=0.8),
        ],
        crosskerr_mhz={(2, 1): 3.0},
    )


@pytest.fixture
def closed_pair():
    return CompositeSystem(
        subsystems=[SubsystemSpec(levels=2, freq_ghz=4.4), SubsystemSpec(levels=2, freq_ghz=6.8)],
        crosskerr_mhz={(2, 1): 3.0},
    )


@pytest.fixture
def qudit_cavity():
    """3-level qudit and 3-level cavity with the reference decoherence rates."""
    return CompositeSystem(
        subsystems=[
            SubsystemSpec(levels=3, freq_ghz=4.41666, selfkerr_mhz=230.56, t1_us=80.0, t2_us=26.0),
            SubsystemSpec(levels=3, freq_ghz=6.84081, t1_us=0.3892),
        ],
        crosskerr_mhz={(2, 1): 1.176},
    )


@pytest.fixture
def pair_controls():
    channels = [
        ControlChannel(num_splines=5, carrier_freqs=[0.0, -2 * np.pi * 20.0]),
        ControlChannel(num_splines=5, carrier_freqs=[0.0]),
    ]
    return ControlParameterization(channels=channels, final_time=0.2)


@pytest.fixture
def short_grid():
    return PropagationGrid(final_time=0.2, steps=100)


@pytest.fixture
def ground_objective():
    return ObjectiveSpec(target_index=0, gamma1=0.0, gamma2=0.0, penalty_width=0.1)
