"""Run-level workflows shared by the subcommands: model building, simulation outputs, optimization."""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import settings
from app.models.results import OptimizationResult, RunSummary
from app.models.run import PropagationGrid, RunConfig
from app.models.system import TWO_PI
from app.services import outputs
from app.services.basis import basis_initial_states, pure_initial_state
from app.services.config_loader import (
    amplitude_bounds, basis_register, build_controls, build_initial_state, build_objective,
)
from app.services.controls import control_samples, control_spectrum, max_lab_amplitude
from app.services.dynamics import Propagator, average_fidelity, propagate, subsystem_fidelity, target_levels
from app.services.objective import objective_observable
from app.services.optimizer import coefficient_bounds, default_amplitude_scale, initial_guess, minimize
from app.services.outputs import load_alpha
from app.services.problem import ControlProblem

logger = logging.getLogger(__name__)


class RunContext:
    """Models built once from a validated RunConfig."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.system = config.system
        self.controls = build_controls(config)
        self.grid: PropagationGrid = config.grid
        self.spec = build_objective(config)
        self.rho0 = build_initial_state(config)
        self.lower, self.upper = coefficient_bounds(self.controls, amplitude_bounds(config))
        self.propagator = Propagator(self.system, self.controls, self.grid)

    def problem(self) -> ControlProblem:
        return ControlProblem(self.system, self.controls, self.grid, self.spec, self.rho0,
                              propagator=self.propagator)

    def load_or_zero(self, alpha_path: Optional[str]) -> np.ndarray:
        if alpha_path is None:
            return np.zeros(self.controls.size)
        return load_alpha(alpha_path, self.controls)

    def initial_alpha(self, alpha_path: Optional[str], seed: Optional[int]) -> np.ndarray:
        if alpha_path is not None:
            return load_alpha(alpha_path, self.controls)
        opts = self.config.optimizer
        if opts.init_amplitude_scale is not None:
            scale = TWO_PI * opts.init_amplitude_scale
        else:
            scale = default_amplitude_scale(self.upper)
        return initial_guess(self.controls, scale, seed if seed is not None else opts.seed)

    def max_amplitudes(self, alpha: np.ndarray) -> List[float]:
        times = self.grid.times[::self.config.output.stride]
        return [max_lab_amplitude(self.controls, alpha, q, sub.omega, times)
                for q, sub in enumerate(self.system.subsystems, start=1)]

    def target_fidelity(self, rho: np.ndarray) -> float:
        m = self.spec.target_index
        if self.spec.unitary is not None:
            rho = self.spec.unitary @ rho @ self.spec.unitary.conj().T
        return average_fidelity(rho, m)

    def sample_times(self) -> np.ndarray:
        times = self.grid.times
        sampled = times[::self.config.output.stride]
        return sampled if sampled[-1] == times[-1] else np.append(sampled, times[-1])

    def sample_rate(self, q: int) -> float:
        if self.config.output.sample_rate_ghz is not None:
            return self.config.output.sample_rate_ghz
        omega = self.system.subsystems[q - 1].omega
        highest = max(abs(omega + f) for f in self.controls.channel(q).carrier_freqs) / TWO_PI / 1e3
        return 4.0 * highest


def write_spectra(ctx: RunContext, alpha: np.ndarray, out_dir: Path) -> List[Path]:
    files = []
    for q, sub in enumerate(ctx.system.subsystems, start=1):
        spectrum = control_spectrum(ctx.controls, alpha, q, sub.omega, ctx.sample_rate(q))
        files.append(outputs.write_spectrum(out_dir / f"spectrum_q{q}.csv", spectrum))
    return files


def oracle_fidelity(ctx: RunContext, alpha: np.ndarray) -> float:
    """Average target fidelity from every basis initial state propagated separately."""
    states = list(basis_initial_states(ctx.system.dims, basis_register(ctx.config)))

    def final_state(rho0: np.ndarray) -> np.ndarray:
        return propagate(ctx.system, ctx.controls, alpha, rho0, ctx.grid, record_stride=ctx.grid.steps,
                         propagator=ctx.propagator).final_state

    logger.info(f"Propagating {len(states)} basis initial states on {settings.threads} thread(s)")
    with ThreadPoolExecutor(max_workers=max(settings.threads, 1)) as pool:
        finals = list(pool.map(final_state, states))
    if ctx.spec.unitary is not None:
        finals = [ctx.spec.unitary @ rho @ ctx.spec.unitary.conj().T for rho in finals]
    return average_fidelity(finals, ctx.spec.target_index)


def run_simulation(ctx: RunContext, alpha: np.ndarray, out_dir: Path, command: str, run_id: str,
                   optimization: Optional[OptimizationResult] = None,
                   extra_files: Optional[List[Path]] = None) -> RunSummary:
    config = ctx.config
    observable = objective_observable(ctx.spec, ctx.system.dim)
    trajectory = propagate(ctx.system, ctx.controls, alpha, ctx.rho0, ctx.grid,
                           record_stride=config.output.stride, observable=observable, propagator=ctx.propagator)

    files = list(extra_files or [])
    files.append(outputs.write_trajectory(out_dir / "trajectory.csv", trajectory))
    times = ctx.sample_times()
    for q, sub in enumerate(ctx.system.subsystems, start=1):
        samples = control_samples(ctx.controls, alpha, q, sub.omega, times)
        files.append(outputs.write_controls(out_dir / f"controls_q{q}.csv", samples))
    files.extend(write_spectra(ctx, alpha, out_dir))
    files.append(outputs.write_matrix(out_dir / "final_state.csv", trajectory.final_state))

    if config.output.pure_state_trajectories:
        register = basis_register(config)
        size = int(np.prod([ctx.system.dims[q - 1] for q in register]))
        for k in range(size):
            rho0 = pure_initial_state(ctx.system.dims, register, k)
            pure = propagate(ctx.system, ctx.controls, alpha, rho0, ctx.grid, record_stride=config.output.stride,
                             observable=observable, propagator=ctx.propagator)
            files.append(outputs.write_trajectory(out_dir / f"trajectory_k{k}.csv", pure))

    oracle = None
    if config.output.oracle_fidelity:
        oracle = oracle_fidelity(ctx, alpha)

    final = trajectory.final_state
    if ctx.spec.unitary is not None:
        final = ctx.spec.unitary @ final @ ctx.spec.unitary.conj().T
    levels = target_levels(ctx.system, ctx.spec.target_index)
    fidelities: Dict[str, float] = {
        f"q{q}": subsystem_fidelity(ctx.system, final, q, level) for q, level in enumerate(levels, start=1)
    }

    summary_path = out_dir / "summary.json"
    summary = RunSummary(
        command=command,
        run_id=run_id,
        termination_reason=optimization.reason if optimization else None,
        iterations=optimization.history[-1].iteration if optimization else None,
        final_cost=optimization.history[-1].cost if optimization else None,
        average_fidelity=ctx.target_fidelity(trajectory.final_state),
        oracle_average_fidelity=oracle,
        subsystem_fidelities=fidelities,
        target_levels=levels,
        files=[path.name for path in files] + [summary_path.name],
    )
    outputs.write_summary(summary_path, summary)
    logger.info(f"Average fidelity {summary.average_fidelity:.6f}, subsystem fidelities {fidelities}")
    return summary


def run_optimization(ctx: RunContext, alpha0: np.ndarray, out_dir: Path,
                     run_id: str) -> Tuple[OptimizationResult, RunSummary]:
    result = minimize(ctx.problem(), alpha0, ctx.config.optimizer, ctx.lower, ctx.upper,
                      amplitude_fn=ctx.max_amplitudes)
    files = [
        outputs.write_history(out_dir / "history.csv", result.history, ctx.system.count),
        outputs.write_alpha(out_dir / "alpha.csv", ctx.controls, result.alpha),
    ]
    summary = run_simulation(ctx, result.alpha, out_dir, "optimize", run_id, optimization=result, extra_files=files)
    return result, summary
