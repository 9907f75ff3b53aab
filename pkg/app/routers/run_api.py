from app.routers.base import CommandRouter, Invocation
from app.services.runner import RunContext, run_optimization, run_simulation
import logging

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("simulate", help="propagate the configured initial state and write trajectory files")
def simulate(invocation: Invocation) -> int:
    """Propagate with the controls from --alpha (zero controls when omitted)"""
    ctx = RunContext(invocation.config)
    alpha = ctx.load_or_zero(invocation.args.alpha)
    run_simulation(ctx, alpha, invocation.state.out_dir, "simulate", invocation.state.run_id)
    return 0


@router.command("optimize", help="optimize the control coefficients, then simulate the result")
def optimize(invocation: Invocation) -> int:
    """Minimize the total cost from --alpha, or from a seeded random guess inside the amplitude boxes"""
    ctx = RunContext(invocation.config)
    alpha0 = ctx.initial_alpha(invocation.args.alpha, invocation.args.seed)
    result, summary = run_optimization(ctx, alpha0, invocation.state.out_dir, invocation.state.run_id)
    logger.info(f"Termination: {result.reason} after {len(result.history) - 1} iterations, "
                f"average fidelity {summary.average_fidelity:.6f}")
    return 0
