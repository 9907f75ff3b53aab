import json
import logging
import sys

from app.config import settings
from app.exceptions import CheckFailedError
from app.routers.base import CommandRouter, Invocation
from app.services import outputs
from app.services.adjoint import DEFAULT_EPS, fd_check, sample_coordinates
from app.services.basis import verify_basis
from app.services.runner import RunContext, write_spectra

logger = logging.getLogger(__name__)

router = CommandRouter()

GRADCHECK_COORDS = 20


@router.command("gradcheck", help="compare adjoint gradient entries with central differences")
def gradcheck(invocation: Invocation) -> int:
    ctx = RunContext(invocation.config)
    seed = invocation.args.seed if invocation.args.seed is not None else invocation.config.optimizer.seed
    alpha = ctx.initial_alpha(invocation.args.alpha, seed)
    coords = sample_coordinates(ctx.controls.size, GRADCHECK_COORDS, seed)

    report = fd_check(ctx.problem(), alpha, coords, DEFAULT_EPS)
    path = outputs.write_gradcheck(invocation.state.out_dir / "gradcheck.csv", report)
    sys.stdout.write(path.read_text(encoding="utf-8"))

    flagged = report.flagged(settings.gradcheck_tol)
    if flagged:
        raise CheckFailedError(
            f"Gradient check failed on {len(flagged)} of {len(coords)} coordinates",
            details={"coords": flagged, "max_rel_err": report.max_error, "tol": settings.gradcheck_tol},
        )
    return 0


@router.command("verify-basis", help="check the density-matrix basis of the configured dimension")
def verify_basis_command(invocation: Invocation) -> int:
    report = verify_basis(invocation.config.system.dim)
    print(json.dumps(report.model_dump()))
    if not report.ok:
        raise CheckFailedError("Basis check failed", details=report.model_dump())
    return 0


@router.command("spectrum", help="write the Fourier spectrum of every lab-frame control")
def spectrum(invocation: Invocation) -> int:
    ctx = RunContext(invocation.config)
    alpha = ctx.load_or_zero(invocation.args.alpha)
    files = write_spectra(ctx, alpha, invocation.state.out_dir)
    logger.info(f"Wrote {', '.join(path.name for path in files)}")
    return 0
