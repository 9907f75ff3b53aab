"""Middleware for purestate commands"""

import logging
import time
import uuid
from pathlib import Path
from typing import Callable

from app.config import settings
from app.routers.base import Invocation
from app.services.config_loader import parse_config

logger = logging.getLogger(__name__)

CallNext = Callable[[Invocation], int]


class CommandMiddleware:
    """Base class: wraps the next layer of the command chain"""

    def dispatch(self, invocation: Invocation, call_next: CallNext) -> int:
        return call_next(invocation)


class CommandLoggingMiddleware(CommandMiddleware):
    """Assigns a run id and logs the start, end and duration of every command"""

    def dispatch(self, invocation: Invocation, call_next: CallNext) -> int:
        run_id = str(uuid.uuid4())
        invocation.state.run_id = run_id
        start_time = time.time()

        logger.info(f"Run {run_id}: {invocation.command} --config {invocation.args.config} "
                    f"({settings.app_title} {settings.app_version}, threads={settings.threads})")
        try:
            exit_code = call_next(invocation)
        except Exception as e:
            process_time = time.time() - start_time
            logger.error(f"Run {run_id} failed: {e} in {process_time:.3f}s")
            raise

        process_time = time.time() - start_time
        logger.info(f"Run {run_id}: exit {exit_code} in {process_time:.3f}s")
        return exit_code


class RunConfigMiddleware(CommandMiddleware):
    """Parses and validates the --config file before the handler runs"""

    def dispatch(self, invocation: Invocation, call_next: CallNext) -> int:
        invocation.state.config = parse_config(invocation.args.config)
        return call_next(invocation)


class OutputDirectoryMiddleware(CommandMiddleware):
    """Creates the output directory; --out takes precedence over [output] directory"""

    def dispatch(self, invocation: Invocation, call_next: CallNext) -> int:
        out = invocation.args.out or invocation.config.output.directory
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        invocation.state.out_dir = out_dir
        logger.debug(f"Writing outputs to {out_dir.resolve()}")
        return call_next(invocation)
