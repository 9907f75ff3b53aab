import argparse
import logging
from typing import Callable, Dict, List, Optional, Sequence, Type

from pydantic import ValidationError

from app.config import settings
from app.error_handlers import generic_exception_handler, purestate_exception_handler, validation_exception_handler
from app.exceptions import PureStateException
from app.middleware import (
    CommandLoggingMiddleware, CommandMiddleware, OutputDirectoryMiddleware, RunConfigMiddleware,
)
from app.routers import check_api, run_api
from app.routers.base import Command, CommandRouter, Invocation

# Configure logging
logging.basicConfig(
    level=logging.INFO if not settings.debug else logging.DEBUG,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)

logger = logging.getLogger(__name__)

ExceptionHandler = Callable[[Invocation, Exception], int]


class CommandApp:
    """argparse front end with a middleware chain and exception handlers around each subcommand"""

    def __init__(self, title: str, description: str, version: str):
        self.parser = argparse.ArgumentParser(prog=title, description=description)
        self.parser.add_argument("--version", action="version", version=f"{title} {version}")
        self._subparsers = self.parser.add_subparsers(dest="command", required=True)
        self.commands: Dict[str, Command] = {}
        self.middleware: List[CommandMiddleware] = []
        self.exception_handlers: Dict[Type[BaseException], ExceptionHandler] = {}

    def add_middleware(self, middleware_class: Type[CommandMiddleware]) -> None:
        # the first middleware added is the outermost
        self.middleware.append(middleware_class())

    def add_exception_handler(self, exc_class: Type[BaseException], handler: ExceptionHandler) -> None:
        self.exception_handlers[exc_class] = handler

    def include_router(self, router: CommandRouter) -> None:
        for name, command in router.commands.items():
            subparser = self._subparsers.add_parser(name, help=command.help)
            for argument in command.arguments:
                options = {key: value for key, value in argument.items() if key != "flags"}
                subparser.add_argument(*argument["flags"], **options)
            self.commands[name] = command

    def _handler_for(self, exc: BaseException) -> ExceptionHandler:
        for cls in type(exc).__mro__:
            if cls in self.exception_handlers:
                return self.exception_handlers[cls]
        raise exc

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        args = self.parser.parse_args(argv)
        invocation = Invocation(args.command, args)
        handler = self.commands[args.command].handler

        call_next = handler
        for middleware in reversed(self.middleware):
            call_next = (lambda m, nxt: lambda inv: m.dispatch(inv, nxt))(middleware, call_next)

        try:
            return call_next(invocation)
        except Exception as exc:
            return self._handler_for(exc)(invocation, exc)


# Create command app
app = CommandApp(
    title=settings.app_title,
    description="Optimal control of pure-state preparation in open quantum systems",
    version=settings.app_version,
)

# Add middlewares
app.add_middleware(CommandLoggingMiddleware)
app.add_middleware(RunConfigMiddleware)
app.add_middleware(OutputDirectoryMiddleware)

# Add exception handlers
app.add_exception_handler(PureStateException, purestate_exception_handler)
app.add_exception_handler(ValidationError, validation_exception_handler)
app.add_exception_handler(Exception, generic_exception_handler)

# Include routers
app.include_router(run_api.router)
app.include_router(check_api.router)


def main(argv: Optional[Sequence[str]] = None) -> int:
    return app.run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
