"""Subcommand routing for the command-line app."""

import argparse
from types import SimpleNamespace
from typing import Callable, Dict, List, Optional

from app.models.run import RunConfig

Handler = Callable[["Invocation"], int]


class Invocation:
    """One subcommand call: parsed arguments plus per-run state filled in by the middleware."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.state = SimpleNamespace(run_id=None, config=None, out_dir=None)

    @property
    def config(self) -> RunConfig:
        return self.state.config


class Command:
    def __init__(self, name: str, handler: Handler, help: str, arguments: List[dict]):
        self.name = name
        self.handler = handler
        self.help = help
        self.arguments = arguments


COMMON_ARGUMENTS = [
    {"flags": ["--config"], "required": True, "help": "run configuration file"},
    {"flags": ["--alpha"], "default": None, "help": "control vector CSV (q,s,n,re,im)"},
    {"flags": ["--out"], "default": None, "help": "output directory (overrides [output] directory)"},
    {"flags": ["--seed"], "type": int, "default": None, "help": "seed for random initial controls"},
]


class CommandRouter:
    def __init__(self):
        self.commands: Dict[str, Command] = {}

    def command(self, name: str, help: str = "", arguments: Optional[List[dict]] = None):
        def decorator(handler: Handler) -> Handler:
            self.commands[name] = Command(name, handler, help, COMMON_ARGUMENTS + (arguments or []))
            return handler
        return decorator
