"""CLI subcommands package."""

from app.commands.exit_codes import EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC
from app.commands.train import cmd_train
from app.commands.evaluate import cmd_eval
from app.commands.verify import cmd_verify
from app.commands.resources import cmd_resources
from app.commands.aggregate import cmd_aggregate

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_DATA",
    "EXIT_NUMERIC",
    "cmd_train",
    "cmd_eval",
    "cmd_verify",
    "cmd_resources",
    "cmd_aggregate",
]
