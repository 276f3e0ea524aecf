"""Shared behaviour of the qotkit management commands.

Exit codes: 0 success, 1 verification violations, 2 input errors, 3 solver
failures. Errors leave :meth:`QotkitCommand.execute` as ``CommandError`` with
the matching ``returncode``, which ``run_from_argv`` turns into the process
exit status.
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from ..exceptions import QotkitError, SolverError


logger = logging.getLogger(__name__)

EXIT_VIOLATION = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_FAILURE = 3


def format_value(value: float) -> str:
    """Locale independent fixed-point rendering with 9 digits after the point."""
    return f"{float(value):.9f}"


class QotkitCommand(BaseCommand):
    requires_system_checks = []

    def add_file_argument(self, parser, flag: str, help: str, required: bool = True):
        parser.add_argument(flag, metavar="FILE", required=required, help=help)

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except SolverError as exc:
            logger.debug("Solver failure", exc_info=True)
            raise CommandError(f"Solver failure: {exc}", returncode=EXIT_SOLVER_FAILURE) from exc
        except QotkitError as exc:
            raise CommandError(str(exc), returncode=EXIT_INPUT_ERROR) from exc

    def write_value(self, label: str, value: float) -> None:
        if label:
            self.stdout.write(f"{label} {format_value(value)}")
        else:
            self.stdout.write(format_value(value))

    def input_error(self, message: str) -> CommandError:
        return CommandError(message, returncode=EXIT_INPUT_ERROR)
