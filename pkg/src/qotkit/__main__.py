"""Console entry point: ``qotkit <command> [options]``."""

import os
import sys

from django.core.management import execute_from_command_line


def main(argv=None):
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "qotkit.settings")
    execute_from_command_line(["qotkit", *(sys.argv[1:] if argv is None else argv)])


if __name__ == "__main__":
    main()
