"""Package settings with defaults.

The numerical modules read their configuration through this module only. When
Django settings are configured (the CLI and the test-suite use
``qotkit.settings``) the values come from there, otherwise the defaults below
apply so the package can be used as a plain library.
"""

import logging
import os
from typing import Any

from django.conf import settings


logger = logging.getLogger(__name__)


DEFAULTS = {
    "QOTKIT_NMAX": 4,
    "QOTKIT_SOLVER_OPTIONS": {},
}


def get_setting(name: str) -> Any:
    """Return a qotkit setting, falling back to the package default.

    Parameters
    ----------
    name : str
        Name of the setting, one of the keys of ``DEFAULTS``.

    Raises
    ------
    KeyError
        If the setting is unknown.
    """
    if name not in DEFAULTS:
        raise KeyError(f"Unknown qotkit setting {name}")
    if settings.configured:
        return getattr(settings, name, DEFAULTS[name])
    return DEFAULTS[name]


def nmax() -> int:
    """Qubit cap for the W1 computations.

    The ``QOTKIT_NMAX`` environment variable takes precedence over the setting.
    """
    raw = os.environ.get("QOTKIT_NMAX")
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer QOTKIT_NMAX={raw!r}")
        else:
            if value >= 1:
                return value
            logger.warning(f"Ignoring non-positive QOTKIT_NMAX={raw!r}")
    return int(get_setting("QOTKIT_NMAX"))
