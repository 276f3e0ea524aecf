"""Minimal Django settings for the ``qotkit`` console script and the tests."""

import os


SECRET_KEY = os.environ.get("QOTKIT_SECRET_KEY", "qotkit-cli-not-secret")

DEBUG = False

INSTALLED_APPS = ["qotkit"]

DATABASES = {}

USE_TZ = True

# The QOTKIT_NMAX environment variable overrides this, see qotkit.conf.nmax
QOTKIT_NMAX = 4

QOTKIT_SOLVER_OPTIONS = {}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "{levelname} {name}: {message}", "style": "{"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "qotkit": {
            "handlers": ["console"],
            "level": os.environ.get("QOTKIT_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
    },
}
