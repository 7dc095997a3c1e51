"""
Django settings for the nilmix_lab project.

The project hosts a single app, ``nilmix``, exposed through the ``nilmix``
management command. There is no HTTP surface; the database only keeps the
experiment run ledger.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# No sessions, no request signing; the key only satisfies Django's startup check.
SECRET_KEY = os.environ.get("NILMIX_SECRET_KEY", "nilmix-batch-runner-not-a-secret")

DEBUG = False

ALLOWED_HOSTS: list = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "rest_framework",
    "nilmix",
]

MIDDLEWARE: list = []


# Database (run ledger only)

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.environ.get("NILMIX_DB_PATH", str(BASE_DIR / "db.sqlite3")),
    }
}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Django REST Framework settings
REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": [
        "rest_framework.renderers.JSONRenderer",
    ],
    "DEFAULT_PARSER_CLASSES": [
        "rest_framework.parsers.JSONParser",
    ],
    "UNAUTHENTICATED_USER": None,
}

# Logging goes to stderr; stdout is reserved for the output path of a run.
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "loggers": {
        "nilmix": {
            "handlers": ["stderr"],
            "level": os.environ.get("NILMIX_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}

# Lab defaults. Every key can be overridden per run from the experiment JSON
# or the command line; see nilmix.conf.
NILMIX = {
    "PRECISION_BITS": 128,
    "PRECISION_CAP_BITS": 4096,
    "SPLIT_RETRIES": 20,
    "SPLIT_COEFFICIENT_BOUND": 10,
    "SPLIT_SEED": 0,
    "KERNEL_SEARCH_RADIUS": 2,
    "ENUMERATION_BUDGET": 10**8,
    "SAMPLE_BUDGET": 10**8,
    "MC_CHUNK_SIZE": 2**16,
    "JOBS": 1,
    "SEED": 0,
    "WALDSCHMIDT": {"c": 1, "c1": 1, "c2": "e", "c3": "e"},
    "BOXMAP": {"L1": 1, "L2": 1, "C1": 1, "C2": 1, "delta0": 0.5},
    "ORBIT_HORIZON": 8,
    "ORBIT_STEP_LIMIT": 10**4,
    "RECORD_RUNS": True,
}
