"""
Django settings for the feedpuf toolkit.

The toolkit runs as management commands only. Django is booted for its command
framework, configuration and test runner; no request handling is configured.

Every scalar default below can be overridden from the environment (or a .env
file) through python-decouple.
"""

from pathlib import Path

import dj_database_url
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config("SECRET_KEY", default="feedpuf-local-only")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "rest_framework",
    "pufs",
    "datasets",
    "metrics",
    "attacks",
    "rtlgen",
]

# Nothing is persisted; the database only has to exist for Django to boot.
DATABASES = {
    "default": dj_database_url.parse(
        config("DATABASE_URL", default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}")
    )
}

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

REST_FRAMEWORK = {
    "UNAUTHENTICATED_USER": None,
    "DEFAULT_RENDERER_CLASSES": ["rest_framework.renderers.JSONRenderer"],
    "DEFAULT_PARSER_CLASSES": ["rest_framework.parsers.JSONParser"],
    "COERCE_DECIMAL_TO_STRING": False,
}

LOG_LEVEL = config("FEEDPUF_LOG_LEVEL", default="INFO")

# Progress goes to stderr; stdout is reserved for command data.
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "loggers": {
        app: {"handlers": ["stderr"], "level": LOG_LEVEL, "propagate": False}
        for app in ("feedpuf", "pufs", "datasets", "metrics", "attacks", "rtlgen")
    },
}


FEEDPUF = {
    "VARIATION": {
        "mu": config("FEEDPUF_MU", default=1.0, cast=float),
        "sigma_random": config("FEEDPUF_SIGMA_RANDOM", default=0.05, cast=float),
        "sigma_systematic": config("FEEDPUF_SIGMA_SYSTEMATIC", default=0.0, cast=float),
        "jitter_sigma": config("FEEDPUF_JITTER_SIGMA", default=0.005, cast=float),
    },
    "CYCLES": config("FEEDPUF_CYCLES", default=64, cast=int),
    "METRICS": {
        "k": config("FEEDPUF_METRICS_K", default=10, cast=int),
        "m": config("FEEDPUF_METRICS_M", default=256, cast=int),
        "s": config("FEEDPUF_METRICS_S", default=8, cast=int),
        "c": config("FEEDPUF_METRICS_C", default=64, cast=int),
    },
    "ENV_SWEEP": [
        {"label": "nominal", "delay_scale": 1.0},
        {"label": "cold", "delay_scale": 0.97},
        {"label": "hot", "delay_scale": 1.03},
        {"label": "low-voltage", "delay_scale": 1.05},
        {"label": "high-voltage", "delay_scale": 0.95},
    ],
    "ATTACK": {
        "learning_rate": config("FEEDPUF_LEARNING_RATE", default=0.05, cast=float),
        "epochs": config("FEEDPUF_EPOCHS", default=50, cast=int),
        "batch_size": config("FEEDPUF_BATCH_SIZE", default=256, cast=int),
        "hidden": config("FEEDPUF_HIDDEN", default=64, cast=int),
    },
    "TABLE1": {
        "challenge_width": config("FEEDPUF_TABLE1_NC", default=64, cast=int),
        "num_challenges": config("FEEDPUF_TABLE1_CHALLENGES", default=50_000, cast=int),
        "cycles": config("FEEDPUF_TABLE1_CYCLES", default=8, cast=int),
        "feedback": {"arbiter": 4, "ring_oscillator": 16, "butterfly": 12},
        "faults": {"arbiter": 2, "ring_oscillator": 11, "butterfly": 7},
        "feature_map": "raw_plus_parity",
    },
    "TABLE2": {
        "challenge_width": 4,
        "response_width": 4,
        "feedback": {"arbiter": 4, "ring_oscillator": 4, "butterfly": 4},
        # each cyclic instance is its own netlist: own taps, own placement bias
        "distinct_designs": True,
        # routing bias on FPGA arbiter and butterfly layouts dominates the per-chip variation
        "variation_overrides": {
            "arbiter": {"sigma_systematic": 0.2, "sigma_random": 0.01},
            "butterfly": {"sigma_systematic": 0.2, "sigma_random": 0.01},
        },
    },
    "JOBS": config("FEEDPUF_JOBS", default=1, cast=int),
}
