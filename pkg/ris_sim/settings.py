"""
Django settings for the ris_sim project.

The project has no web surface: Django provides the management-command CLI,
the ORM used by the result archive and the test runner. Everything tunable
at process level comes from the environment (optionally a .env file).
"""

from pathlib import Path
import os
import sys
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")


def _to_bool(value: str, default: bool = False) -> bool:
    if value is None:
        return default
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


# Security Configuration
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY")
if not SECRET_KEY:
    if os.getenv("DEBUG", "True").lower() == "true":
        SECRET_KEY = "dev-secret-key-for-development-only"
    else:
        print("ERROR: DJANGO_SECRET_KEY environment variable is required when DEBUG is off")
        sys.exit(1)

DEBUG = _to_bool(os.getenv("DEBUG"), default=True)
ALLOWED_HOSTS = []

# Simulation Configuration
SIM_DEFAULT_CONFIG = os.getenv("SIM_DEFAULT_CONFIG", "")
SIM_OUTPUT_DIR = os.getenv("SIM_OUTPUT_DIR", "results")
SIM_WORKERS = int(os.getenv("SIM_WORKERS", "1"))
SIM_LOG_LEVEL = os.getenv("SIM_LOG_LEVEL", "INFO").upper()
SIM_STORE_RESULTS = _to_bool(os.getenv("SIM_STORE_RESULTS"), default=False)

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "beamforming",
]

# Result archive (sqlite; set DATABASE_PATH to move it)
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.getenv("DATABASE_PATH", str(BASE_DIR / "db.sqlite3")),
    }
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "beamforming": {
            "handlers": ["console"],
            "level": SIM_LOG_LEVEL,
            "propagate": False,
        },
    },
}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
