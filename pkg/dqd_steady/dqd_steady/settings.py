"""
Django settings for dqd_steady project.

The project has no web surface: the `core` app ships the simulation
services and the management commands (`fit_bath`, `sweep`, `dynamics`,
`validate`). Every simulation default below can be overridden through
the environment (or a `.env` file next to manage.py) as DQD_<KEY>.
"""

from pathlib import Path
from dotenv import load_dotenv
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv("SECRET_KEY", "dev-secret")

DEBUG = os.getenv("DEBUG", "1") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'core',
]

# No models, no database: the test suite only uses SimpleTestCase.
DATABASES = {}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ = True


#### Simulation defaults
# All frequencies in units of the drive frequency omega0, times in 1/omega0.

def _env_float(name, default):
    return float(os.getenv(f"DQD_{name.upper()}", default))


def _env_int(name, default):
    return int(os.getenv(f"DQD_{name.upper()}", default))


DQD_DEFAULTS = {
    "omega0": 1.0,
    "epsilon": 0.0,
    "method": os.getenv("DQD_METHOD", "polaron"),
    "eps_min": 0.6,
    "eps_max": 1.6,
    "eps_steps": 101,
    "rtol": _env_float("rtol", 1e-9),
    "atol": _env_float("atol", 1e-11),
    "quad_tol": _env_float("quad_tol", 1e-8),
    "fit_tol_kernel": _env_float("fit_tol_kernel", 1e-4),
    "fit_tol_spectral": _env_float("fit_tol_spectral", 2e-4),
    "fit_tol_weak": _env_float("fit_tol_weak", 3e-2),
    "steady_tol": _env_float("steady_tol", 1e-6),
    "max_periods": _env_int("max_periods", 400),
    "workers": _env_int("workers", os.cpu_count() or 1),
    "n_terms_max": _env_int("n_terms_max", 12),
    "m_max": _env_int("m_max", 40),
    "tau_max": _env_float("tau_max", 50.0),
    "kernel_samples": _env_int("kernel_samples", 2048),
    "samples_per_period": _env_int("samples_per_period", 64),
    "weak_coupling_factor": _env_float("weak_coupling_factor", 10.0),
    "polaron_spectrum": os.getenv("DQD_POLARON_SPECTRUM", "exact"),
    "fit_dir": os.getenv("DQD_FIT_DIR", str(BASE_DIR / "fits")),
    "strategy": os.getenv("DQD_STRATEGY", "joint"),
    "asym_inner": 0.05,
    "asym_outer": 0.35,
    "shoulder_slope_fraction": 0.2,
    "shoulder_run": 3,
    "shoulder_baseline_factor": 2.0,
    "output_path": os.getenv("DQD_OUTPUT_PATH", "sweep.csv"),
}


#### Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "core": {
            "handlers": ["console"],
            "level": os.getenv("DQD_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
