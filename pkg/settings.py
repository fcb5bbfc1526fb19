from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent

ATOMLENS_VERSION = '1.0.0'

# Only used by Django internals; nothing here is signed.
SECRET_KEY = config('SECRET_KEY', default='django-insecure-key-for-development-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    # Third-party apps
    'rest_framework',

    # Local apps
    'runs',
    'focalfield',
    'stark',
    'spectroscopy',
    'correlation',
    'sequence',
]

# Pure computation: no database.
DATABASES = {}

USE_TZ = True

# Run configuration
DEFAULT_CONFIG = config('DEFAULT_CONFIG', default=str(BASE_DIR / 'config' / 'experiment.yaml'))
OUTPUT_DIR = config('OUTPUT_DIR', default='output')
DEFAULT_SEED = config('DEFAULT_SEED', default=20080801, cast=int)
LINE_TABLE_PATH = config('LINE_TABLE_PATH', default=str(BASE_DIR / 'stark' / 'data' / 'rb87_lines.dat'))

# Numerics
QUADRATURE_RTOL = config('QUADRATURE_RTOL', default=1e-10, cast=float)
QUADRATURE_MIN_ORDER = config('QUADRATURE_MIN_ORDER', default=32, cast=int)
QUADRATURE_MAX_ORDER = config('QUADRATURE_MAX_ORDER', default=16384, cast=int)
FIT_MAX_NFEV = config('FIT_MAX_NFEV', default=2000, cast=int)

# joblib workers for scans and per-point synthesis; 1 runs inline
N_JOBS = config('N_JOBS', default=1, cast=int)

# REST Framework settings (serializers and JSON rendering only)
REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'COMPACT_JSON': False,
}

LOG_LEVEL = config('LOG_LEVEL', default='INFO')

# Simple logging configuration - console only
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '[{asctime}] {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}
