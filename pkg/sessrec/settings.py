"""
Django settings for sessrec project.

sessrec is a batch engine: no URLs, templates or middleware are configured.
Every tunable is read from the environment (optionally via a .env file).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

from pathlib import Path
from dotenv import load_dotenv
import os

load_dotenv()


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Only used by Django internals; nothing here is signed or served.
SECRET_KEY = os.getenv('SESSREC_SECRET_KEY', 'sessrec-batch-engine-not-served')

DEBUG = os.getenv('SESSREC_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    # Local apps
    'core',
    'corpus',
    'numerics',
    'recommender',
    'training',
    'evaluation',
]


# Database
# https://docs.djangoproject.com/en/5.1/ref/settings/#databases
# The run registry lives in SQLite next to the project unless redirected.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('SESSREC_DB_PATH') or BASE_DIR / 'sessrec.sqlite3',
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.1/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.1/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Engine defaults
# Every key can be overridden with SESSREC_<KEY> in the environment.

SESSREC = {
    'THREADS': int(os.getenv('SESSREC_THREADS') or os.cpu_count() or 1),
    'RECORD_RUNS': os.getenv('SESSREC_RECORD_RUNS', '1') == '1',
    'DEFAULT_CUTOFFS': os.getenv('SESSREC_DEFAULT_CUTOFFS', '5,10,20'),
    'ENV_PREFIX': 'SESSREC_',
    'BENCH_WARMUP': int(os.getenv('SESSREC_BENCH_WARMUP', '1')),
}


# Logging
# https://docs.djangoproject.com/en/5.1/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname} {asctime} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': os.getenv('SESSREC_LOG_LEVEL', 'INFO'),
    },
}
