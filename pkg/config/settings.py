"""
Django settings for the tamed NSDDE stability project.

The project has no web surface: Django supplies settings, logging,
management commands, the run ledger and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

from .nsdde_settings import NSDDE_DEFAULT_SETTINGS

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

# Nothing is served, but Django still wants a key.
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY', 'django-insecure-nsdde-local-experiments'
)

DEBUG = os.environ.get('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'nsdde',
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Experiment settings: defaults overridden from the environment

NSDDE = {
    **NSDDE_DEFAULT_SETTINGS,
    'WORKERS': int(
        os.environ.get('NSDDE_WORKERS', NSDDE_DEFAULT_SETTINGS['WORKERS'])
    ),
    'SEED': int(os.environ.get('NSDDE_SEED', NSDDE_DEFAULT_SETTINGS['SEED'])),
    'LOG_LEVEL': os.environ.get(
        'NSDDE_LOG_LEVEL', NSDDE_DEFAULT_SETTINGS['LOG_LEVEL']
    ),
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'nsdde': {
            'handlers': ['console'],
            'level': NSDDE['LOG_LEVEL'],
            'propagate': False,
        },
    },
}
