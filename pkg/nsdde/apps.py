from django.apps import AppConfig


class NsddeConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'nsdde'
    verbose_name = 'Tamed NSDDE stability'
