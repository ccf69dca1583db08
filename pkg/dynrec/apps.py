from django.apps import AppConfig


class DynrecConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dynrec'
    verbose_name = 'Dynamic low-rank recovery'
