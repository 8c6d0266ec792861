from django.apps import AppConfig


class PufsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "pufs"
    verbose_name = "PUF simulation"
