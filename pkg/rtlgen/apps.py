from django.apps import AppConfig


class RtlgenConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "rtlgen"
    verbose_name = "Verilog generation"
