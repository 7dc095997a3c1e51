from django.apps import AppConfig


class NilmixConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "nilmix"
    verbose_name = "Mixing verification lab"
