from django.apps import AppConfig


class QotkitConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "qotkit"
    verbose_name = "Quantum optimal transport toolkit"
