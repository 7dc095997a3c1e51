from django.db import models


class ExperimentRun(models.Model):
    COMMAND_CHOICES = [
        ("spectrum", "Simultaneous spectrum"),
        ("ergodic", "Ergodicity certificate"),
        ("anosov", "Anosov check"),
        ("lyapunov-constant", "Lyapunov constant"),
        ("height", "Heights"),
        ("waldschmidt", "Waldschmidt bound"),
        ("sunit-search", "S-unit search"),
        ("mix-exact", "Exact multi-correlation"),
        ("mix-mc", "Monte-Carlo correlation"),
        ("shape", "Shape power law"),
        ("boxmap-check", "Box-map dichotomy"),
        ("cocycle", "Cocycle rigidity"),
    ]

    FORMAT_CHOICES = [
        ("json", "JSON"),
        ("csv", "CSV"),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    config_sha256 = models.CharField(max_length=64, db_index=True)
    resolved_config = models.JSONField(default=dict)
    exit_status = models.PositiveSmallIntegerField()
    output_path = models.CharField(max_length=500, blank=True)
    output_format = models.CharField(max_length=4, choices=FORMAT_CHOICES, default="json")
    version = models.CharField(max_length=20)
    message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.command} [{self.config_sha256[:12]}] -> {self.exit_status}"

    @property
    def falsified(self) -> bool:
        from nilmix.exceptions import EXIT_FALSIFICATION

        return self.exit_status == EXIT_FALSIFICATION


COMMANDS = [name for name, _ in ExperimentRun.COMMAND_CHOICES]
FORMATS = [name for name, _ in ExperimentRun.FORMAT_CHOICES]
