import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from nilmix.exceptions import EXIT_OK, EXIT_SCHEMA
from nilmix.models import COMMANDS, FORMATS
from nilmix.services import run


class Command(BaseCommand):
    help = "Run one nilmix experiment from a JSON config and print the output path."

    def add_arguments(self, parser):
        parser.add_argument("experiment", choices=COMMANDS, help="Experiment to run")
        parser.add_argument("--config", required=True, help="Path to the experiment JSON config")
        parser.add_argument("--jobs", type=int, help="Worker cap; never changes results")
        parser.add_argument("--precision", type=int, help="Working precision in bits")
        parser.add_argument("--seed", type=int, help="Seed for splitting and Monte-Carlo streams")
        parser.add_argument("--out", help="Output path")
        parser.add_argument("--format", choices=FORMATS, help="Output format")

    def load_config(self, path: str):
        try:
            return json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise CommandError(f"Cannot read config {path}: {e.strerror}", returncode=EXIT_SCHEMA)
        except json.JSONDecodeError as e:
            raise CommandError(
                f"Malformed JSON in {path} at line {e.lineno} column {e.colno}: {e.msg}",
                returncode=EXIT_SCHEMA,
            )

    def handle(self, *args, **options):
        config = self.load_config(options["config"])
        if not isinstance(config, dict):
            raise CommandError("The config must be a JSON object", returncode=EXIT_SCHEMA)
        declared = config.get("command")
        if declared is not None and declared != options["experiment"]:
            raise CommandError(
                f"Config is for {declared!r}, not {options['experiment']!r}", returncode=EXIT_SCHEMA
            )
        config["command"] = options["experiment"]
        for flag in ("jobs", "precision", "seed"):
            if options[flag] is not None:
                config[flag] = options[flag]
        if options["out"] or options["format"]:
            output = config.get("output")
            output = dict(output) if isinstance(output, dict) else {}
            if options["out"]:
                output["path"] = options["out"]
            if options["format"]:
                output["format"] = options["format"]
            config["output"] = output

        outcome = run(config)
        if outcome.output is not None:
            self.stdout.write(str(outcome.output))
        if outcome.exit_status != EXIT_OK:
            raise CommandError(outcome.message, returncode=outcome.exit_status)
