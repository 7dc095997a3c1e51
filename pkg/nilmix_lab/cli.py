"""Console entry point: ``nilmix <command> --config <path> [options]``."""

import os
import sys


def main():
    """Run one experiment through the ``nilmix`` management command."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "nilmix_lab.settings")
    try:
        import django
        from django.core.management import call_command, execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc

    django.setup()

    from nilmix.conf import get_setting

    if get_setting("RECORD_RUNS"):
        # The ledger table must exist before the first run is recorded.
        call_command("migrate", "nilmix", verbosity=0, interactive=False)

    execute_from_command_line([sys.argv[0], "nilmix", *sys.argv[1:]])


if __name__ == "__main__":
    main()
