# dqd_steady/core/management/config_command.py
"""Base class of the simulation commands.

Every RunConfig key is accepted as `--key value` and overrides the file
named by `--config`. Service errors map onto stable exit codes:
1 configuration, 2 numerical, 3 I/O.
"""
import sys

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ArtifactError, ConfigurationError, NumericalError, ParameterError
from core.parsers import CONFIG_FIELDS, CHOICES, COUNT_KEYS, ConfigParser, RunConfig

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _arg_type(name):
    if name in COUNT_KEYS:
        return int
    if CONFIG_FIELDS[name].type.startswith("float"):
        return float
    return str


class ConfigCommand(BaseCommand):
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse errors raise CommandError (exit code 1) instead of exiting with 2
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except CommandError as exc:
            self.stderr.write(f"CommandError: {exc}")
            sys.exit(exc.returncode)

    def add_arguments(self, parser):
        parser.add_argument("--config", help="flat key = value run configuration file")
        for name in CONFIG_FIELDS:
            parser.add_argument(f"--{name}", dest=name, type=_arg_type(name),
                                choices=CHOICES.get(name), default=None)
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            cfg = ConfigParser().parse(options.get("config"), {name: options.get(name) for name in CONFIG_FIELDS})
            self.run(cfg, **options)
        except (ConfigurationError, ParameterError) as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
        except NumericalError as exc:
            raise CommandError(self.describe_numerical(exc), returncode=EXIT_NUMERICAL) from exc
        except (ArtifactError, OSError) as exc:
            raise CommandError(str(exc), returncode=EXIT_IO) from exc

    @staticmethod
    def describe_numerical(exc: NumericalError) -> str:
        details = ", ".join(f"{k}={v}" for k, v in sorted(exc.diagnostics.items()))
        return f"{exc} ({details})" if details else str(exc)

    def run(self, cfg: RunConfig, **options):
        raise NotImplementedError
