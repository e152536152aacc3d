# dqd_steady/core/management/commands/validate.py
from django.core.management.base import CommandError

from core.management.config_command import EXIT_NUMERICAL, ConfigCommand
from core.rules.base import Context
from core.rules.main_rules import ValidationSuite


class Command(ConfigCommand):
    help = "Run the invariant checks for a configuration; exit 0 only when all pass."

    def run(self, cfg, **options):
        suite = ValidationSuite(Context(cfg))
        outcomes = suite.run_all()
        for outcome in outcomes:
            status = self.style.SUCCESS("PASS") if outcome.passed else self.style.ERROR("FAIL")
            self.stdout.write(f"{status}  {outcome.check.id:<8} {outcome.check.description} "
                              f"({outcome.elapsed:.1f}s)")
            for issue in outcome.issues:
                self.stdout.write(f"      {issue}")
        summary = suite.summary(outcomes)
        if summary["failed"]:
            raise CommandError(f"validation failed: {', '.join(summary['failed'])}", returncode=EXIT_NUMERICAL)
        self.stdout.write(self.style.SUCCESS(f"all {summary['checks']} checks passed"))
