# dqd_steady/core/rules/main_rules.py
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List

from core.exceptions import NumericalError, ParameterError

from .base import Check, Context, Issue
from .checks import (
    ClosedSystemCheck, ConservationCheck, EtaIdentityCheck, FitCertificationCheck,
    GammaEstimateCheck, InitialStateCheck,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckOutcome:
    check: Check
    issues: List[Issue] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return not any(issue.failing for issue in self.issues)


# Runs every invariant check of a configuration and collects their issues
class ValidationSuite:
    def __init__(self, context: Context, checks=None):
        self.context = context
        self.checks = list(checks) if checks is not None else self._default_checks()

    def _default_checks(self):
        return [
            EtaIdentityCheck(),
            FitCertificationCheck(),
            ClosedSystemCheck(),
            ConservationCheck(),
            InitialStateCheck(),
            GammaEstimateCheck(),
        ]

    def run_all(self) -> List[CheckOutcome]:
        outcomes = []
        for check in self.checks:
            start = time.perf_counter()
            try:
                issues = check.run(self.context)
            except (NumericalError, ParameterError) as exc:
                logger.error("check %s raised %s", check.id, exc)
                issues = [Issue(check.id, "error", f"{type(exc).__name__}: {exc}")]
            outcome = CheckOutcome(check, issues, time.perf_counter() - start)
            logger.info("%s %s (%.1fs)", check.id, "passed" if outcome.passed else "FAILED", outcome.elapsed)
            outcomes.append(outcome)
        return outcomes

    @staticmethod
    def summary(outcomes) -> dict:
        """Counts by severity and the ids of failing checks."""
        severity_count = {"error": 0, "warning": 0, "info": 0}
        for outcome in outcomes:
            for issue in outcome.issues:
                severity_count[issue.severity] = severity_count.get(issue.severity, 0) + 1
        return {
            "checks": len(outcomes),
            "failed": [o.check.id for o in outcomes if not o.passed],
            "by_severity": severity_count,
        }
