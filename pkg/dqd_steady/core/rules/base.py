# dqd_steady/core/rules/base.py
from __future__ import annotations

from functools import cached_property
from typing import List

from core.parsers import RunConfig
from core.services.kernels import BathFits, load_or_fit


class Issue:
    def __init__(self, check_id, severity, message, value=None, limit=None):
        self.check_id = check_id
        self.severity = severity
        self.message = message
        self.value = value
        self.limit = limit

    @property
    def failing(self) -> bool:
        return self.severity == "error"

    def __str__(self):
        return f"[{self.severity}] {self.check_id}: {self.message}"

    def __repr__(self):
        return self.__str__()


class Check:
    id: str = ""
    description: str = ""
    severity: str = "error"

    def run(self, context: Context) -> List[Issue]:
        return []

    def issue(self, message, value=None, limit=None, severity=None) -> Issue:
        return Issue(self.id, severity or self.severity, message, value, limit)

    def note(self, message, value=None) -> Issue:
        return Issue(self.id, "info", message, value)


class Context:
    """What every check sees: the run configuration and lazily loaded bath fits."""

    def __init__(self, cfg: RunConfig, fits: BathFits | None = None):
        self.cfg = cfg
        self.params = cfg.params
        self.fit_settings = cfg.fit_settings()
        self.solver_settings = cfg.solver_settings()
        if fits is not None:
            self.__dict__["fits"] = fits

    @cached_property
    def fits(self) -> BathFits:
        return load_or_fit(self.params, self.fit_settings, self.cfg.fit_dir, self.cfg.methods)
