# dqd_steady/core/parsers.py
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from django.conf import settings
from dotenv import dotenv_values

from core.exceptions import ConfigurationError, ParameterError
from core.services.kernels import FitSettings
from core.services.model import Method, ModelParams, omega0_from_db
from core.services.steady_sweep import SolverSettings

REQUIRED_KEYS = ("delta", "Omega0", "P", "omega_c", "d_cs", "kT")
CHOICES = {
    "method": ("weak", "polaron", "both"),
    "polaron_spectrum": ("exact", "lorentzian"),
    "strategy": ("joint", "frozen"),
}
TOLERANCE_KEYS = ("rtol", "atol", "quad_tol", "fit_tol_kernel", "fit_tol_spectral", "fit_tol_weak",
                  "steady_tol")
COUNT_KEYS = ("eps_steps", "max_periods", "workers", "n_terms_max", "m_max",
              "kernel_samples", "samples_per_period", "shoulder_run")


@dataclass
class RunConfig:
    delta: float
    Omega0: float
    P: float
    omega_c: float
    d_cs: float
    kT: float
    omega0: float = 1.0
    epsilon: float = 0.0
    drive_db: float | None = None
    method: str = "polaron"
    eps_min: float = 0.6
    eps_max: float = 1.6
    eps_steps: int = 101
    rtol: float = 1e-9
    atol: float = 1e-11
    quad_tol: float = 1e-8
    fit_tol_kernel: float = 1e-4
    fit_tol_spectral: float = 2e-4
    fit_tol_weak: float = 3e-2
    steady_tol: float = 1e-6
    max_periods: int = 400
    workers: int = 1
    n_terms_max: int = 12
    m_max: int = 40
    tau_max: float = 50.0
    kernel_samples: int = 2048
    samples_per_period: int = 64
    weak_coupling_factor: float = 10.0
    polaron_spectrum: str = "exact"
    strategy: str = "joint"
    asym_inner: float = 0.05
    asym_outer: float = 0.35
    shoulder_slope_fraction: float = 0.2
    shoulder_run: int = 3
    shoulder_baseline_factor: float = 2.0
    fit_dir: str = "fits"
    output_path: str = "sweep.csv"

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.epsilon, self.delta, self.Omega0, self.P, self.omega_c,
                           self.d_cs, self.kT, self.omega0)

    @property
    def methods(self) -> tuple[Method, ...]:
        return Method.parse(self.method)

    def eps_grid(self) -> np.ndarray:
        return np.linspace(self.eps_min, self.eps_max, self.eps_steps)

    def fit_settings(self) -> FitSettings:
        return FitSettings.from_config(self)

    def solver_settings(self) -> SolverSettings:
        return SolverSettings.from_config(self)


CONFIG_FIELDS = {f.name: f for f in fields(RunConfig)}
KNOWN_KEYS = frozenset(CONFIG_FIELDS)


def _convert(key: str, raw):
    kind = CONFIG_FIELDS[key].type
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key in COUNT_KEYS:
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {raw!r} as a number", keys=[key]) from None
    if key in CHOICES and text not in CHOICES[key]:
        raise ConfigurationError(f"{key}: {text!r} is not one of {', '.join(CHOICES[key])}", keys=[key])
    return text


class ConfigParser:
    """Flat `key = value` run configuration; command-line values override file values."""

    def __init__(self, defaults: dict | None = None):
        self.defaults = dict(settings.DQD_DEFAULTS if defaults is None else defaults)

    def read(self, path) -> dict:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        values = dotenv_values(path, interpolate=False)
        empty = [key for key, value in values.items() if value is None]
        if empty:
            raise ConfigurationError(f"keys without a value: {', '.join(empty)}", keys=empty)
        return dict(values)

    def parse(self, path=None, overrides: dict | None = None) -> RunConfig:
        raw = self.read(path) if path else {}
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

        unknown = sorted(set(raw) - KNOWN_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown keys: {', '.join(unknown)}", keys=unknown)
        required = [k for k in REQUIRED_KEYS if not (k == "Omega0" and "drive_db" in raw)]
        missing = [k for k in required if k not in raw]
        if missing:
            raise ConfigurationError(f"missing required keys: {', '.join(missing)}", keys=missing)

        values = {k: v for k, v in self.defaults.items() if k in KNOWN_KEYS}
        values.update({k: _convert(k, v) for k, v in raw.items()})
        if values.get("drive_db") is not None:
            values["Omega0"] = omega0_from_db(values["drive_db"])
        cfg = RunConfig(**values)
        self.validate(cfg)
        return cfg

    def validate(self, cfg: RunConfig) -> None:
        if not cfg.eps_min < cfg.eps_max:
            raise ConfigurationError(
                f"eps_min={cfg.eps_min} must be below eps_max={cfg.eps_max}", keys=["eps_min", "eps_max"])
        bad = [k for k in TOLERANCE_KEYS if not getattr(cfg, k) > 0]
        bad += [k for k in COUNT_KEYS if getattr(cfg, k) < 1]
        bad += [k for k in ("tau_max", "weak_coupling_factor") if not getattr(cfg, k) > 0]
        if not 0 < cfg.asym_inner < cfg.asym_outer:
            bad.append("asym_inner")
        if bad:
            raise ConfigurationError(f"values out of range: {', '.join(bad)}", keys=bad)
        try:
            cfg.params
        except ParameterError as exc:
            raise ConfigurationError(str(exc)) from exc

    def dump(self, cfg: RunConfig) -> str:
        lines = []
        for name in CONFIG_FIELDS:
            value = getattr(cfg, name)
            if value is None:
                continue
            lines.append(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")
        return "\n".join(lines) + "\n"
