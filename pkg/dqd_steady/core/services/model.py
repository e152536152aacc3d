# dqd_steady/core/services/model.py
"""Physical parameters and system Hamiltonians of the driven double dot.

Basis convention: index 0 = |l>, index 1 = |r>, sigma_z = diag(+1, -1).
All frequencies are in units of the drive frequency omega0, times in 1/omega0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum

import numpy as np

from core.exceptions import ParameterError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

RHO_LEFT = np.array([[1, 0], [0, 0]], dtype=complex)
RHO_RIGHT = np.array([[0, 0], [0, 1]], dtype=complex)

# drive amplitude of the 28 dB setting
REFERENCE_OMEGA0 = 0.034
REFERENCE_DB = 28.0


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    delta: float
    Omega0: float
    P: float
    omega_c: float
    d_cs: float
    kT: float
    omega0: float = 1.0

    def __post_init__(self):
        checks = {
            "omega0": self.omega0 > 0,
            "delta": self.delta >= 0,
            "Omega0": self.Omega0 >= 0,
            "P": self.P >= 0,
            "omega_c": self.omega_c > 0,
            "d_cs": self.d_cs >= 0,
            "kT": self.kT >= 0,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            raise ParameterError(f"Parameters out of range: {', '.join(bad)}")
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ParameterError(f"Parameter {f.name} is not finite")

    @property
    def beta(self) -> float:
        return math.inf if self.kT == 0 else 1.0 / self.kT

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega0

    def bath_key(self) -> dict:
        return {"P": self.P, "omega_c": self.omega_c, "d_cs": self.d_cs, "kT": self.kT}


def drive_amplitude(p: ModelParams, t: float) -> float:
    """Delta(t) = Delta - 2 Omega0 cos(omega0 t)."""
    return p.delta - 2.0 * p.Omega0 * math.cos(p.omega0 * t)


def lab_hamiltonian(p: ModelParams, t: float) -> np.ndarray:
    return -0.5 * p.epsilon * SIGMA_Z - 0.5 * drive_amplitude(p, t) * SIGMA_X


def polaron_hamiltonian(p: ModelParams, eta: float, t: float) -> np.ndarray:
    """Polaron-frame Hamiltonian with tunneling renormalized by eta.

    The constant shift -sum_k g_k^2/omega_k * I only adds a global phase
    and is dropped.
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta={eta} outside [0, 1]")
    return -0.5 * p.epsilon * SIGMA_Z - 0.5 * eta * drive_amplitude(p, t) * SIGMA_X


def splitting_and_detuning(p: ModelParams) -> tuple[float, float]:
    """Qubit splitting W = sqrt(eps^2 + Delta^2) and detuning W - omega0."""
    w = math.hypot(p.epsilon, p.delta)
    return w, w - p.omega0


def resonance_bias(p: ModelParams) -> float:
    """Bias eps* where W(eps*) = omega0; nan when Delta >= omega0."""
    if p.delta >= p.omega0:
        return math.nan
    return math.sqrt(p.omega0 ** 2 - p.delta ** 2)


def omega0_from_db(db: float, reference: float = REFERENCE_OMEGA0,
                   reference_db: float = REFERENCE_DB) -> float:
    """Drive amplitude for a microwave power setting in dB.

    28, 30 and 32 dB map to 0.034 * 10**n with n = 0, 0.1, 0.2.
    """
    return reference * 10.0 ** ((db - reference_db) / 20.0)


def interdot_separation_nm(d_cs: float, drive_hz: float = 32e9, c_s: float = 3000.0) -> float:
    omega0 = 2.0 * math.pi * drive_hz
    return d_cs / omega0 * c_s * 1e9


class Method(str, Enum):
    """Master-equation flavours; declaration order is the CSV row order."""
    WEAK = "weak"
    POLARON = "polaron"

    @classmethod
    def parse(cls, value: str) -> tuple[Method, ...]:
        if value == "both":
            return (cls.WEAK, cls.POLARON)
        try:
            return (cls(value),)
        except ValueError:
            raise ParameterError(f"unknown method {value!r}; expected weak, polaron or both") from None
