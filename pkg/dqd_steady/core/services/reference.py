# dqd_steady/core/services/reference.py
"""Closed-system oracle: fixed-step RK4 for the driven two-level Schroedinger equation."""
from __future__ import annotations

import math

import numpy as np

from core.exceptions import ParameterError
from core.services.model import SIGMA_X, SIGMA_Z, ModelParams

# RK4 steps combined per vectorized block
STEP_BLOCK = 1 << 15


def _generator(p: ModelParams, t: np.ndarray) -> np.ndarray:
    drive = p.delta - 2.0 * p.Omega0 * np.cos(p.omega0 * t)
    h = -0.5 * p.epsilon * SIGMA_Z - 0.5 * drive[:, None, None] * SIGMA_X
    return -1j * h


def _rk4_step_matrices(p: ModelParams, starts: np.ndarray, h: float) -> np.ndarray:
    """One-step RK4 propagators psi_{n+1} = S_n psi_n for every start time."""
    a0 = _generator(p, starts)
    am = _generator(p, starts + 0.5 * h)
    a1 = _generator(p, starts + h)
    eye = np.eye(2, dtype=complex)
    k1 = a0
    k2 = am @ (eye + 0.5 * h * k1)
    k3 = am @ (eye + 0.5 * h * k2)
    k4 = a1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.eye(2, dtype=complex)[None]])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def unitary_reference(p: ModelParams, psi0, times, dt: float = 1e-4) -> np.ndarray:
    """Right-dot population |<r|psi(t)>|^2 at each requested time.

    Every interval between consecutive sample times is split into equal RK4
    steps no longer than dt.
    """
    times = np.asarray(times, dtype=float)
    if dt <= 0:
        raise ParameterError("dt must be positive")
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ParameterError("reference times must be non-negative and non-decreasing")
    psi = np.asarray(psi0, dtype=complex).reshape(2)
    t = 0.0
    out = np.empty(times.size)
    for i, target in enumerate(times):
        span = target - t
        if span > 0:
            n = max(1, math.ceil(span / dt - 1e-9))
            h = span / n
            for start in range(0, n, STEP_BLOCK):
                idx = np.arange(start, min(n, start + STEP_BLOCK))
                psi = _ordered_product(_rk4_step_matrices(p, t + idx * h, h)) @ psi
            t = target
        out[i] = abs(psi[1]) ** 2
    return out
