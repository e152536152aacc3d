# dqd_steady/core/services/operator_algebra.py
"""Column-major vectorization and commutator superoperators for 2x2 operators.

vec(A X B) = (B^T kron A) vec(X) with vec stacking columns. Every
superoperator in the solvers is built by commutator_superop.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

_ID2 = np.eye(2, dtype=complex)
# vec(A^dagger) = conj(vec(A)[_ADJOINT_ORDER])
_ADJOINT_ORDER = np.array([0, 2, 1, 3])


class DensityReport(NamedTuple):
    trace: complex
    herm_defect: float
    eig_min: float
    eig_max: float


def vectorize(op: np.ndarray) -> np.ndarray:
    return np.asarray(op, dtype=complex).reshape(4, order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(2, 2, order="F")


def vec_adjoint(v: np.ndarray) -> np.ndarray:
    """vec(A^dagger) from vec(A); works on the last axis of stacked vectors."""
    return np.conj(v[..., _ADJOINT_ORDER])


def commutator_superop(op: np.ndarray, scale: complex = -1j) -> np.ndarray:
    """4x4 matrix of A -> scale * (op A - A op) acting on vec(A)."""
    op = np.asarray(op, dtype=complex)
    return scale * (np.kron(_ID2, op) - np.kron(op.T, _ID2))


def density_checks(rho: np.ndarray) -> DensityReport:
    """Trace, hermiticity defect and closed-form eigenvalues of the Hermitian part."""
    rho = np.asarray(rho, dtype=complex)
    trace = complex(rho[0, 0] + rho[1, 1])
    herm_defect = float(np.max(np.abs(rho - rho.conj().T)))
    h = 0.5 * (rho + rho.conj().T)
    mean = 0.5 * (h[0, 0].real + h[1, 1].real)
    radius = np.sqrt(0.25 * (h[0, 0].real - h[1, 1].real) ** 2 + abs(h[0, 1]) ** 2)
    return DensityReport(trace, herm_defect, float(mean - radius), float(mean + radius))


def batch_density_checks(rhos: np.ndarray):
    rhos = np.asarray(rhos, dtype=complex)
    traces = rhos[:, 0, 0] + rhos[:, 1, 1]
    herm = np.max(np.abs(rhos - np.conj(np.swapaxes(rhos, 1, 2))), axis=(1, 2))
    a = rhos[:, 0, 0].real
    d = rhos[:, 1, 1].real
    b = 0.5 * (rhos[:, 0, 1] + np.conj(rhos[:, 1, 0]))
    mean = 0.5 * (a + d)
    radius = np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
    return traces, herm, mean - radius, mean + radius
