# dqd_steady/core/services/weak_solver.py
"""Weak-coupling master equation in auxiliary-operator (time-local) form.

    d rho/dt = L_s(t) rho - i [sigma_z, S + S^dagger],   S = sum_m K_m
    d K_m/dt = L_s(t) K_m + gamma_m K_m - i alpha_m sigma_z rho

with L_s(t) rho = -i [H_s(t), rho] and K_m(0) = 0.
"""
from __future__ import annotations

import numpy as np

from core.exceptions import ParameterError
from core.services.expfit import ExpFit
from core.services.integrator import MasterEquationSolver, Trajectory
from core.services.model import IDENTITY, RHO_LEFT, SIGMA_X, SIGMA_Z, Method, ModelParams, drive_amplitude
from core.services.operator_algebra import commutator_superop, vec_adjoint

_COMM_Z = commutator_superop(SIGMA_Z)
_COMM_X = commutator_superop(SIGMA_X)
# vec(sigma_z X) = (I kron sigma_z) vec(X)
_LEFT_Z = np.kron(IDENTITY, SIGMA_Z)


class WeakSolver(MasterEquationSolver):
    method = Method.WEAK

    def __init__(self, p: ModelParams, fit: ExpFit, rtol: float = 1e-9, atol: float = 1e-11):
        super().__init__(p, rtol, atol)
        self.fit = fit
        self.alpha = np.asarray(fit.alpha, dtype=complex)
        self.gamma = np.asarray(fit.gamma, dtype=complex)
        self.n_aux = fit.n_terms

    def system_superop(self, t: float) -> np.ndarray:
        return -0.5 * self.p.epsilon * _COMM_Z - 0.5 * drive_amplitude(self.p, t) * _COMM_X

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        lsys = self.system_superop(t)
        rho = y[:4]
        aux = y[4:].reshape(self.n_aux, 4)
        total = aux.sum(axis=0)
        out = np.empty_like(y)
        out[:4] = lsys @ rho + _COMM_Z @ (total + vec_adjoint(total))
        source = -1j * np.outer(self.alpha, _LEFT_Z @ rho)
        out[4:] = (aux @ lsys.T + self.gamma[:, None] * aux + source).ravel()
        return out

    def stationary_population(self) -> float:
        if self.p.Omega0 != 0:
            raise ParameterError("stationary_population needs a time-independent generator (Omega0 = 0)")
        return self.null_population(self.linear_generator())


def integrate_weak(p: ModelParams, fit: ExpFit, rho0=RHO_LEFT, t_end: float = 1.0,
                   rtol: float = 1e-9, atol: float = 1e-11, samples: int = 2, t_eval=None) -> Trajectory:
    return WeakSolver(p, fit, rtol, atol).integrate(rho0, t_end, samples, t_eval)
