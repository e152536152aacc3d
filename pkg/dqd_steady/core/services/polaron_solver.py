# dqd_steady/core/services/polaron_solver.py
"""Full-polaron master equation with auxiliary operators D_{ii,m}.

In the polaron frame H'(t) = -(eps/2) sigma_z - (eta Delta(t)/2) sigma_x and

    d rho'/dt = -i [H', rho'] + sum_i i (Delta(t)/2) [sigma_i, S_i rho' + rho' S_i^dagger]
    d D_im/dt = -i [H', D_im] + gamma_im D_im + i alpha_im (Delta(t)/2) sigma_i

with S_i = sum_m D_im, sigma_1 = sigma_x and sigma_2 = sigma_y. The D
subsystem does not depend on rho', so it can be integrated jointly or first
and on its own ("frozen" strategy).
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from core.exceptions import IntegrationError, ParameterError
from core.services.expfit import ExpFit
from core.services.integrator import MasterEquationSolver, Trajectory, sample_grid
from core.services.model import (
    RHO_LEFT, SIGMA_X, SIGMA_Y, SIGMA_Z, Method, ModelParams, drive_amplitude,
)
from core.services.operator_algebra import commutator_superop, devectorize, vectorize

_COMM_Z = commutator_superop(SIGMA_Z)
_COMM_X = commutator_superop(SIGMA_X)
STRATEGIES = ("joint", "frozen")


def population_right(rho):
    """Right-dot population; the projector commutes with the polaron transformation.

    Accepts one 2x2 matrix or an (n, 2, 2) stack.
    """
    value = np.real(np.asarray(rho)[..., 1, 1])
    return float(value) if value.ndim == 0 else value


class PolaronSolver(MasterEquationSolver):
    method = Method.POLARON

    def __init__(self, p: ModelParams, eta: float, fit11: ExpFit, fit22: ExpFit,
                 rtol: float = 1e-9, atol: float = 1e-11, strategy: str = "joint"):
        super().__init__(p, rtol, atol)
        if not 0.0 <= eta <= 1.0:
            raise ParameterError(f"eta={eta} outside [0, 1]")
        if strategy not in STRATEGIES:
            raise ParameterError(f"unknown integration strategy {strategy!r}")
        self.eta = eta
        self.strategy = strategy
        self.n1 = fit11.n_terms
        self.n_aux = fit11.n_terms + fit22.n_terms
        self.alpha = np.concatenate([fit11.alpha, fit22.alpha]).astype(complex)
        self.gamma = np.concatenate([fit11.gamma, fit22.gamma]).astype(complex)
        # vec(sigma_i) for the source term of each auxiliary operator
        self._sources = np.array([vectorize(SIGMA_X)] * self.n1
                                 + [vectorize(SIGMA_Y)] * (self.n_aux - self.n1)).reshape(self.n_aux, 4)

    def system_superop(self, t: float) -> np.ndarray:
        return -0.5 * self.p.epsilon * _COMM_Z - 0.5 * self.eta * drive_amplitude(self.p, t) * _COMM_X

    def aux_rhs(self, t: float, d: np.ndarray) -> np.ndarray:
        aux = d.reshape(self.n_aux, 4)
        half = 0.5 * drive_amplitude(self.p, t)
        source = 1j * half * self.alpha[:, None] * self._sources
        return (aux @ self.system_superop(t).T + self.gamma[:, None] * aux + source).ravel()

    def rho_rhs(self, t: float, rho_vec: np.ndarray, d: np.ndarray) -> np.ndarray:
        aux = d.reshape(self.n_aux, 4)
        half = 0.5 * drive_amplitude(self.p, t)
        rho = devectorize(rho_vec)
        out = self.system_superop(t) @ rho_vec
        for sigma, rows in ((SIGMA_X, aux[:self.n1]), (SIGMA_Y, aux[self.n1:])):
            if rows.shape[0] == 0:
                continue
            s = devectorize(rows.sum(axis=0))
            x = s @ rho + rho @ s.conj().T
            out = out + 1j * half * vectorize(sigma @ x - x @ sigma)
        return out

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        d = y[4:]
        return np.concatenate([self.rho_rhs(t, y[:4], d), self.aux_rhs(t, d)])

    def advance(self, y0, t0: float, t1: float, t_eval=None):
        if self.strategy == "joint" or self.n_aux == 0:
            return super().advance(y0, t0, t1, t_eval)
        return self._advance_frozen(np.asarray(y0, dtype=complex), t0, t1, t_eval)

    def _advance_frozen(self, y0, t0, t1, t_eval):
        """D first with dense output, then rho' with D read from the interpolant."""
        aux = solve_ivp(self.aux_rhs, (t0, t1), y0[4:], method="RK45", dense_output=True,
                        rtol=self.rtol, atol=self.atol)
        if aux.status != 0:
            raise IntegrationError(f"auxiliary integration failed: {aux.message}", message=aux.message)
        t_eval, extra = sample_grid(t_eval, t0, t1)
        sol = solve_ivp(lambda t, r: self.rho_rhs(t, r, aux.sol(t)), (t0, t1), y0[:4],
                        method="RK45", t_eval=t_eval, rtol=self.rtol, atol=self.atol)
        if sol.status != 0:
            raise IntegrationError(f"polaron integration failed: {sol.message}", message=sol.message)
        states = np.vstack([sol.y, aux.sol(sol.t)])
        return states[:, -1], states[:, :-1] if extra else states

    def stationary_aux(self) -> np.ndarray:
        lsys = self.system_superop(0.0)
        half = 0.5 * drive_amplitude(self.p, 0.0)
        rows = []
        for alpha, gamma, source in zip(self.alpha, self.gamma, self._sources):
            rows.append(np.linalg.solve(lsys + gamma * np.eye(4), -1j * half * alpha * source))
        return np.concatenate(rows) if rows else np.zeros(0, dtype=complex)

    def stationary_population(self) -> float:
        if self.p.Omega0 != 0:
            raise ParameterError("stationary_population needs a time-independent generator (Omega0 = 0)")
        d = self.stationary_aux()
        basis = np.eye(4, dtype=complex)
        generator = np.column_stack([self.rho_rhs(0.0, basis[:, j], d) for j in range(4)])
        return self.null_population(generator)


def integrate_polaron(p: ModelParams, eta: float, fit11: ExpFit, fit22: ExpFit, rho0=RHO_LEFT,
                      t_end: float = 1.0, rtol: float = 1e-9, atol: float = 1e-11, samples: int = 2,
                      t_eval=None, strategy: str = "joint") -> Trajectory:
    solver = PolaronSolver(p, eta, fit11, fit22, rtol, atol, strategy)
    return solver.integrate(rho0, t_end, samples, t_eval)
