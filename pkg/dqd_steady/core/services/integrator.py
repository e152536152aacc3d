# dqd_steady/core/services/integrator.py
"""Shared machinery of the two master-equation solvers.

A solver state is one flat complex vector: vec(rho) (column-major) followed
by the auxiliary operators, four entries each. Integration uses scipy's
RK45 (Dormand-Prince 5(4)) with samples requested through t_eval.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from core.exceptions import IntegrationError, ParameterError
from core.services.model import RHO_LEFT, ModelParams
from core.services.operator_algebra import batch_density_checks, devectorize, vectorize

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["t", "population_right", "trace_re", "trace_im", "herm_defect", "eig_min"]


def sample_grid(t_eval, t0: float, t1: float):
    """t_eval clipped to [t0, t1], with t1 appended unless it is already the last sample."""
    if t_eval is None:
        return None, False
    t_eval = np.clip(np.asarray(t_eval, dtype=float), t0, t1)
    if t_eval.size and t_eval[-1] == t1:
        return t_eval, False
    return np.append(t_eval, t1), True


@dataclass
class Trajectory:
    times: np.ndarray
    population_right: np.ndarray
    trace: np.ndarray
    herm_defect: np.ndarray
    eig_min: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("trajectory sample times must be strictly increasing")

    @classmethod
    def from_states(cls, times, rhos) -> Trajectory:
        rhos = np.asarray(rhos, dtype=complex)
        traces, herm, eig_min, _ = batch_density_checks(rhos)
        return cls(np.asarray(times, dtype=float), rhos[:, 1, 1].real, traces, herm, eig_min, rhos)

    @property
    def max_trace_defect(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0))) if self.times.size else 0.0

    @property
    def max_herm_defect(self) -> float:
        return float(np.max(self.herm_defect)) if self.times.size else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times,
            "population_right": self.population_right,
            "trace_re": self.trace.real,
            "trace_im": self.trace.imag,
            "herm_defect": self.herm_defect,
            "eig_min": self.eig_min,
        }, columns=TRAJECTORY_COLUMNS)


class MasterEquationSolver:
    """Base class: subclasses provide n_aux, rhs(t, y) and stationary_population()."""

    method = None
    n_aux = 0

    def __init__(self, p: ModelParams, rtol: float = 1e-9, atol: float = 1e-11):
        if rtol <= 0 or atol <= 0:
            raise ParameterError("integrator tolerances must be positive")
        self.p = p
        self.rtol = rtol
        self.atol = atol

    @property
    def dim(self) -> int:
        return 4 * (1 + self.n_aux)

    def initial_state(self, rho0=RHO_LEFT) -> np.ndarray:
        y0 = np.zeros(self.dim, dtype=complex)
        y0[:4] = vectorize(rho0)
        return y0

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def stationary_population(self) -> float:
        raise NotImplementedError

    @staticmethod
    def rhos(states: np.ndarray) -> np.ndarray:
        return np.asarray(states)[:4].T.reshape(-1, 2, 2).transpose(0, 2, 1)

    def advance(self, y0, t0: float, t1: float, t_eval=None):
        """Integrate from t0 to t1; returns (state at t1, states at t_eval as (dim, n))."""
        t_eval, extra = sample_grid(t_eval, t0, t1)
        sol = solve_ivp(self.rhs, (t0, t1), np.asarray(y0, dtype=complex), method="RK45",
                        t_eval=t_eval, rtol=self.rtol, atol=self.atol)
        if sol.status != 0:
            reached = float(sol.t[-1]) if sol.t.size else t0
            raise IntegrationError(
                f"{self.method} integration failed at t={reached:.6g}: {sol.message}",
                t=reached, nfev=sol.nfev, message=sol.message,
            )
        return sol.y[:, -1], sol.y[:, :-1] if extra else sol.y

    def integrate(self, rho0=RHO_LEFT, t_end: float = 1.0, samples: int = 2, t_eval=None) -> Trajectory:
        if t_end <= 0:
            raise ParameterError("t_end must be positive")
        times = np.linspace(0.0, t_end, samples) if t_eval is None else np.asarray(t_eval, dtype=float)
        _, states = self.advance(self.initial_state(rho0), 0.0, t_end, times)
        return Trajectory.from_states(times, self.rhos(states))

    def linear_generator(self, offset=None) -> np.ndarray:
        """Matrix of y -> rhs(0, y) - offset for a rhs linear up to the constant offset."""
        basis = np.eye(self.dim, dtype=complex)
        if offset is None:
            offset = np.zeros(self.dim, dtype=complex)
        return np.column_stack([self.rhs(0.0, basis[:, j]) - offset for j in range(self.dim)])

    @staticmethod
    def null_population(generator: np.ndarray) -> float:
        """Right-dot population of the eigenvector with eigenvalue of largest real part.

        The leading four entries of the eigenvector are vec(rho); they are
        normalized to unit trace.
        """
        values, vectors = np.linalg.eig(generator)
        vec = vectors[:, int(np.argmax(values.real))]
        rho = devectorize(vec[:4])
        trace = rho[0, 0] + rho[1, 1]
        if abs(trace) < 1e-14:
            raise IntegrationError("stationary vector has vanishing trace")
        return float((rho[1, 1] / trace).real)
