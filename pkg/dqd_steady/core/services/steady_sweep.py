# dqd_steady/core/services/steady_sweep.py
"""Period-averaged steady states, bias sweeps and blue/red asymmetry reports."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from core.exceptions import ArtifactError, NumericalError, ParameterError
from core.services.integrator import MasterEquationSolver
from core.services.kernels import BathFits, FitSettings, fit_bath
from core.services.model import RHO_LEFT, Method, ModelParams
from core.services.operator_algebra import batch_density_checks
from core.services.polaron_solver import PolaronSolver, population_right
from core.services.weak_solver import WeakSolver

logger = logging.getLogger(__name__)

STEADY_STREAK = 3
SWEEP_COLUMNS = ["epsilon_over_w0", "method", "M0", "min_eig_steady", "converged", "periods_used", "residual"]


@dataclass(frozen=True)
class SteadyResult:
    M0: float
    periods_used: int
    converged: bool
    min_eig_steady: float
    residual: float
    max_trace_defect: float = 0.0
    max_herm_defect: float = 0.0

    @property
    def positivity_violation(self) -> bool:
        return self.min_eig_steady < 0

    @classmethod
    def failed(cls) -> SteadyResult:
        return cls(math.nan, 0, False, math.nan, math.nan, math.nan, math.nan)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    method: Method
    result: SteadyResult

    def as_record(self) -> dict:
        r = self.result
        return {
            "epsilon_over_w0": self.epsilon,
            "method": self.method.value,
            "M0": r.M0,
            "min_eig_steady": r.min_eig_steady,
            "converged": "true" if r.converged else "false",
            "periods_used": r.periods_used,
            "residual": r.residual,
        }


@dataclass(frozen=True)
class SolverSettings:
    rtol: float = 1e-9
    atol: float = 1e-11
    steady_tol: float = 1e-6
    max_periods: int = 400
    samples_per_period: int = 64
    strategy: str = "joint"

    @classmethod
    def from_config(cls, cfg, **overrides) -> SolverSettings:
        values = {name: getattr(cfg, name) for name in cls.__dataclass_fields__ if hasattr(cfg, name)}
        values.update(overrides)
        return cls(**values)


class AsymmetryReport(NamedTuple):
    blue_mean: float
    red_mean: float
    shoulder_detected: bool
    applicable: bool = True
    eps_star: float = math.nan
    plateau_mean: float = math.nan


def run_to_steady(solver: MasterEquationSolver, steady_tol: float, max_periods: int,
                  samples_per_period: int = 64, rho0=RHO_LEFT) -> SteadyResult:
    """Integrate period by period until the period average settles.

    Steady means |m_k - m_{k-1}| <= steady_tol for STEADY_STREAK consecutive
    periods. Reaching max_periods returns an unconverged result.
    """
    if samples_per_period < 2:
        raise ParameterError("samples_per_period must be at least 2")
    period = solver.p.period
    y = solver.initial_state(rho0)
    grid = np.linspace(0.0, 1.0, samples_per_period + 1)
    previous = None
    streak = 0
    residual = math.inf
    average = math.nan
    min_eig = math.nan
    trace_defect = 0.0
    herm_defect = 0.0
    converged = False
    periods = 0
    for k in range(max_periods):
        t0 = k * period
        times = t0 + period * grid
        y, states = solver.advance(y, t0, t0 + period, times)
        rhos = solver.rhos(states)
        traces, herm, eig_min, _ = batch_density_checks(rhos)
        trace_defect = max(trace_defect, float(np.max(np.abs(traces - 1.0))))
        herm_defect = max(herm_defect, float(np.max(herm)))
        min_eig = float(np.min(eig_min))
        average = float(trapezoid(population_right(rhos), times) / period)
        periods = k + 1
        if previous is not None:
            residual = abs(average - previous)
            streak = streak + 1 if residual <= steady_tol else 0
        previous = average
        if streak >= STEADY_STREAK:
            converged = True
            break
    if not converged:
        logger.debug("no steady state after %d periods (residual %.3e)", periods, residual)
    return SteadyResult(average, periods, converged, min_eig, residual, trace_defect, herm_defect)


def build_solver(p: ModelParams, method: Method, fits: BathFits,
                 settings: SolverSettings) -> MasterEquationSolver:
    if method is Method.WEAK:
        return WeakSolver(p, fits.weak, settings.rtol, settings.atol)
    return PolaronSolver(p, fits.eta, fits.c11, fits.c22, settings.rtol, settings.atol, settings.strategy)


def solve_point(task):
    index, p, method, fits, settings = task
    try:
        solver = build_solver(p, method, fits, settings)
        result = run_to_steady(solver, settings.steady_tol, settings.max_periods, settings.samples_per_period)
    except NumericalError as exc:
        logger.warning("eps=%.6g %s failed: %s", p.epsilon, method.value, exc)
        return index, SteadyResult.failed()
    if result.positivity_violation:
        logger.warning("eps=%.6g %s: negative eigenvalue %.3e in steady state",
                       p.epsilon, method.value, result.min_eig_steady)
    logger.debug("eps=%.6g %s: M0=%.8f after %d periods", p.epsilon, method.value,
                 result.M0, result.periods_used)
    return index, result


def sweep(p: ModelParams, eps_grid, methods, workers: int = 1, fits: BathFits | None = None,
          settings: SolverSettings | None = None) -> list[SweepRow]:
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid:
        raise ParameterError("eps_grid is empty")
    if any(b <= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ParameterError("eps_grid must be strictly ascending")
    methods = [m for m in Method if m in set(methods)]
    if not methods:
        raise ParameterError("no method requested")
    settings = settings or SolverSettings()
    if fits is None:
        fits = fit_bath(p, FitSettings(), methods)
    tasks = [
        (i, replace(p, epsilon=eps), method, fits, settings)
        for i, (eps, method) in enumerate((eps, method) for eps in eps_grid for method in methods)
    ]
    results = [None] * len(tasks)
    if workers <= 1:
        for task in tasks:
            index, result = solve_point(task)
            results[index] = result
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(solve_point, task) for task in tasks]
            for future in as_completed(futures):
                index, result = future.result()
                results[index] = result
    return [SweepRow(task[1].epsilon, task[2], result) for task, result in zip(tasks, results)]


def sweep_frame(rows) -> pd.DataFrame:
    return pd.DataFrame([row.as_record() for row in rows], columns=SWEEP_COLUMNS)


def write_csv(frame: pd.DataFrame, path) -> None:
    """17 significant digits, dot decimal separator, LF line endings."""
    try:
        frame.to_csv(Path(path), index=False, float_format="%.17g", lineterminator="\n", na_rep="nan")
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc


def _plateau_runs(eps, m0, lo, hi, baseline, slope_fraction, run_length, baseline_factor):
    """Runs of run_length intervals inside [lo, hi] that are flat relative to their flanks."""
    slopes = np.abs(np.diff(m0) / np.diff(eps))
    runs = []
    for start in range(run_length, slopes.size - 2 * run_length + 1):
        stop = start + run_length
        if eps[start] < lo or eps[stop] > hi:
            continue
        flanks = np.concatenate([slopes[start - run_length:start], slopes[stop:stop + run_length]])
        reference = float(np.median(flanks))
        flat = np.all(slopes[start:stop] < slope_fraction * reference)
        raised = np.all(m0[start:stop + 1] > baseline_factor * baseline)
        if flat and raised:
            runs.append((start, stop))
    return runs


def asymmetry_report(rows, eps_star: float | None = None, inner: float = 0.05, outer: float = 0.35,
                     slope_fraction: float = 0.2, run_length: int = 3,
                     baseline_factor: float = 2.0) -> AsymmetryReport:
    """Blue/red window means around the resonance and blue-side shoulder detection.

    The blue side is eps < eps_star (W < omega0). eps_star defaults to the
    location of the largest M0.
    """
    rows = [row for row in rows if math.isfinite(row.result.M0)]
    if len({row.method for row in rows}) > 1:
        raise ParameterError("asymmetry_report takes the rows of a single method")
    if len(rows) < 2 * run_length + 3:
        return AsymmetryReport(math.nan, math.nan, False, applicable=False)
    rows = sorted(rows, key=lambda row: row.epsilon)
    eps = np.array([row.epsilon for row in rows])
    m0 = np.array([row.result.M0 for row in rows])
    if eps_star is None or not math.isfinite(eps_star):
        eps_star = float(eps[int(np.argmax(m0))])
    step = float(np.max(np.diff(eps)))
    blue = (eps >= eps_star - outer) & (eps <= eps_star - inner)
    red = (eps >= eps_star + inner) & (eps <= eps_star + outer)
    covered = eps[0] <= eps_star - outer + step and eps[-1] >= eps_star + outer - step
    if not covered or blue.sum() < 2 or red.sum() < 2:
        return AsymmetryReport(math.nan, math.nan, False, applicable=False, eps_star=eps_star)
    far = np.abs(eps - eps_star) >= outer
    baseline = float(np.median(m0[far])) if far.any() else float(np.min(m0))
    runs = _plateau_runs(eps, m0, eps_star - outer, eps_star - inner, baseline,
                         slope_fraction, run_length, baseline_factor)
    plateau = math.nan
    if runs:
        idx = sorted({i for start, stop in runs for i in range(start, stop + 1)})
        plateau = float(np.mean(m0[idx]))
    return AsymmetryReport(float(np.mean(m0[blue])), float(np.mean(m0[red])), bool(runs),
                           True, eps_star, plateau)


def shoulder_trend(reports) -> bool:
    reports = list(reports)
    if len(reports) < 2 or not all(r.applicable and r.shoulder_detected for r in reports):
        return False
    means = [r.plateau_mean for r in reports]
    return all(b > a for a, b in zip(means, means[1:]))
