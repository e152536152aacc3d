# dqd_steady/core/rules/checks.py
"""Invariant checks run by `manage.py validate`."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import List

import numpy as np

from core.services import bath
from core.services.expfit import (
    SPECTRAL_GRID_POINTS, SPECTRAL_OMEGA_MIN, ExpFit, heldout_residual,
)
from core.services.kernels import HELDOUT_FACTOR, kernel_grids, required_kernels, sample_kernels
from core.services.model import RHO_LEFT, RHO_RIGHT, Method, resonance_bias
from core.services.polaron_solver import PolaronSolver
from core.services.reference import unitary_reference
from core.services.steady_sweep import build_solver, run_to_steady
from core.services.weak_solver import WeakSolver

from .base import Check, Context, Issue

# recomputed residuals may differ from the stored ones by rounding only
RECHECK_SLACK = 1.01


def _relative(value: float, target: float) -> float:
    if target == 0:
        return abs(value)
    return abs(value - target) / abs(target)


class EtaIdentityCheck(Check):
    id = "ETA001"
    description = "Re r(0) = 2 ln eta, C11(0) = (1-eta^2)^2/2, C22(0) = (1-eta^4)/2"
    tol = 1e-6

    def run(self, context: Context) -> List[Issue]:
        p = context.params
        quad_tol = context.fit_settings.quad_tol
        eta = bath.eta(p, quad_tol)
        r0 = bath.r_tau(p, 0.0, quad_tol)
        c11, c22 = bath.polaron_correlations(eta, r0)
        identities = [
            ("Re r(0)", r0.real, 2.0 * math.log(eta)),
            ("C11(0)", complex(c11).real, 0.5 * (1.0 - eta ** 2) ** 2),
            ("C22(0)", complex(c22).real, 0.5 * (1.0 - eta ** 4)),
        ]
        issues = [self.note(f"eta = {eta:.12g}", eta)]
        for label, value, target in identities:
            error = _relative(value, target)
            if error > self.tol:
                issues.append(self.issue(f"{label} = {value:.12g}, expected {target:.12g}", error, self.tol))
        return issues


class FitCertificationCheck(Check):
    id = "FIT001"
    description = "stored fits reproduce freshly sampled kernels and the spectral envelope"

    def run(self, context: Context) -> List[Issue]:
        p = context.params
        settings = context.fit_settings
        fits = context.fits
        names = required_kernels(context.cfg.methods)
        issues = []
        if fits.lorfit is not None and p.P > 0:
            omega = np.geomspace(SPECTRAL_OMEGA_MIN, bath.OMEGA_MAX_FACTOR * p.omega_c, SPECTRAL_GRID_POINTS)
            residual = float(np.max(np.abs(fits.lorfit.evaluate(omega) / bath.lorentz_drude(omega, p) - 1.0)))
            if residual > RECHECK_SLACK * settings.fit_tol_spectral:
                issues.append(self.issue(f"Lorentzian envelope residual {residual:.3e}",
                                         residual, settings.fit_tol_spectral))
        train, dense = kernel_grids(p, settings)
        samples = sample_kernels(p, fits.eta, dense, names, settings, fits.lorfit)
        for name in names:
            fit = fits.kernel(name)
            if fit is None:
                issues.append(self.issue(f"{name}: no fit available"))
                continue
            full = samples[name]
            issues.extend(self._certify(fit, full, train, settings.kernel_tol(name)))
        return issues

    def _certify(self, fit: ExpFit, full: bath.KernelSamples, train, tol) -> List[Issue]:
        issues = []
        train_res = heldout_residual(fit, bath.KernelSamples(fit.name, train, full.value[::2]))
        held_res = heldout_residual(fit, bath.KernelSamples(fit.name, full.tau[1::2], full.value[1::2]))
        if train_res > RECHECK_SLACK * tol:
            issues.append(self.issue(f"{fit.name}: training residual {train_res:.3e}", train_res, tol))
        if held_res > HELDOUT_FACTOR * tol:
            issues.append(self.issue(f"{fit.name}: held-out residual {held_res:.3e}",
                                     held_res, HELDOUT_FACTOR * tol))
        if fit.n_terms and np.any(fit.gamma.real >= 0):
            issues.append(self.issue(f"{fit.name}: non-decaying exponential term"))
        c0 = complex(full.value[0])
        if c0 != 0:
            drift = abs(complex(np.sum(fit.alpha)) - c0) / abs(c0)
            issues.append(self.note(f"{fit.name}: {fit.n_terms} terms, residual {train_res:.3e}/"
                                    f"{held_res:.3e}, sum rule {drift:.2e}", drift))
        return issues


class ClosedSystemCheck(Check):
    id = "ORC001"
    description = "with P = 0 both solvers follow the unitary two-level evolution"
    t_end = 500.0
    samples = 501
    tol = 1e-6

    def run(self, context: Context) -> List[Issue]:
        p0 = replace(context.params, P=0.0)
        s = context.solver_settings
        times = np.linspace(0.0, self.t_end, self.samples)
        reference = unitary_reference(p0, [1.0, 0.0], times)
        solvers = (WeakSolver(p0, ExpFit(), s.rtol, s.atol),
                   PolaronSolver(p0, 1.0, ExpFit(), ExpFit(), s.rtol, s.atol))
        issues = []
        for solver in solvers:
            trajectory = solver.integrate(RHO_LEFT, self.t_end, t_eval=times)
            error = float(np.max(np.abs(trajectory.population_right - reference)))
            if error > self.tol:
                issues.append(self.issue(f"{solver.method.value}: population error {error:.3e}", error, self.tol))
        return issues


class ConservationCheck(Check):
    id = "CONS001"
    description = "trace and hermiticity of rho preserved during integration"
    periods = 20
    limit = 1e-8

    def run(self, context: Context) -> List[Issue]:
        p = context.params
        s = context.solver_settings
        issues = []
        for method in context.cfg.methods:
            solver = build_solver(p, method, context.fits, s)
            t_end = self.periods * p.period
            trajectory = solver.integrate(RHO_LEFT, t_end, self.periods * s.samples_per_period + 1)
            for label, value in (("trace", trajectory.max_trace_defect),
                                 ("hermiticity", trajectory.max_herm_defect)):
                if value > self.limit:
                    issues.append(self.issue(f"{method.value}: {label} drift {value:.3e}", value, self.limit))
        return issues


class InitialStateCheck(Check):
    id = "SS001"
    description = "steady-state M0 does not depend on the initial state"
    offsets = (-0.2, -0.1, 0.0, 0.1, 0.2)

    def run(self, context: Context) -> List[Issue]:
        p = context.params
        if p.P == 0:
            return [self.note("closed system has no steady state; skipped")]
        s = context.solver_settings
        centre = resonance_bias(p)
        if not math.isfinite(centre):
            centre = p.epsilon
        limit = max(1e-4, 10.0 * s.steady_tol)
        issues = []
        for method in context.cfg.methods:
            for offset in self.offsets:
                point = replace(p, epsilon=centre + offset)
                results = [
                    run_to_steady(build_solver(point, method, context.fits, s), s.steady_tol,
                                  s.max_periods, s.samples_per_period, rho0)
                    for rho0 in (RHO_LEFT, RHO_RIGHT)
                ]
                where = f"{method.value} eps={point.epsilon:.4f}"
                if not all(r.converged for r in results):
                    issues.append(self.note(f"{where}: not converged; skipped"))
                    continue
                if method is Method.WEAK and any(r.positivity_violation for r in results):
                    issues.append(self.note(f"{where}: positivity violated; skipped"))
                    continue
                diff = abs(results[0].M0 - results[1].M0)
                if diff > limit:
                    issues.append(self.issue(f"{where}: |M0(l) - M0(r)| = {diff:.3e}", diff, limit))
        return issues


class GammaEstimateCheck(Check):
    id = "GAM001"
    description = "decay-rate estimate and weak-coupling validity"
    severity = "warning"

    def run(self, context: Context) -> List[Issue]:
        p = context.params
        eps_star = resonance_bias(p)
        point = replace(p, epsilon=eps_star) if math.isfinite(eps_star) else p
        estimate = bath.gamma_estimate(point, context.fit_settings.weak_coupling_factor)
        issues = [self.note(estimate.report, estimate.gamma)]
        if Method.WEAK in context.cfg.methods and not estimate.weak_coupling_ok:
            issues.append(self.issue("weak-coupling method used outside its validity regime", estimate.gamma))
        return issues
