# dqd_steady/core/services/bath.py
"""Spectral density, polaron renormalization and bath correlation functions.

Frequency integrals run over [0, OMEGA_MAX_FACTOR * omega_c] with scipy's
vectorized adaptive Gauss-Kronrod rule (quad_vec); the weak kernel built
on a Lorentzian fit is the exception and extends to infinity. Break points
are placed on the sinc oscillation scale pi*c_s/d (and on pi/tau_max when a
tau grid is integrated at once), so every panel holds at most half an
oscillation of the integrand.
"""
from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy.integrate import quad_vec

from core.exceptions import ParameterError, QuadratureError
from core.services.model import ModelParams, splitting_and_detuning

if TYPE_CHECKING:
    from core.services.expfit import LorFit

logger = logging.getLogger(__name__)

OMEGA_MAX_FACTOR = 100.0
DEFAULT_QUAD_TOL = 1e-8
# tau points per quad_vec call; bounds the interval cache
TAU_BLOCK = 512
_SERIES_CUTOFF = 1e-3
# relative accuracy of the |weight| integrals that set absolute tolerances
SCALE_TOL = 1e-3
# quad_vec status for a stop where rounding error dominates
ROUNDING_LIMITED = 2


class BathSample(NamedTuple):
    tau: float
    value: complex


class KernelSamples(NamedTuple):
    name: str
    tau: np.ndarray
    value: np.ndarray


class GammaEstimate(NamedTuple):
    gamma: float
    weak_coupling_ok: bool
    report: str


def _one_minus_sinc_over_x(x):
    """(1 - sin(x)/x) / x, with its Taylor series near x = 0."""
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x)
    out = np.empty_like(flat)
    small = np.abs(flat) < _SERIES_CUTOFF
    xs = flat[small]
    out[small] = xs / 6.0 - xs ** 3 / 120.0
    xl = flat[~small]
    out[~small] = (1.0 - np.sin(xl) / xl) / xl
    return out.reshape(x.shape)


def _one_minus_sinc(x):
    return np.asarray(x, dtype=float) * _one_minus_sinc_over_x(x)


def coth_half_beta(omega, kT: float):
    """coth(beta*omega/2); identically 1 at zero temperature."""
    omega = np.asarray(omega, dtype=float)
    if kT == 0:
        return np.ones_like(omega)
    return 1.0 / np.tanh(omega / (2.0 * kT))


def lorentz_drude(omega, p: ModelParams):
    """(P/2) omega omega_c^2 / (omega^2 + omega_c^2), the envelope of J."""
    omega = np.asarray(omega, dtype=float)
    return 0.5 * p.P * omega * p.omega_c ** 2 / (omega ** 2 + p.omega_c ** 2)


def spectral_density(omega, p: ModelParams):
    """Piezoelectric J(omega) = Lorentz-Drude factor times [1 - sinc(d omega / c_s)]."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ParameterError("spectral density is defined for omega >= 0 only")
    value = lorentz_drude(w, p) * _one_minus_sinc(p.d_cs * w)
    return float(value) if np.ndim(omega) == 0 else value


def _j_over_omega_sq(omega, p: ModelParams, lorfit: LorFit | None = None):
    """J(omega)/omega^2, finite at omega -> 0 thanks to the sinc factor."""
    omega = np.asarray(omega, dtype=float)
    if lorfit is None:
        envelope = 0.5 * p.P * p.omega_c ** 2 / (omega ** 2 + p.omega_c ** 2)
    else:
        envelope = lorfit.evaluate_over_omega(omega)
    return envelope * p.d_cs * _one_minus_sinc_over_x(p.d_cs * omega)


def _regularized_density(omega, p: ModelParams, lorfit: LorFit | None = None):
    omega = np.asarray(omega, dtype=float)
    envelope = lorentz_drude(omega, p) if lorfit is None else lorfit.evaluate(omega)
    return envelope * _one_minus_sinc(p.d_cs * omega)


def _break_points(p: ModelParams, omega_max: float, tau_max: float = 0.0) -> list:
    scale = max(p.d_cs, tau_max, 1.0)
    width = math.pi / scale
    points = list(np.arange(width, omega_max, width))
    if p.omega_c < omega_max:
        points.append(p.omega_c)
    return sorted(set(points))


def integrate_spectrum(integrand, p: ModelParams, quad_tol: float, tau_max: float = 0.0,
                       omega_max: float | None = None, what: str = "integral", epsabs: float = 0.0):
    omega_max = OMEGA_MAX_FACTOR * p.omega_c if omega_max is None else omega_max
    points = _break_points(p, omega_max, tau_max)
    result, error, info = quad_vec(
        integrand, 0.0, omega_max,
        epsabs=max(epsabs, 1e-300), epsrel=quad_tol, norm="max",
        points=points, limit=50 * (len(points) + 1),
        full_output=True,
    )
    return _checked(result, error, info, quad_tol, epsabs, what)


def _checked(result, error, info, quad_tol: float, epsabs: float, what: str):
    """quad_vec result, accepting a rounding-limited stop that already meets the tolerance."""
    error = float(np.max(np.abs(error)))
    if info.success:
        return result
    if info.status == ROUNDING_LIMITED and error <= max(epsabs, quad_tol * float(np.max(np.abs(result)))):
        logger.debug("%s: rounding-limited at error %.3e", what, error)
        return result
    raise QuadratureError(
        f"{what}: quadrature did not converge ({info.message})",
        error=error, intervals=len(info.intervals), neval=info.neval,
    )


def _thermal_integral(p: ModelParams, quad_tol: float, thermal: bool) -> float:
    kT = p.kT if thermal else 0.0

    def integrand(w):
        return _j_over_omega_sq(w, p) * coth_half_beta(w, kT)

    return float(integrate_spectrum(integrand, p, quad_tol, what="eta"))


def eta(p: ModelParams, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """eta = exp[-2 int J/omega^2 coth(beta omega/2)], 1 exactly when P = 0."""
    if p.P == 0 or p.d_cs == 0:
        return 1.0
    return math.exp(-2.0 * _thermal_integral(p, quad_tol, thermal=True))


def eta_second_order(p: ModelParams, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    if p.P == 0 or p.d_cs == 0:
        return 1.0
    return 1.0 - 2.0 * _thermal_integral(p, quad_tol, thermal=False)


def _check_taus(taus) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus < 0):
        raise ParameterError("correlation functions are evaluated for tau >= 0 only")
    return taus


def _oscillatory_grid(weights, p: ModelParams, taus, quad_tol: float, what: str,
                      omega_max: float | None = None):
    """int [cw(w) cos(w tau) - i sw(w) sin(w tau)] dw for every tau, with (cw, sw) = weights(w)."""
    taus = _check_taus(taus)
    # absolute tolerance from int (|cw|, |sw|), the bound on every tau
    scale = integrate_spectrum(lambda w: np.abs(np.asarray(weights(w), dtype=float)), p, SCALE_TOL,
                               omega_max=omega_max, what=f"{what} scale")
    epsabs = quad_tol * float(np.max(scale))
    out = np.empty(taus.size, dtype=complex)
    for start in range(0, taus.size, TAU_BLOCK):
        block = taus[start:start + TAU_BLOCK]
        n = block.size

        def integrand(w, block=block, n=n):
            cw, sw = weights(w)
            phase = w * block
            vals = np.empty(2 * n)
            vals[:n] = cw * np.cos(phase)
            vals[n:] = -sw * np.sin(phase)
            return vals

        res = integrate_spectrum(integrand, p, quad_tol, tau_max=float(block.max()),
                                 omega_max=omega_max, what=what, epsabs=epsabs)
        out[start:start + n] = res[:n] + 1j * res[n:]
    return out


def r_tau_grid(p: ModelParams, taus, quad_tol: float = DEFAULT_QUAD_TOL,
               lorfit: LorFit | None = None) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if p.P == 0 or p.d_cs == 0:
        return np.zeros(taus.size, dtype=complex)

    def weights(w):
        j = _j_over_omega_sq(w, p, lorfit)
        return j * coth_half_beta(w, p.kT), j

    return -4.0 * _oscillatory_grid(weights, p, taus, quad_tol, "r(tau)")


def r_tau(p: ModelParams, tau: float, quad_tol: float = DEFAULT_QUAD_TOL,
          lorfit: LorFit | None = None) -> complex:
    """r(tau) = -4 int J/omega^2 [cos(omega tau) coth - i sin(omega tau)]."""
    return complex(r_tau_grid(p, [tau], quad_tol, lorfit)[0])


def polaron_correlations(eta_value: float, r_values):
    """C11 = eta^2 (cosh r - 1), C22 = -eta^2 sinh r."""
    r_values = np.asarray(r_values, dtype=complex)
    e2 = eta_value ** 2
    return e2 * (np.cosh(r_values) - 1.0), -e2 * np.sinh(r_values)


def corr_polaron(p: ModelParams, eta_value: float, tau: float,
                 quad_tol: float = DEFAULT_QUAD_TOL, lorfit: LorFit | None = None):
    c11, c22 = polaron_correlations(eta_value, r_tau(p, tau, quad_tol, lorfit))
    return complex(c11), complex(c22)


def lorfit_poles(lorfit: LorFit):
    """Residue amplitudes pi p / Gamma and rates -Gamma - i Omega of the fitted envelope."""
    alpha = np.pi * lorfit.p / lorfit.Gamma + 0j
    gamma = -lorfit.Gamma - 1j * lorfit.Omega
    return alpha, gamma


def _laplace_weight(lorfit: LorFit) -> float:
    om, ga = lorfit.Omega, lorfit.Gamma
    angle = np.arctan((om ** 2 - ga ** 2) / (2.0 * om * ga))
    return float(np.sum(lorfit.p / ga * (0.5 * np.pi - angle)))


def lorfit_correlation(lorfit: LorFit, taus, quad_tol: float = DEFAULT_QUAD_TOL) -> np.ndarray:
    """int_0^inf L(w) exp(-i w tau) dw for the fitted envelope L, at zero temperature.

    Rotating the contour onto the negative imaginary axis leaves the residues
    of the poles at Omega - i Gamma and a real Laplace integral.
    """
    taus = _check_taus(taus)
    if lorfit.n_terms == 0:
        return np.zeros(taus.size, dtype=complex)
    alpha, gamma = lorfit_poles(lorfit)
    poles = np.exp(np.multiply.outer(taus, gamma)) @ alpha
    points = sorted(set(np.concatenate([lorfit.Omega, lorfit.Gamma]).tolist()))
    epsabs = quad_tol * _laplace_weight(lorfit)
    laplace = np.empty(taus.size)
    for start in range(0, taus.size, TAU_BLOCK):
        block = taus[start:start + TAU_BLOCK]

        def integrand(nu, block=block):
            return lorfit.evaluate_imaginary(nu) * np.exp(-nu * block)

        res, error, info = quad_vec(integrand, 0.0, np.inf, epsabs=epsabs, epsrel=quad_tol,
                                    norm="max", points=points, limit=2000, full_output=True)
        laplace[start:start + block.size] = _checked(res, error, info, quad_tol, epsabs, "Laplace tail")
    return poles - laplace


def _coth_minus_one(omega, kT: float):
    omega = np.asarray(omega, dtype=float)
    if kT == 0:
        return np.zeros_like(omega)
    with np.errstate(over="ignore", divide="ignore"):
        return 2.0 / np.expm1(omega / kT)


def corr_weak_grid(p: ModelParams, lorfit: LorFit | None, taus,
                   quad_tol: float = DEFAULT_QUAD_TOL, omega_max: float | None = None) -> np.ndarray:
    """Weak-coupling C(tau).

    lorfit=None integrates J directly up to the cutoff, as does an explicit
    omega_max. Otherwise the fitted envelope runs to infinity: its zero
    temperature transform is taken in closed form and only the sinc and
    thermal remainder, which falls off as w^-4, is integrated numerically.
    """
    taus = _check_taus(taus)
    if p.P == 0 or p.d_cs == 0:
        return np.zeros(taus.size, dtype=complex)
    if lorfit is None or omega_max is not None:
        def weights(w):
            j = _regularized_density(w, p, lorfit)
            return j * coth_half_beta(w, p.kT), j

        return _oscillatory_grid(weights, p, taus, quad_tol, "C(tau)", omega_max)

    def remainder(w):
        env = lorfit.evaluate(w)
        s = 1.0 - _one_minus_sinc(p.d_cs * w)
        return env * (_coth_minus_one(w, p.kT) * (1.0 - s) - s), -env * s

    return lorfit_correlation(lorfit, taus, quad_tol) + _oscillatory_grid(remainder, p, taus, quad_tol, "C(tau)")


def corr_weak(p: ModelParams, lorfit: LorFit | None, tau: float,
              quad_tol: float = DEFAULT_QUAD_TOL) -> complex:
    return complex(corr_weak_grid(p, lorfit, [tau], quad_tol)[0])


def gamma_estimate(p: ModelParams, threshold: float = 10.0) -> GammaEstimate:
    """Decay-rate estimate Gamma ~ P omega_c / 2 and the weak-coupling criterion.

    Gamma/2 ~ int_0^{1/omega_c} C(0) dt' with C(0) ~ P omega_c^2 / 4, so the
    weak-coupling treatment needs max(Omega0, |delta|) >> Gamma.
    """
    gamma = 0.5 * p.P * p.omega_c
    _, detuning = splitting_and_detuning(p)
    scale = max(p.Omega0, abs(detuning))
    ok = scale >= threshold * gamma
    report = (
        f"Gamma={gamma:.6g} max(Omega0,|delta|)={scale:.6g} "
        f"threshold={threshold:g}x -> weak coupling {'ok' if ok else 'violated'}"
    )
    return GammaEstimate(gamma, ok, report)
