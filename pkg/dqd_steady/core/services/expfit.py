# dqd_steady/core/services/expfit.py
"""Lorentzian fits of the spectral envelope and exponential fits of kernels.

Exponential fits are initialized by the matrix-pencil method on a uniform
grid and refined by Levenberg-Marquardt least squares. Both fitters are
deterministic: restarts walk a fixed list of initial layouts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import hankel, svd
from scipy.optimize import least_squares, nnls

from core.exceptions import ArtifactError, FitError, ParameterError
from core.services.bath import OMEGA_MAX_FACTOR, KernelSamples, lorentz_drude
from core.services.model import ModelParams

logger = logging.getLogger(__name__)

EXPFIT_MAGIC = "expfit"
LORFIT_MAGIC = "lorfit"
FORMAT_VERSION = "v1"

# (position factor for the lowest center, width/center ratio)
LORENTZIAN_RESTARTS = ((1.0, 1.0), (0.5, 0.5), (2.0, 0.3), (0.25, 1.5))
SPECTRAL_GRID_POINTS = 400
SPECTRAL_OMEGA_MIN = 1e-3


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class LorFit:
    """Sum of anti-symmetrized Lorentzians 4 p Omega w / [((w-Omega)^2 + Gamma^2)((w+Omega)^2 + Gamma^2)]."""
    p: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual: float = 0.0

    @property
    def n_terms(self) -> int:
        return int(np.size(self.p))

    @property
    def terms(self):
        return list(zip(self.p.tolist(), self.Omega.tolist(), self.Gamma.tolist()))

    def _sum(self, x, center, width):
        if self.n_terms == 0:
            return np.zeros(np.shape(x))
        return np.sum(_pair_terms(x, self.p, center, width, self.Omega), axis=-1)

    def evaluate_over_omega(self, omega):
        """Fitted envelope divided by omega (finite at omega = 0)."""
        return self._sum(omega, self.Omega, self.Gamma)

    def evaluate(self, omega):
        return np.asarray(omega, dtype=float) * self.evaluate_over_omega(omega)

    def evaluate_imaginary(self, nu):
        """i L(-i nu): the envelope continued onto the negative imaginary axis, real and positive."""
        return np.asarray(nu, dtype=float) * self._sum(nu, self.Gamma, self.Omega)


def _pair_terms(x, p, center, width, Omega):
    """4 p Omega / [((x-center)^2 + width^2)((x+center)^2 + width^2)] per term."""
    x = np.asarray(x, dtype=float)[..., None]
    with np.errstate(over="ignore"):
        return 4.0 * p * Omega / ((x - center) ** 2 + width ** 2) / ((x + center) ** 2 + width ** 2)


@dataclass(frozen=True)
class ExpFit:
    """C(tau) ~ sum_m alpha_m exp(gamma_m tau) with Re(gamma_m) < 0."""
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residual: float = 0.0
    name: str = "kernel"

    @property
    def n_terms(self) -> int:
        return int(np.size(self.alpha))

    @property
    def relaxation_time(self) -> float:
        if self.n_terms == 0:
            return 0.0
        return float(np.max(1.0 / np.abs(self.gamma.real)))

    def __call__(self, tau):
        return eval_expfit(self, tau)


def eval_expfit(fit: ExpFit, tau):
    t = np.asarray(tau, dtype=float)
    if fit.n_terms == 0:
        value = np.zeros(t.shape, dtype=complex)
    else:
        value = np.exp(np.multiply.outer(t, fit.gamma)) @ fit.alpha
    return complex(value) if t.ndim == 0 else value


# ---------------------------------------------------------------- Lorentzians

def _lorentzian_basis(omega, Omega, Gamma):
    return omega[:, None] * _pair_terms(omega, np.ones_like(Omega), Omega, Gamma, Omega)


def _lorentzian_jacobian(omega, target, p, Omega, Gamma):
    """d(L/target)/d(log p, log Omega, log Gamma)."""
    w = omega[:, None]
    a = (w - Omega) ** 2 + Gamma ** 2
    b = (w + Omega) ** 2 + Gamma ** 2
    term = w * _pair_terms(omega, p, Omega, Gamma, Omega)
    d_omega = term * (1.0 - 2.0 * Omega * ((w + Omega) / b - (w - Omega) / a))
    d_gamma = -term * 2.0 * Gamma ** 2 * (1.0 / a + 1.0 / b)
    return np.hstack([term, d_omega, d_gamma]) / target[:, None]


def _starts(omega, target, n_terms, previous: LorFit | None):
    peak = omega[int(np.argmax(target))]
    for position, width in LORENTZIAN_RESTARTS:
        start = min(peak * position, omega[-1])
        centers = np.geomspace(start, omega[-1], n_terms) if n_terms > 1 else np.array([start])
        yield centers, width * centers
    if previous is not None and previous.n_terms == n_terms - 1:
        worst = omega[int(np.argmax(np.abs(previous.evaluate(omega) / target - 1.0)))]
        yield np.append(previous.Omega, worst), np.append(previous.Gamma, 0.5 * worst)


def fit_lorentzians(omega: np.ndarray, target: np.ndarray, n_terms: int,
                    previous: LorFit | None = None) -> LorFit:
    """Best relative-L_inf fit with exactly n_terms Lorentzians; `previous` (n_terms - 1) seeds one more start."""
    omega = np.asarray(omega, dtype=float)
    target = np.asarray(target, dtype=float)
    best = None
    for centers, widths in _starts(omega, target, n_terms, previous):
        basis = _lorentzian_basis(omega, centers, widths)
        amplitudes, _ = nnls(basis / target[:, None], np.ones_like(target))
        floor = 1e-12 * max(float(np.max(amplitudes)), 1e-300)
        x0 = np.concatenate([np.log(np.maximum(amplitudes, floor)), np.log(centers), np.log(widths)])

        def unpack(x):
            return np.exp(np.clip(x, -300.0, 300.0)).reshape(3, n_terms)

        def residuals(x):
            return LorFit(*unpack(x)).evaluate(omega) / target - 1.0

        def jacobian(x):
            return _lorentzian_jacobian(omega, target, *unpack(x))

        solution = least_squares(residuals, x0, jac=jacobian, method="lm", xtol=1e-15, ftol=1e-15,
                                 gtol=1e-15, max_nfev=500 * (3 * n_terms + 1))
        p, Om, Ga = unpack(solution.x)
        linf = float(np.max(np.abs(residuals(solution.x))))
        if best is None or linf < best.residual:
            order = np.argsort(Om)
            best = LorFit(p[order], Om[order], Ga[order], linf)
    return best


def fit_lorentzian_spectral(p: ModelParams, n_terms: int, omega_max: float | None = None,
                            tol: float = 1e-3) -> LorFit:
    """Fit the Lorentz-Drude factor of J up to omega_max (default 100 omega_c).

    Term counts are tried from 1 to n_terms; the first fit whose relative
    L_inf residual is within tol is returned.
    """
    if n_terms < 1:
        raise ParameterError("n_terms must be at least 1")
    if p.P == 0:
        return LorFit()
    omega_max = OMEGA_MAX_FACTOR * p.omega_c if omega_max is None else omega_max
    omega = np.geomspace(SPECTRAL_OMEGA_MIN, omega_max, SPECTRAL_GRID_POINTS)
    target = lorentz_drude(omega, p)
    curve = []
    fit = None
    for n in range(1, n_terms + 1):
        fit = fit_lorentzians(omega, target, n, previous=fit)
        curve.append(fit.residual)
        logger.debug("Lorentzian fit with %d terms: residual %.3e", n, fit.residual)
        if fit.residual <= tol:
            logger.info("Lorentzian spectral fit: %d terms, residual %.3e", n, fit.residual)
            return fit
    raise FitError(
        f"Lorentzian spectral fit residual {min(curve):.3e} exceeds {tol:.1e} with {n_terms} terms",
        best_residual=min(curve), residual_curve=curve,
    )


# --------------------------------------------------------------- exponentials

# pencil fits handed to least-squares refinement when none is within tol
REFINE_CANDIDATES = 3


def _uniform_step(tau: np.ndarray) -> float:
    if tau.size < 4:
        raise ParameterError("exponential fits need at least 4 samples")
    steps = np.diff(tau)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise ParameterError("exponential fits need samples on a uniform increasing tau grid")
    return dt


def _pencil_basis(values: np.ndarray) -> np.ndarray:
    """Right singular vectors of the Hankel data matrix (pencil parameter N/3)."""
    n = values.size
    pencil = max(n // 3, 1)
    data = hankel(values[: n - pencil], values[n - pencil - 1:])
    _, _, vh = svd(data, full_matrices=False)
    return vh


def _pencil_rates(vh: np.ndarray, dt: float, m: int) -> np.ndarray:
    v = vh[:m].conj().T
    v1, v2 = v[:-1], v[1:]
    poles = np.linalg.eigvals(np.linalg.pinv(v1) @ v2)
    poles = np.where(np.abs(poles) < 1e-300, 1e-300, poles)
    rates = np.log(poles.astype(complex)) / dt
    # reflect growing or marginal terms into decaying ones
    re = -np.maximum(np.abs(rates.real), 1e-8)
    return re + 1j * rates.imag


def _amplitudes(tau, values, gamma):
    vander = np.exp(np.multiply.outer(tau, gamma))
    alpha, *_ = np.linalg.lstsq(vander, values, rcond=None)
    return alpha


def _relative_residual(fit: ExpFit, tau, values) -> float:
    scale = np.linalg.norm(values)
    if scale == 0:
        return float(np.linalg.norm(eval_expfit(fit, tau)))
    return float(np.linalg.norm(eval_expfit(fit, tau) - values) / scale)


def _refine(tau, values, alpha, gamma, scale):
    m = alpha.size
    x0 = np.concatenate([alpha.real, alpha.imag, np.log(-gamma.real), gamma.imag])

    def unpack(x):
        a = x[:m] + 1j * x[m:2 * m]
        g = -np.exp(np.clip(x[2 * m:3 * m], -300.0, 300.0)) + 1j * x[3 * m:]
        return a, g

    def residuals(x):
        a, g = unpack(x)
        diff = (np.exp(np.multiply.outer(tau, g)) @ a - values) / scale
        return np.concatenate([diff.real, diff.imag])

    def jacobian(x):
        a, g = unpack(x)
        e = np.exp(np.multiply.outer(tau, g))
        a_tau_e = a * tau[:, None] * e
        cols = np.hstack([e, 1j * e, g.real * a_tau_e, 1j * a_tau_e]) / scale
        return np.vstack([cols.real, cols.imag])

    solution = least_squares(residuals, x0, jac=jacobian, method="lm", xtol=1e-14, ftol=1e-14,
                             gtol=1e-14, max_nfev=2000)
    return unpack(solution.x)


def fit_exponentials(samples: KernelSamples, tol: float, m_max: int,
                     known: ExpFit | None = None) -> ExpFit:
    """Fit sampled C(tau) by `known` plus at most m_max fitted decaying exponentials.

    The residual is relative to the full samples. Pencil fits are tried for
    m = 1..m_max; when none is within tol the best REFINE_CANDIDATES of them
    are refined by least squares.
    """
    tau = np.asarray(samples.tau, dtype=float)
    values = np.asarray(samples.value, dtype=complex)
    dt = _uniform_step(tau)
    if not np.any(values):
        return ExpFit(name=samples.name)
    known = ExpFit() if known is None else known
    scale = float(np.linalg.norm(values))
    rest = values - eval_expfit(known, tau)

    def combined(alpha, gamma):
        residual = float(np.linalg.norm(eval_expfit(ExpFit(alpha, gamma), tau) - rest)) / scale
        return ExpFit(np.concatenate([known.alpha, alpha]), np.concatenate([known.gamma, gamma]),
                      residual, samples.name)

    if np.linalg.norm(rest) <= tol * scale:
        return combined(np.zeros(0, complex), np.zeros(0, complex))
    vh = _pencil_basis(rest)
    candidates = []
    for m in range(1, min(m_max, vh.shape[0] - 1) + 1):
        gamma = _pencil_rates(vh, dt, m)
        alpha = _amplitudes(tau, rest, gamma)
        fit = combined(alpha, gamma)
        logger.debug("%s: %d exponentials, pencil residual %.3e", samples.name, m, fit.residual)
        if fit.residual <= tol:
            logger.info("%s: fitted with %d exponentials, residual %.3e", samples.name, m, fit.residual)
            return fit
        candidates.append((fit.residual, m, alpha, gamma))
    curve = [c[0] for c in candidates]
    for residual, m, alpha, gamma in sorted(candidates, key=lambda c: c[0])[:REFINE_CANDIDATES]:
        fit = combined(*_refine(tau, rest, alpha, gamma, scale))
        logger.debug("%s: %d exponentials, refined residual %.3e", samples.name, m, fit.residual)
        curve[m - 1] = min(curve[m - 1], fit.residual)
        if fit.residual <= tol:
            logger.info("%s: fitted with %d exponentials, residual %.3e", samples.name, m, fit.residual)
            return fit
    raise FitError(
        f"{samples.name}: residual {min(curve):.3e} exceeds {tol:.1e} with {len(curve)} exponentials",
        best_residual=min(curve), residual_curve=curve,
    )


def heldout_residual(fit: ExpFit, samples: KernelSamples) -> float:
    return _relative_residual(fit, np.asarray(samples.tau), np.asarray(samples.value))


# ------------------------------------------------------------------ artifacts

def write_expfit(path, fit: ExpFit) -> None:
    lines = [f"{EXPFIT_MAGIC} {FORMAT_VERSION} {fit.name} {fit.n_terms} {_fmt(fit.residual)}"]
    for a, g in zip(fit.alpha, fit.gamma):
        lines.append(" ".join(_fmt(x) for x in (a.real, a.imag, g.real, g.imag)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_expfit(path) -> ExpFit:
    rows = _read_artifact(path, EXPFIT_MAGIC, header_fields=5, row_fields=4)
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body]).reshape(-1, 4)
    alpha = data[:, 0] + 1j * data[:, 1]
    gamma = data[:, 2] + 1j * data[:, 3]
    if np.any(gamma.real >= 0):
        raise ArtifactError(f"{path}: fit contains non-decaying terms")
    return ExpFit(alpha, gamma, float(header[4]), header[2])


def write_lorfit(path, fit: LorFit) -> None:
    lines = [f"{LORFIT_MAGIC} {FORMAT_VERSION} {fit.n_terms} {_fmt(fit.residual)}"]
    for term in fit.terms:
        lines.append(" ".join(_fmt(x) for x in term))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_lorfit(path) -> LorFit:
    rows = _read_artifact(path, LORFIT_MAGIC, header_fields=4, row_fields=3)
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body]).reshape(-1, 3)
    return LorFit(data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(), float(header[3]))


def _read_artifact(path, magic, header_fields, row_fields):
    try:
        text = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"cannot read fit artifact {path}: {exc}") from exc
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows or len(rows[0]) != header_fields or rows[0][0] != magic or rows[0][1] != FORMAT_VERSION:
        raise ArtifactError(f"{path}: not a {magic} {FORMAT_VERSION} artifact")
    try:
        n_terms = int(rows[0][header_fields - 2])
        float(rows[0][-1])
        for row in rows[1:]:
            [float(x) for x in row]
    except ValueError as exc:
        raise ArtifactError(f"{path}: malformed number ({exc})") from exc
    if n_terms != len(rows) - 1 or any(len(row) != row_fields for row in rows[1:]):
        raise ArtifactError(f"{path}: term count does not match header")
    return rows
