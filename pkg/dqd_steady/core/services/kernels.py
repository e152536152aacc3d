# dqd_steady/core/services/kernels.py
"""Bath fit pipeline: eta, the Lorentzian envelope fit and the three kernel fits.

Fits are cached on disk under <fit_dir>/<sha256 of bath parameters and fit
settings>/. A cache directory is written only after every requested fit has
been certified; a failed write removes it again.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from core.exceptions import ArtifactError, FitError
from core.services import bath
from core.services.expfit import (
    ExpFit, LorFit, fit_exponentials, fit_lorentzian_spectral, heldout_residual,
    read_expfit, read_lorfit, write_expfit, write_lorfit,
)
from core.services.model import Method, ModelParams, interdot_separation_nm, resonance_bias

logger = logging.getLogger(__name__)

# held-out residual may exceed the training tolerance by this factor
HELDOUT_FACTOR = 5.0
# kernels below this fraction of C(0) at tau_max count as fully decayed
TAIL_FRACTION = 1e-6

LORFIT_FILE = "lorfit.txt"
KERNEL_FILES = {"weak": "weak.txt", "c11": "c11.txt", "c22": "c22.txt"}
METADATA_FILE = "metadata.json"


@dataclass(frozen=True)
class FitSettings:
    quad_tol: float = 1e-8
    fit_tol_kernel: float = 1e-4
    fit_tol_spectral: float = 2e-4
    fit_tol_weak: float = 3e-2
    n_terms_max: int = 12
    m_max: int = 40
    tau_max: float = 50.0
    kernel_samples: int = 2048
    polaron_spectrum: str = "exact"
    weak_coupling_factor: float = 10.0

    @classmethod
    def from_config(cls, cfg) -> FitSettings:
        names = cls.__dataclass_fields__
        return cls(**{name: getattr(cfg, name) for name in names})

    def kernel_tol(self, name: str) -> float:
        """The weak kernel carries a non-exponential echo at tau = d/c_s and is held to fit_tol_weak."""
        if name == "weak":
            return max(self.fit_tol_kernel, self.fit_tol_weak)
        return self.fit_tol_kernel

    def key(self) -> dict:
        return asdict(self)


@dataclass
class BathFits:
    eta: float
    eta_second_order: float
    lorfit: LorFit | None = None
    weak: ExpFit | None = None
    c11: ExpFit | None = None
    c22: ExpFit | None = None
    metadata: dict = field(default_factory=dict)

    def kernel(self, name: str) -> ExpFit | None:
        return getattr(self, name)

    def has(self, methods) -> bool:
        return all(getattr(self, name) is not None for name in required_kernels(methods))


def required_kernels(methods) -> list[str]:
    names = []
    if Method.WEAK in methods:
        names.append("weak")
    if Method.POLARON in methods:
        names.extend(["c11", "c22"])
    return names


def effective_tau_max(p: ModelParams, settings: FitSettings) -> float:
    """Sample window covering the thermal decay and the sinc echo at tau = d/c_s."""
    slow = p.omega_c
    if p.kT > 0:
        slow = min(slow, 2.0 * math.pi * p.kT)
    return max(settings.tau_max, 10.0 / slow, 3.0 * p.d_cs)


def kernel_grids(p: ModelParams, settings: FitSettings):
    """Training grid and the 2x denser grid used for held-out certification."""
    tau_max = effective_tau_max(p, settings)
    dense = np.linspace(0.0, tau_max, 2 * settings.kernel_samples - 1)
    return dense[::2], dense


def _check_tail(samples: bath.KernelSamples) -> None:
    head = abs(samples.value[0])
    tail = abs(samples.value[-1])
    if head > 0 and tail > TAIL_FRACTION * head:
        logger.warning("%s: |C(tau_max)| = %.2e of |C(0)|; tail not fully decayed",
                       samples.name, tail / head)


def certify(fit: ExpFit, samples: bath.KernelSamples, tol: float) -> float:
    """Held-out residual of a kernel fit; FitError when above HELDOUT_FACTOR * tol."""
    residual = heldout_residual(fit, samples)
    if residual > HELDOUT_FACTOR * tol:
        raise FitError(
            f"{fit.name}: held-out residual {residual:.3e} exceeds {HELDOUT_FACTOR * tol:.1e}",
            best_residual=residual,
        )
    if fit.n_terms and np.any(fit.gamma.real >= 0):
        raise FitError(f"{fit.name}: non-decaying exponential term", best_residual=residual)
    return residual


def sample_kernels(p: ModelParams, eta_value: float, taus, names, settings: FitSettings,
                   lorfit: LorFit | None) -> dict:
    out = {}
    if "weak" in names:
        out["weak"] = bath.KernelSamples("weak", taus, bath.corr_weak_grid(p, lorfit, taus, settings.quad_tol))
    if "c11" in names or "c22" in names:
        envelope = lorfit if settings.polaron_spectrum == "lorentzian" else None
        r = bath.r_tau_grid(p, taus, settings.quad_tol, envelope)
        c11, c22 = bath.polaron_correlations(eta_value, r)
        out["c11"] = bath.KernelSamples("c11", taus, c11)
        out["c22"] = bath.KernelSamples("c22", taus, c22)
    return out


def _fit_kernels(p, fits: BathFits, names, settings: FitSettings) -> dict:
    train, dense = kernel_grids(p, settings)
    samples = sample_kernels(p, fits.eta, dense, names, settings, fits.lorfit)
    report = {}
    for name in names:
        full = samples[name]
        _check_tail(full)
        training = bath.KernelSamples(name, train, full.value[::2])
        held_out = bath.KernelSamples(name, full.tau[1::2], full.value[1::2])
        tol = settings.kernel_tol(name)
        known = None
        if name == "weak" and fits.lorfit is not None:
            known = ExpFit(*bath.lorfit_poles(fits.lorfit))
        fit = fit_exponentials(training, tol, settings.m_max, known=known)
        residual = certify(fit, held_out, tol)
        setattr(fits, name, fit)
        report[name] = {
            "n_terms": fit.n_terms,
            "residual": fit.residual,
            "heldout_residual": residual,
            "c0": [float(full.value[0].real), float(full.value[0].imag)],
        }
    return report


def build_metadata(p: ModelParams, fits: BathFits, settings: FitSettings) -> dict:
    eps_star = resonance_bias(p)
    at_resonance = replace(p, epsilon=eps_star) if math.isfinite(eps_star) else p
    estimate = bath.gamma_estimate(at_resonance, settings.weak_coupling_factor)
    meta = {
        "bath": p.bath_key(),
        "settings": settings.key(),
        "eta": fits.eta,
        "eta_second_order": fits.eta_second_order,
        "gamma": estimate.gamma,
        "weak_coupling_ok": estimate.weak_coupling_ok,
        "gamma_report": estimate.report,
        "renormalized_drive": fits.eta * p.Omega0,
        "renormalized_drive_second_order": fits.eta_second_order * p.Omega0,
        "interdot_separation_nm": interdot_separation_nm(p.d_cs),
        "tau_max": effective_tau_max(p, settings),
        "kernels": {},
    }
    if fits.lorfit is not None:
        meta["lorfit"] = {"n_terms": fits.lorfit.n_terms, "residual": fits.lorfit.residual}
    meta["kernels"].update(fits.metadata.get("kernels", {}))
    return meta


def fit_bath(p: ModelParams, settings: FitSettings, methods=tuple(Method),
             fits: BathFits | None = None) -> BathFits:
    """Compute eta and every fit the requested methods need that `fits` lacks."""
    if fits is None:
        fits = BathFits(bath.eta(p, settings.quad_tol), bath.eta_second_order(p, settings.quad_tol))
        logger.info("eta=%.12g eta_second_order=%.12g", fits.eta, fits.eta_second_order)
    names = [name for name in required_kernels(methods) if fits.kernel(name) is None]
    needs_lorfit = "weak" in names or (names and settings.polaron_spectrum == "lorentzian")
    if needs_lorfit and fits.lorfit is None:
        fits.lorfit = fit_lorentzian_spectral(p, settings.n_terms_max, tol=settings.fit_tol_spectral)
    if names:
        report = _fit_kernels(p, fits, names, settings)
        fits.metadata.setdefault("kernels", {}).update(report)
    fits.metadata = build_metadata(p, fits, settings)
    return fits


def cache_key(p: ModelParams, settings: FitSettings) -> str:
    payload = json.dumps({"bath": p.bath_key(), "settings": settings.key()}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def cache_dir(fit_dir, p: ModelParams, settings: FitSettings) -> Path:
    return Path(fit_dir) / cache_key(p, settings)


def write_artifacts(directory, fits: BathFits) -> None:
    directory = Path(directory)
    created = not directory.exists()
    try:
        directory.mkdir(parents=True, exist_ok=True)
        if fits.lorfit is not None:
            write_lorfit(directory / LORFIT_FILE, fits.lorfit)
        for name, filename in KERNEL_FILES.items():
            fit = fits.kernel(name)
            if fit is not None:
                write_expfit(directory / filename, fit)
        text = json.dumps(fits.metadata, sort_keys=True, indent=2) + "\n"
        (directory / METADATA_FILE).write_text(text, encoding="utf-8")
    except OSError as exc:
        if created:
            shutil.rmtree(directory, ignore_errors=True)
        raise ArtifactError(f"cannot write fit artifacts to {directory}: {exc}") from exc
    logger.info("fit artifacts written to %s", directory)


def read_artifacts(directory) -> BathFits | None:
    directory = Path(directory)
    meta_path = directory / METADATA_FILE
    if not meta_path.exists():
        return None
    try:
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"cannot read {meta_path}: {exc}") from exc
    try:
        fits = BathFits(float(metadata["eta"]), float(metadata["eta_second_order"]), metadata=metadata)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{meta_path}: missing or malformed eta entries") from exc
    if (directory / LORFIT_FILE).exists():
        fits.lorfit = read_lorfit(directory / LORFIT_FILE)
    for name, filename in KERNEL_FILES.items():
        if (directory / filename).exists():
            setattr(fits, name, read_expfit(directory / filename))
    return fits


def load_or_fit(p: ModelParams, settings: FitSettings, fit_dir, methods=tuple(Method)) -> BathFits:
    """Reuse cached fits for p's bath, fitting and persisting whatever is missing."""
    directory = cache_dir(fit_dir, p, settings)
    fits = read_artifacts(directory)
    if fits is not None and fits.has(methods):
        logger.info("reusing fit artifacts in %s", directory)
        fits.metadata = build_metadata(p, fits, settings)
        return fits
    fits = fit_bath(p, settings, methods, fits)
    write_artifacts(directory, fits)
    return fits
