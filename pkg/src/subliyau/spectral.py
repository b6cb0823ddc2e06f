"""Spectral gap and ultracontractivity probes.

On SU(2) with the basis used here, matrix-entry functions are eigenfunctions
of ``-L`` with eigenvalue 1/2, the bottom of the non-zero spectrum, so the
squared norm of ``P_t f`` for centered ``f`` decays at rate 1 once higher
modes have died out.  Rates below always refer to the squared norm, which
is twice the spectral gap.

The estimator uses ``int (P_t f)^2 dmu = E[f(x) f(x W_{2t})]`` with ``x``
Haar distributed, which is unbiased with one Brownian path per sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groups import SU2, get_model, realify
from .heat import DiffusionConfig, NumericalError, brownian_samples, fit_log_log, heisenberg_density_at_identity
from .jets import ScalarField


class FitError(RuntimeError):
    pass


def haar_sample_su2(seed, n) -> np.ndarray:
    """Uniform SU(2) elements from unit quaternions, as realified 4x4 matrices."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a = q[:, 0] + 1j * q[:, 1]
    b = q[:, 2] + 1j * q[:, 3]
    m = np.empty((n, 2, 2), dtype=complex)
    m[:, 0, 0], m[:, 0, 1] = a, -np.conj(b)
    m[:, 1, 0], m[:, 1, 1] = b, np.conj(a)
    return realify(m)


@dataclass
class SpectralEstimate:
    decay_rate: float
    rate_err: float
    t: np.ndarray
    norm_sq: np.ndarray
    norm_sq_err: np.ndarray
    residual: float

    @property
    def ci(self):
        return (self.decay_rate - 3 * self.rate_err, self.decay_rate + 3 * self.rate_err)

    @property
    def gap(self):
        return 0.5 * self.decay_rate

    def to_dict(self):
        return {
            "decay_rate": self.decay_rate,
            "rate_err": self.rate_err,
            "ci": list(self.ci),
            "gap": self.gap,
            "t": self.t.tolist(),
            "norm_sq": self.norm_sq.tolist(),
            "norm_sq_err": self.norm_sq_err.tolist(),
            "residual": self.residual,
        }


def variance_decay(f: ScalarField, t_grid, cfg: DiffusionConfig, max_residual=0.25) -> SpectralEstimate:
    """Fit the exponential decay rate of ``int (P_t f)^2 dmu`` for centered ``f``."""
    if f.model != SU2:
        raise ValueError("variance decay needs the compact model su2")
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    x = haar_sample_su2(cfg.seed, cfg.paths)
    fx = f(x)
    fx = fx - fx.mean()
    if np.ptp(fx) <= 1e-12 * (1 + np.abs(fx).max()):
        raise FitError("f is constant on the samples; there is no variance to decay")
    w = brownian_samples(SU2, 2.0 * t_grid, DiffusionConfig(cfg.step, cfg.paths, cfg.seed + 1, cfg.renorm_interval, cfg.workers))
    center = f(x).mean()
    vals, errs = [], []
    for k in range(len(t_grid)):
        prod = fx * (f(x @ w[k]) - center)
        vals.append(prod.mean())
        errs.append(prod.std(ddof=1) / math.sqrt(prod.size))
    vals, errs = np.array(vals), np.array(errs)
    if np.any(vals <= 3 * errs):
        raise FitError("squared norm not resolved above noise; shorten t_grid or add paths")
    slope, slope_err, _, resid = fit_log_log(np.exp(t_grid), vals, errs)
    if resid > max_residual:
        raise FitError(f"log-linear fit residual {resid:.3g}; not in the exponential regime")
    return SpectralEstimate(-slope, slope_err, t_grid, vals, errs, resid)


@dataclass
class PoincareReport:
    lhs: float
    rhs: float
    margin: float
    sigma: float

    @property
    def passed(self):
        return self.margin >= -3 * self.sigma

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "sigma": self.sigma, "passed": self.passed}


def poincare_check(f: ScalarField, n=20_000, seed=0) -> PoincareReport:
    """``int f^2 <= (int f)^2 + (3/rho) int Gamma(f)`` under Haar measure."""
    from .gamma import gamma

    model = f.model
    if model.rho <= 0:
        raise ValueError("needs rho > 0")
    x = haar_sample_su2(seed, n)
    fx = f(x)
    g = gamma(f)(x)
    # shift by one sample so a constant f gives exactly zero variance
    d = fx - fx[0]
    var = float(np.mean(d * d) - np.mean(d) ** 2)
    energy = float(np.mean(g)) * 3.0 / model.rho
    m = float(np.mean(d))
    infl = 3.0 / model.rho * g - (d - m) ** 2
    sigma = float(np.std(infl, ddof=1) / math.sqrt(n)) if np.ptp(infl) > 0 else 0.0
    mean_f = float(np.mean(fx))
    return PoincareReport(var + mean_f**2, mean_f**2 + energy, energy - var, sigma)


@dataclass
class UltraFit:
    A: float
    C: float
    C_err: float
    residual: float
    t: np.ndarray
    density: np.ndarray

    def to_dict(self):
        return {
            "A": self.A,
            "C": self.C,
            "C_err": self.C_err,
            "residual": self.residual,
            "t": self.t.tolist(),
            "density": self.density.tolist(),
        }


def ultracontractivity_probe(cfg: DiffusionConfig, t_grid=None, bandwidth=0.3) -> UltraFit:
    """Fit ``log p_t(e, e) = A - C log t`` on a small-time window (Heisenberg)."""
    t_grid = np.geomspace(0.05, 0.4, 6) if t_grid is None else np.asarray(t_grid, float)
    if t_grid.max() / t_grid.min() < 2.0 or len(t_grid) < 3:
        raise FitError("time window too narrow for a power-law fit")
    dens, errs = heisenberg_density_at_identity(t_grid, cfg, bandwidth)
    slope, slope_err, icpt, resid = fit_log_log(t_grid, dens, errs)
    return UltraFit(icpt, -slope, slope_err, resid, t_grid, dens)
