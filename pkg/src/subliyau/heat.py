"""Monte Carlo heat semigroup ``P_t = exp(tL)`` on the model groups.

The left-invariant diffusion generated by ``L = X^2 + Y^2`` started at
``x`` is ``x W_t`` where ``W`` starts at the identity.  One step is

    W <- W exp(sqrt(2h) (xi_1 X + xi_2 Y)),   xi_i ~ N(0, 1),

whose one-step expectation is ``f + h (X^2 + Y^2) f + O(h^2)``: the
``sqrt(2h)`` scaling matches ``L`` without a factor one half.  Paths are
generated in fixed-size chunks, each with its own child seed, and reduced
in chunk order, so results depend only on the seed and the path count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .groups import HEISENBERG, X, Y, Z, get_model
from .jets import ScalarField

CHUNK = 1 << 15


class NumericalError(RuntimeError):
    """Non-finite or non-positive values where a positive finite one is needed."""


@dataclass
class DiffusionConfig:
    step: float = 1e-2
    paths: int = 10_000
    seed: int = 0
    renorm_interval: int = 64
    workers: int = 1


@dataclass
class HeatEstimate:
    mean: float
    std_error: float
    paths_used: int

    def to_dict(self):
        return asdict(self)


@dataclass
class LogHeatDerivatives:
    """Estimates of ``Gamma(u)``, ``(Zu)^2`` and ``d_t u`` for ``u = log P_t f``."""

    gamma_u: np.ndarray
    zu_sq: np.ndarray
    du_dt: np.ndarray
    gamma_u_err: np.ndarray
    zu_sq_err: np.ndarray
    du_dt_err: np.ndarray
    t: float
    rho: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        out = {}
        for k, v in asdict(self).items():
            out[k] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
        return out


def mc_step(model, g, h, noise):
    """Advance ``g`` by one step driven by ``noise = (xi_1, xi_2)``."""
    model = get_model(model)
    noise = np.asarray(noise, dtype=float)
    coeffs = np.zeros(noise.shape[:-1] + (3,))
    coeffs[..., :2] = math.sqrt(2.0 * h) * noise
    return g @ model.exp(coeffs)


def _segments(times, step):
    """Equal sub-steps for every interval between consecutive record times."""
    out, prev = [], 0.0
    for t in times:
        span = t - prev
        n = max(1, math.ceil(span / step - 1e-9)) if span > 0 else 0
        out.append((n, span / n if n else 0.0))
        prev = t
    return out


def _chunk_seeds(seed, paths):
    n_chunks = max(1, math.ceil(paths / CHUNK))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK, paths - i * CHUNK) for i in range(n_chunks)]
    return list(zip(children, sizes))


def _simulate_chunk(model, times, cfg, child, size):
    rng = np.random.default_rng(child)
    g = np.broadcast_to(model.identity(), (size, model.size, model.size)).copy()
    out = np.empty((len(times), size, model.size, model.size))
    count = 0
    for k, (n, h) in enumerate(_segments(times, cfg.step)):
        for _ in range(n):
            g = mc_step(model, g, h, rng.standard_normal((size, 2)))
            count += 1
            if cfg.renorm_interval and count % cfg.renorm_interval == 0:
                g = model.renormalize(g)
        out[k] = g
    return out


def brownian_samples(model, times, cfg: DiffusionConfig) -> np.ndarray:
    """Samples of ``W_t`` from the identity at each of ``times``.

    Returns an array ``(len(times), paths, n, n)``.
    """
    model = get_model(model)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("times must be non-negative and sorted")
    jobs = _chunk_seeds(cfg.seed, cfg.paths)
    run = lambda job: _simulate_chunk(model, times, cfg, *job)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    return np.concatenate(parts, axis=1)


def heisenberg_coordinates_samples(times, cfg: DiffusionConfig) -> np.ndarray:
    """Fast Heisenberg route in ``(x, y, z)``; same law as :func:`brownian_samples`.

    Uses ``(x, y, z) exp(aX + bY) = (x + a, y + b, z + x b + a b / 2)``.
    Returns ``(len(times), paths, 3)``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    parts = []
    for child, size in _chunk_seeds(cfg.seed, cfg.paths):
        rng = np.random.default_rng(child)
        x = np.zeros(size)
        y = np.zeros(size)
        z = np.zeros(size)
        out = np.empty((len(times), size, 3))
        for k, (n, h) in enumerate(_segments(times, cfg.step)):
            s = math.sqrt(2.0 * h)
            for _ in range(n):
                xi = rng.standard_normal((size, 2))
                a, b = s * xi[:, 0], s * xi[:, 1]
                z += x * b + 0.5 * a * b
                x += a
                y += b
            out[k, :, 0], out[k, :, 1], out[k, :, 2] = x, y, z
        parts.append(out)
    return np.concatenate(parts, axis=1)


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NumericalError("f produced NaN or overflow along sampled paths")


def estimate_Ptf(x, f: ScalarField, t, cfg: DiffusionConfig, samples=None) -> HeatEstimate:
    """``P_t f(x) = E f(x W_t)`` with its standard error."""
    model = f.model
    x = np.asarray(getattr(x, "matrix", x), dtype=float)
    if t == 0:
        return HeatEstimate(float(f(x)), 0.0, 0)
    w = brownian_samples(model, [t], cfg)[0] if samples is None else samples
    vals = f(x @ w)
    _check_finite(vals)
    n = vals.size
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return HeatEstimate(float(np.mean(vals)), se, n)


def _log_ratio(plus, minus, scale):
    """Central difference of ``log mean`` with a per-path influence function."""
    mp, mm = plus.mean(axis=-1), minus.mean(axis=-1)
    if np.any(mp <= 0) or np.any(mm <= 0):
        raise NumericalError("non-positive semigroup estimate; too few paths or f not positive")
    est = (np.log(mp) - np.log(mm)) / scale
    infl = (plus / mp[..., None] - minus / mm[..., None]) / scale
    return est, infl


def _std_of_mean(infl):
    n = infl.shape[-1]
    return np.std(infl, axis=-1, ddof=1) / math.sqrt(n)


def estimate_log_derivatives(points, f: ScalarField, t, cfg: DiffusionConfig, eps=1e-2, dt=None,
                             method="difference") -> LogHeatDerivatives:
    """Derivatives of ``u = log P_t f`` at ``points`` by common random numbers.

    Spatial derivatives use ``[u(x e^{eps A}) - u(x e^{-eps A})] / (2 eps)``
    with the same Brownian samples for both starts.  ``d_t u`` uses symmetric
    time differences (``method='difference'``) or the exact identity
    ``d_t u = P_t(Lf) / P_t f`` (``method='generator'``).
    """
    from .gamma import L_op

    model = f.model
    pts = np.asarray(getattr(points, "matrix", points), dtype=float)
    single = pts.ndim == 2
    pts = pts.reshape((-1, model.size, model.size))
    dt = dt if dt is not None else max(cfg.step, 0.2 * t)
    if method == "difference":
        if dt >= t:
            raise ValueError("time difference must be smaller than t")
        w_minus, w_mid, w_plus = brownian_samples(model, [t - dt, t, t + dt], cfg)
    else:
        w_mid = brownian_samples(model, [t], cfg)[0]

    def values(base, w):
        out = f(base[:, None] @ w[None])
        _check_finite(out)
        return out

    center = values(pts, w_mid)
    grads, infls = {}, {}
    for name, direction in (("X", X), ("Y", Y), ("Z", Z)):
        plus = values(pts @ model.exp(eps * direction), w_mid)
        minus = values(pts @ model.exp(-eps * direction), w_mid)
        grads[name], infls[name] = _log_ratio(plus, minus, 2.0 * eps)
    gamma_u = grads["X"] ** 2 + grads["Y"] ** 2
    gamma_infl = 2.0 * grads["X"][:, None] * infls["X"] + 2.0 * grads["Y"][:, None] * infls["Y"]
    zu_sq = grads["Z"] ** 2
    z_infl = 2.0 * grads["Z"][:, None] * infls["Z"]
    if method == "difference":
        du_dt, dt_infl = _log_ratio(values(pts, w_plus), values(pts, w_minus), 2.0 * dt)
    else:
        lf = L_op(f)(pts[:, None] @ w_mid[None])
        _check_finite(lf)
        mc, ml = center.mean(axis=-1), lf.mean(axis=-1)
        du_dt = ml / mc
        dt_infl = lf / mc[:, None] - (ml / mc**2)[:, None] * center
    out = LogHeatDerivatives(
        gamma_u, zu_sq, du_dt,
        _std_of_mean(gamma_infl), _std_of_mean(z_infl), _std_of_mean(dt_infl),
        float(t), model.rho,
        extras={"Xu": grads["X"], "Yu": grads["Y"], "Zu": grads["Z"], "Ptf": center.mean(axis=-1)},
    )
    if single:
        for name in ("gamma_u", "zu_sq", "du_dt", "gamma_u_err", "zu_sq_err", "du_dt_err"):
            setattr(out, name, float(np.asarray(getattr(out, name))[0]))
    return out


# -- short-time behaviour on the Heisenberg group -------------------------------------
@dataclass
class ExponentFit:
    slope: float
    slope_err: float
    intercept: float
    t: np.ndarray
    density: np.ndarray
    density_err: np.ndarray
    residual: float

    @property
    def ci(self):
        return (self.slope - 3 * self.slope_err, self.slope + 3 * self.slope_err)

    def to_dict(self):
        return {
            "slope": self.slope,
            "slope_err": self.slope_err,
            "intercept": self.intercept,
            "ci": list(self.ci),
            "t": self.t.tolist(),
            "density": self.density.tolist(),
            "density_err": self.density_err.tolist(),
            "residual": self.residual,
        }


def heisenberg_density_at_identity(t_grid, cfg: DiffusionConfig, bandwidth=0.3, samples=None):
    """Box-kernel estimate of ``p_t(e, e)`` on the Heisenberg group.

    The box is ``|x|, |y| < bandwidth sqrt(t)`` and ``|z| < bandwidth^2 t``,
    i.e. a fixed box in the dilation-invariant scale; Haar measure is
    ``dx dy dz``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    s = heisenberg_coordinates_samples(t_grid, cfg) if samples is None else samples
    dens, errs = [], []
    for k, t in enumerate(t_grid):
        hx = bandwidth * math.sqrt(t)
        hz = bandwidth**2 * t
        inside = (np.abs(s[k, :, 0]) < hx) & (np.abs(s[k, :, 1]) < hx) & (np.abs(s[k, :, 2]) < hz)
        count = int(inside.sum())
        if count < 30:
            raise NumericalError(f"only {count} samples in the kernel window at t={t}; raise paths")
        vol = (2 * hx) ** 2 * (2 * hz)
        n = s.shape[1]
        dens.append(count / (n * vol))
        errs.append(math.sqrt(count) / (n * vol))
    return np.array(dens), np.array(errs)


def fit_log_log(t, y, yerr):
    """Weighted least squares of ``log y`` on ``log t``; returns slope, its error, intercept, rms."""
    lt, ly = np.log(t), np.log(y)
    w = (y / yerr) ** 2
    A = np.stack([np.ones_like(lt), lt], axis=1)
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    coef = cov @ (A.T @ (w * ly))
    resid = ly - A @ coef
    return float(coef[1]), float(math.sqrt(cov[1, 1])), float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def short_time_exponent(cfg: DiffusionConfig, t_grid=None, bandwidth=0.3, max_ci_width=0.3) -> ExponentFit:
    """Fitted exponent of ``p_t(e, e)`` as ``t -> 0`` on the Heisenberg group."""
    t_grid = np.geomspace(0.05, 0.4, 6) if t_grid is None else np.asarray(t_grid, float)
    dens, errs = heisenberg_density_at_identity(t_grid, cfg, bandwidth)
    slope, slope_err, icpt, resid = fit_log_log(t_grid, dens, errs)
    fit = ExponentFit(slope, slope_err, icpt, t_grid, dens, errs, resid)
    if 6 * slope_err > max_ci_width:
        raise NumericalError(f"exponent CI too wide ({6 * slope_err:.3g}); raise paths or bandwidth")
    return fit


def dilation_summaries(t_grid, cfg: DiffusionConfig) -> dict:
    """Moments of ``(x/sqrt t, y/sqrt t, z/t)`` at each time, with standard errors."""
    t_grid = np.asarray(t_grid, dtype=float)
    s = heisenberg_coordinates_samples(t_grid, cfg)
    rows = []
    for k, t in enumerate(t_grid):
        lam = 1.0 / math.sqrt(t)
        x, y, z = s[k, :, 0] * lam, s[k, :, 1] * lam, s[k, :, 2] * lam**2
        stats = {}
        for name, v in (("x2", x * x), ("y2", y * y), ("z", z), ("z2", z * z), ("absz", np.abs(z))):
            stats[name] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)))
        rows.append(stats)
    return {"t": t_grid.tolist(), "moments": rows}


def trajectory_rows(model, cfg: DiffusionConfig, n_steps):
    """Rows ``(path_id, step, entries...)`` for a CSV trajectory dump."""
    model = get_model(model)
    rng = np.random.default_rng(cfg.seed)
    g = np.broadcast_to(model.identity(), (cfg.paths, model.size, model.size)).copy()
    rows = []
    for step in range(n_steps + 1):
        for pid in range(cfg.paths):
            rows.append([pid, step] + g[pid].ravel().tolist())
        if step < n_steps:
            g = mc_step(model, g, cfg.step, rng.standard_normal((cfg.paths, 2)))
            if cfg.renorm_interval and (step + 1) % cfg.renorm_interval == 0:
                g = model.renormalize(g)
    return rows
