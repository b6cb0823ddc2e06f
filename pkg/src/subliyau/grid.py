"""Explicit finite differences for the Heisenberg heat equation.

In the coordinates ``(x, y, z)`` of the unit upper-triangular matrix,
``X = d_x`` and ``Y = d_y + x d_z``, so

    L f = f_xx + f_yy + 2 x f_yz + x^2 f_zz.

Central differences on a uniform box; walls are Neumann (mirror ghost
cells) or Dirichlet (boundary nodes frozen).  The time step obeys

    dt <= c_stab * min(dx, dy, dz)^2 / (1 + x_max^2),

which with ``c_stab = 1/6`` bounds the sum of absolute stencil weights by
one.  The mixed central stencil has negative off-diagonal weights, so the
scheme is not monotone; positivity is monitored rather than guaranteed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator


class StabilityError(ValueError):
    pass


class BoxTooSmallError(RuntimeError):
    """Mass reached the walls, so the box no longer stands in for the whole group."""


class ResolutionError(RuntimeError):
    pass


@dataclass
class GridConfig:
    half_widths: tuple = (5.0, 5.0, 8.0)
    shape: tuple = (41, 41, 65)
    c_stab: float = 1.0 / 6.0
    dt: float | None = None
    boundary: str = "neumann"
    wall_tol: float = 2e-2

    @property
    def axes(self):
        return [np.linspace(-h, h, n) for h, n in zip(self.half_widths, self.shape)]

    @property
    def spacing(self):
        return tuple(2.0 * h / (n - 1) for h, n in zip(self.half_widths, self.shape))

    @property
    def dt_max(self):
        return self.c_stab * min(self.spacing) ** 2 / (1.0 + self.half_widths[0] ** 2)

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def refined(self, factor=2):
        shape = tuple((n - 1) * factor + 1 for n in self.shape)
        return GridConfig(self.half_widths, shape, self.c_stab, None, self.boundary, self.wall_tol)

    def coarsened(self, factor=2):
        shape = tuple((n - 1) // factor + 1 for n in self.shape)
        return GridConfig(self.half_widths, shape, self.c_stab, None, self.boundary, self.wall_tol)

    def to_dict(self):
        return asdict(self)


class _Stencil:
    """Preallocated buffers for repeated evaluation of the discrete ``L``."""

    def __init__(self, shape, cfg: GridConfig):
        self.cfg = cfg
        self.pad = np.empty(tuple(shape[:-3]) + tuple(n + 2 for n in shape[-3:]))
        self.out = np.empty(shape)
        self.tmp = np.empty(shape)
        dx, dy, dz = cfg.spacing
        x = cfg.axes[0][:, None, None]
        self.cx, self.cy = 1.0 / dx**2, 1.0 / dy**2
        self.cz = x * x / dz**2
        self.cyz = 2.0 * x / (4.0 * dy * dz)
        self.cc = -2.0 / dx**2 - 2.0 / dy**2 - 2.0 * x * x / dz**2
        # mirror ghosts give zero normal derivative; edge ghosts feed frozen walls
        self.src = 2 if cfg.boundary == "neumann" else 1

    def __call__(self, f):
        P, k = self.pad, self.src
        P[..., 1:-1, 1:-1, 1:-1] = f
        P[..., 0, :, :] = P[..., k, :, :]
        P[..., -1, :, :] = P[..., -1 - k, :, :]
        P[..., :, 0, :] = P[..., :, k, :]
        P[..., :, -1, :] = P[..., :, -1 - k, :]
        P[..., :, :, 0] = P[..., :, :, k]
        P[..., :, :, -1] = P[..., :, :, -1 - k]
        o, t = self.out, self.tmp
        np.add(P[..., 2:, 1:-1, 1:-1], P[..., :-2, 1:-1, 1:-1], out=o)
        o *= self.cx
        np.add(P[..., 1:-1, 2:, 1:-1], P[..., 1:-1, :-2, 1:-1], out=t)
        t *= self.cy
        o += t
        np.add(P[..., 1:-1, 1:-1, 2:], P[..., 1:-1, 1:-1, :-2], out=t)
        t *= self.cz
        o += t
        np.subtract(P[..., 1:-1, 2:, 2:], P[..., 1:-1, 2:, :-2], out=t)
        t -= P[..., 1:-1, :-2, 2:]
        t += P[..., 1:-1, :-2, :-2]
        t *= self.cyz
        o += t
        np.multiply(f, self.cc, out=t)
        o += t
        if self.cfg.boundary == "dirichlet":
            o[..., 0, :, :] = o[..., -1, :, :] = 0.0
            o[..., :, 0, :] = o[..., :, -1, :] = 0.0
            o[..., :, :, 0] = o[..., :, :, -1] = 0.0
        return o


def apply_L(f, cfg: GridConfig):
    """Discrete ``L f``; leading axes of ``f`` are treated as a batch."""
    f = np.asarray(f, dtype=float)
    return _Stencil(f.shape, cfg)(f).copy()


def mass(f, cfg: GridConfig):
    """Trapezoid integral over the box (Haar measure is ``dx dy dz``)."""
    out = f
    for ax, h in zip((-3, -2, -1), cfg.spacing):
        out = integrate.trapezoid(out, dx=h, axis=ax)
    return out


def wall_fraction(f, f0_floor, cfg: GridConfig):
    """Largest deviation from the floor on the walls relative to the interior."""
    dev = np.abs(f - f0_floor)
    top = float(dev.max())
    if top == 0:
        return 0.0
    faces = [dev[..., 0, :, :], dev[..., -1, :, :], dev[..., :, 0, :], dev[..., :, -1, :],
             dev[..., :, :, 0], dev[..., :, :, -1]]
    return max(float(face.max()) for face in faces) / top


@dataclass
class GridRun:
    """Snapshots of an explicit solve with bookkeeping."""

    times: np.ndarray
    snapshots: np.ndarray
    cfg: GridConfig
    dt_used: float
    steps: int
    mass: np.ndarray
    min_value: float
    wall: float
    info: dict = field(default_factory=dict)

    def at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12:
            raise KeyError(f"no snapshot at t={t}")
        return self.snapshots[k]


def heisenberg_grid_solve(f0, t, cfg: GridConfig, snapshots=None, check_walls=True) -> GridRun:
    """Evolve ``f0`` (shape ``batch + cfg.shape``) to time ``t``.

    ``snapshots`` lists extra times to record; every requested time is hit
    exactly by shrinking the step within each segment.
    """
    f = np.array(f0, dtype=float)
    if f.shape[-3:] != tuple(cfg.shape):
        raise ValueError(f"grid shape {f.shape[-3:]} does not match config {cfg.shape}")
    bound = cfg.dt_max
    if cfg.dt is not None and cfg.dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt = {cfg.dt:.3g} exceeds the stability bound {bound:.3g}")
    dt_target = cfg.dt or bound
    times = sorted(set([float(s) for s in (snapshots or [])] + [float(t)]))
    if times[0] < 0:
        raise ValueError("times must be non-negative")
    floor = float(np.min(f))
    m0 = mass(f, cfg)
    out, masses = [], []
    prev, steps, dt_used = 0.0, 0, 0.0
    stencil = _Stencil(f.shape, cfg)
    for target in times:
        span = target - prev
        n = math.ceil(span / dt_target - 1e-9) if span > 0 else 0
        if n:
            h = span / n
            dt_used = max(dt_used, h)
            for _ in range(n):
                f += h * stencil(f)
            steps += n
        if not np.all(np.isfinite(f)):
            raise StabilityError("solution blew up")
        out.append(f.copy())
        masses.append(mass(f, cfg))
        prev = target
    wall = wall_fraction(f, floor, cfg)
    run = GridRun(
        np.array(times), np.array(out), cfg, dt_used, steps, np.array(masses), float(np.min(f)), wall,
        {"initial_mass": np.asarray(m0).tolist(), "dt_bound": bound},
    )
    if check_walls and cfg.boundary == "neumann" and wall > cfg.wall_tol:
        raise BoxTooSmallError(f"wall/interior ratio {wall:.3g} exceeds {cfg.wall_tol:g}; enlarge the box")
    return run


WIDE_BUMP = (1.0, 1.0, 1.5)


def gaussian_bump(cfg: GridConfig, width=(0.7, 0.7, 1.0), amplitude=1.0, floor=0.05, center=(0.0, 0.0, 0.0)):
    x, y, z = cfg.mesh()
    q = ((x - center[0]) / width[0]) ** 2 + ((y - center[1]) / width[1]) ** 2 + ((z - center[2]) / width[2]) ** 2
    return floor + amplitude * np.exp(-0.5 * q)


# -- derivative fields ------------------------------------------------------------------
class GridOps:
    """Horizontal derivatives on the grid by second-order central differences."""

    def __init__(self, cfg: GridConfig):
        self.cfg = cfg
        self.h = cfg.spacing
        self.x = cfg.axes[0][:, None, None]

    def _d(self, f, axis):
        return np.gradient(f, self.h[axis], axis=f.ndim - 3 + axis, edge_order=2)

    def X(self, f):
        return self._d(f, 0)

    def Y(self, f):
        return self._d(f, 1) + self.x * self._d(f, 2)

    def Z(self, f):
        return self._d(f, 2)

    def gamma(self, f, h=None):
        h = f if h is None else h
        return self.X(f) * self.X(h) + self.Y(f) * self.Y(h)

    def gamma2(self, g):
        """Expanded ``Gamma_2`` at ``rho = 0``."""
        xg, yg, zg = self.X(g), self.Y(g), self.Z(g)
        sym = self.X(yg) + self.Y(xg)
        return (
            self.X(xg) ** 2 + self.Y(yg) ** 2 + 0.5 * sym**2 + 0.5 * zg**2
            - 2.0 * xg * self.Y(zg) + 2.0 * yg * self.X(zg)
        )


@dataclass
class GridLogDerivatives:
    gamma_u: np.ndarray
    zu_sq: np.ndarray
    du_dt: np.ndarray
    t: float
    rho: float = 0.0


def log_derivatives(F, t, cfg: GridConfig) -> GridLogDerivatives:
    """``Gamma(u)``, ``(Zu)^2`` and ``d_t u = LF / F`` for ``u = log F``."""
    if np.any(F <= 0):
        raise ValueError("grid solution is not positive")
    ops = GridOps(cfg)
    u = np.log(F)
    return GridLogDerivatives(ops.gamma(u), ops.Z(u) ** 2, apply_L(F, cfg) / F, float(t))


def _cubic_method():
    # scipy >= 1.13 solves "cubic" iteratively (errors ~1e-6); the direct variant is exact and faster
    return "cubic_legacy" if "cubic_legacy" in getattr(RegularGridInterpolator, "_ALL_METHODS", ()) else "cubic"


def interpolate(field_, cfg: GridConfig, points):
    fn = RegularGridInterpolator(cfg.axes, field_, method=_cubic_method() if min(cfg.shape) >= 4 else "linear")
    return fn(np.asarray(points, float))


def interior_points(n, seed=0, extent=(1.5, 1.5, 1.5)):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, size=(n, 3)) * np.asarray(extent)


@dataclass
class LiYauGridCheck:
    t: float
    margin: np.ndarray
    budget: np.ndarray
    points: np.ndarray

    @property
    def passed(self):
        return bool(np.all(self.margin >= -self.budget))

    def to_dict(self):
        return {
            "t": self.t,
            "min_margin": float(self.margin.min()),
            "max_budget": float(self.budget.max()),
            "worst_normalized": float(np.min(self.margin + self.budget)),
            "n_points": int(self.margin.size),
            "passed": self.passed,
        }


def liyau_grid_check(form_fn, t_values, cfg: GridConfig, f0_fn=gaussian_bump, n_points=50, seed=0, safety=3.0):
    """Margins of a Li-Yau form on grid solutions at interior points.

    ``form_fn(t)`` returns a :class:`~subliyau.liyau.LiYauForm`.  The
    discretization budget is ``safety`` times the change in margin between
    ``cfg`` and a grid coarsened by two.
    """
    pts = interior_points(n_points, seed)
    results = {}
    margins = {}
    for label, c in (("fine", cfg), ("coarse", cfg.coarsened())):
        run = heisenberg_grid_solve(f0_fn(c), max(t_values), c, snapshots=t_values)
        for t in t_values:
            d = log_derivatives(run.at(t), t, c)
            form = form_fn(t)
            m = form.margin(d.gamma_u, d.zu_sq, d.du_dt)
            margins[(label, t)] = interpolate(m, c, pts)
    for t in t_values:
        fine, coarse = margins[("fine", t)], margins[("coarse", t)]
        results[t] = LiYauGridCheck(float(t), fine, safety * np.abs(fine - coarse), pts)
    return results


# -- the two derivative identities along s -----------------------------------------------
@dataclass
class PhiReport:
    s: np.ndarray
    lhs1: np.ndarray
    rhs1: np.ndarray
    lhs2: np.ndarray
    rhs2: np.ndarray

    def _gap(self, lhs, rhs):
        return np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-3 * np.max(np.abs(rhs)))

    @property
    def gap1(self):
        return self._gap(self.lhs1, self.rhs1)

    @property
    def gap2(self):
        return self._gap(self.lhs2, self.rhs2)

    @property
    def max_gap(self):
        return float(max(self.gap1.max(), self.gap2.max()))

    def to_dict(self):
        return {
            "s": self.s.tolist(),
            "phi1_derivative": self.lhs1.tolist(),
            "phi1_rhs": self.rhs1.tolist(),
            "phi2_derivative": self.lhs2.tolist(),
            "phi2_rhs": self.rhs2.tolist(),
            "max_relative_gap": self.max_gap,
        }


def check_phi_derivatives(f0, t, s_grid, cfg: GridConfig, point=(0.3, -0.2, 0.1), ds=0.02) -> PhiReport:
    """Compare ``d/ds Phi_i(s)`` with its closed expression at one point.

    ``Phi_1(s) = P_s(F Gamma(log F))`` and ``Phi_2(s) = P_s(F (Z log F)^2)``
    with ``F = P_{t-s} f``; the central differences in ``s`` are compared
    against ``2 P_s(F Gamma_2(log F))`` and ``2 P_s(F Gamma(Z log F))``.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid - ds <= 0) or np.any(s_grid + ds >= t):
        raise ValueError("s +- ds must stay inside (0, t)")
    ops = GridOps(cfg)
    times = sorted({round(t - s + k * ds, 12) for s in s_grid for k in (-1, 0, 1)})
    base = heisenberg_grid_solve(f0, max(times), cfg, snapshots=times)
    pt = np.asarray(point, float)[None]

    def fields(tau):
        F = base.at(tau)
        u = np.log(F)
        zu = ops.Z(u)
        return {
            "phi1": F * ops.gamma(u),
            "phi2": F * zu**2,
            "rhs1": 2.0 * F * ops.gamma2(u),
            "rhs2": 2.0 * F * ops.gamma(zu),
        }

    lhs1, rhs1, lhs2, rhs2 = [], [], [], []
    for s in s_grid:
        fm = fields(round(t - s + ds, 12))  # evolved for s - ds
        fp = fields(round(t - s - ds, 12))  # evolved for s + ds
        f0s = fields(round(t - s, 12))
        stack = np.stack([fm["phi1"], fm["phi2"], fp["phi1"], fp["phi2"], f0s["rhs1"], f0s["rhs2"]])
        run = heisenberg_grid_solve(stack, s + ds, cfg, snapshots=[s - ds, s], check_walls=False)
        at = lambda tau, k: float(interpolate(run.at(tau)[k], cfg, pt)[0])
        lhs1.append((at(s + ds, 2) - at(s - ds, 0)) / (2 * ds))
        lhs2.append((at(s + ds, 3) - at(s - ds, 1)) / (2 * ds))
        rhs1.append(at(s, 4))
        rhs2.append(at(s, 5))
    return PhiReport(s_grid, np.array(lhs1), np.array(rhs1), np.array(lhs2), np.array(rhs2))


def harnack_grid_check(run: GridRun, C, points, t_values):
    """``log P_t f <= log P_1 f - C log t`` at ``points`` for each ``t`` in ``(0, 1]``."""
    from .liyau import harnack_time_bound

    log_p1 = np.log(interpolate(run.at(1.0), run.cfg, points))
    return [
        harnack_time_bound(np.log(interpolate(run.at(t), run.cfg, points)), log_p1, t, C) for t in t_values
    ]


# -- snapshot I/O -------------------------------------------------------------------------
def save_snapshot(path, values, cfg: GridConfig, t):
    """Flat little-endian float64 array plus a JSON header next to it."""
    path = Path(path)
    arr = np.ascontiguousarray(values, dtype="<f8")
    arr.tofile(path.with_suffix(".bin"))
    header = {
        "shape": list(arr.shape),
        "box": list(cfg.half_widths),
        "t": float(t),
        "dtype": "float64-le",
        "order": "C",
        "axes": ["x", "y", "z"],
    }
    path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return path.with_suffix(".bin"), path.with_suffix(".json")


def load_snapshot(path):
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    arr = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(header["shape"])
    return arr, header
