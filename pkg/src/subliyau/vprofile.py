"""Admissible profiles ``V`` on ``[0, 1]`` and the constants they produce.

After the substitution ``V(b) = -b^2 b'`` and the two rescalings, a profile
``V >= 0`` with ``int_0^1 x^2 / V dx = 1`` and ``V(x)/x^2 -> 0`` yields

    V(1) Gamma(u) + t (Zu)^2
        <= (alpha(V) - 2 rho t) d_t u
           + (beta(V) - alpha(V)^2 + (alpha(V) - 2 rho t)^2) / (4t),

    alpha(V) = int_0^1 V'/x^2,   beta(V) = int_0^1 (V'/x^2)^2.

Profiles are piecewise power laws: ``V = K_i x**q_i`` on each cell, with
the first cell ``[0, x_1]`` carrying the near-zero exponent ``p``.  The
two-parameter family ``V = lam x^3`` on ``[eps, 1]`` and
``V = lam eps^(3-gamma) x^gamma`` on ``[0, eps]`` is the special case with
nodes ``(0, eps, 1)``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .liyau import BProfile, LiYauForm


class AdmissibilityError(ValueError):
    """Profile outside the admissible class (divergent constraint or beta)."""


def family_lambda(eps, gamma):
    return -math.log(eps) + 1.0 / (3.0 - gamma)


def family_alpha(eps, gamma):
    lam = family_lambda(eps, gamma)
    return lam * (3.0 + 2.0 * eps * (3.0 - gamma) / (gamma - 2.0))


def family_beta(eps, gamma):
    lam = family_lambda(eps, gamma)
    return lam**2 * (9.0 + eps * (15.0 - gamma) * (3.0 - gamma) / (2.0 * gamma - 5.0))


def family_beta_minus_alpha_sq(eps, gamma):
    """``beta - alpha^2`` for the family, expanded.

    Equals ``lam^2 eps (3-g)^2/(g-2) ((g+10)/(2g-5) - 4 eps/(g-2))``.
    """
    lam = family_lambda(eps, gamma)
    return (
        lam**2 * eps * (3.0 - gamma) ** 2 / (gamma - 2.0)
        * ((gamma + 10.0) / (2.0 * gamma - 5.0) - 4.0 * eps / (gamma - 2.0))
    )


def _check_family(eps, gamma):
    if not 0.0 < eps < 1.0:
        raise AdmissibilityError(f"eps must lie in (0, 1), got {eps}")
    if not 2.5 < gamma < 3.0:
        raise AdmissibilityError(f"gamma must lie in (5/2, 3), got {gamma}")


@dataclass
class VProfile:
    """Piecewise power-law profile.

    ``nodes`` runs from 0 to the right end (1 for reduced profiles),
    ``values[i]`` is ``V(nodes[i + 1])`` and ``p`` the exponent on the
    first cell.
    """

    nodes: np.ndarray
    values: np.ndarray
    p: float
    kind: str = "grid"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes[0] != 0.0 or np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must start at 0 and increase")
        if self.values.shape != (len(self.nodes) - 1,):
            raise ValueError("one value per node after 0")
        if np.any(self.values <= 0):
            raise AdmissibilityError("V must be positive on (0, 1]")
        if self.p <= 2.0:
            raise AdmissibilityError("V(x)/x^2 must vanish at 0: need p > 2")

    # -- construction ----------------------------------------------------
    @classmethod
    def parametric(cls, eps, gamma):
        _check_family(eps, gamma)
        lam = family_lambda(eps, gamma)
        return cls(
            [0.0, eps, 1.0],
            [lam * eps**3, lam],
            gamma,
            kind="parametric",
            params={"eps": float(eps), "gamma": float(gamma), "lambda": lam},
        )

    @classmethod
    def power(cls, p, scale=1.0):
        """``scale * x**p`` on ``[0, 1]``."""
        return cls([0.0, 1.0], [scale], p)

    @property
    def right(self):
        return float(self.nodes[-1])

    @property
    def exponents(self) -> np.ndarray:
        inner = np.log(self.values[1:] / self.values[:-1]) / np.log(self.nodes[2:] / self.nodes[1:-1])
        return np.concatenate([[self.p], inner])

    @property
    def prefactors(self) -> np.ndarray:
        return self.values / self.nodes[1:] ** self.exponents

    def _cell(self, x):
        return np.clip(np.searchsorted(self.nodes, x, side="left") - 1, 0, len(self.values) - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = self._cell(x)
        return self.prefactors[i] * x ** self.exponents[i]

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        i = self._cell(x)
        q = self.exponents[i]
        return self.prefactors[i] * q * x ** (q - 1.0)

    def to_dict(self):
        if self.kind == "parametric":
            return {"representation": "parametric", "eps": self.params["eps"], "gamma": self.params["gamma"]}
        return {
            "representation": "grid",
            "nodes": self.nodes.tolist(),
            "values": self.values.tolist(),
            "p": float(self.p),
        }

    @classmethod
    def from_dict(cls, data):
        if data["representation"] == "parametric":
            return cls.parametric(data["eps"], data["gamma"])
        return cls(data["nodes"], data["values"], data["p"])

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# -- exact cell integrals --------------------------------------------------
def _power_integral(e, a, b):
    """``int_a^b x**e dx`` allowing ``a = 0`` when convergent."""
    if a == 0.0 and e <= -1.0:
        return math.inf
    if abs(e + 1.0) < 1e-13:
        return math.log(b / a)
    return (b ** (e + 1.0) - (a ** (e + 1.0) if a > 0 else 0.0)) / (e + 1.0)


def _diagnose(V: VProfile, need_beta=True):
    if V.p >= 3.0:
        raise AdmissibilityError(
            f"constraint integral int x^2/V diverges at 0 for near-zero power p = {V.p:g} >= 3"
        )
    if need_beta and V.p <= 2.5:
        raise AdmissibilityError(f"beta diverges at 0 for near-zero power p = {V.p:g} <= 5/2")


def constraint_integral(V: VProfile, method="exact") -> float:
    """``int_0^1 x^2 / V dx``."""
    _diagnose(V, need_beta=False)
    if method == "quad":
        return _quad_sum(V, lambda x: x * x / V(x), 2.0 - V.p)
    total = 0.0
    for a, b, K, q in zip(V.nodes[:-1], V.nodes[1:], V.prefactors, V.exponents):
        total += _power_integral(2.0 - q, a, b) / K
    return total


def normalize(V: VProfile) -> VProfile:
    """Scale ``V`` so that the constraint integral equals one."""
    c = constraint_integral(V)
    if not np.isfinite(c) or c <= 0:
        raise AdmissibilityError("constraint integral is not finite and positive")
    if V.kind == "parametric" and abs(c - 1.0) < 1e-12:
        return V
    return VProfile(V.nodes, V.values * c, V.p)


@dataclass
class VFunctionals:
    alpha: float
    beta: float
    v_at_1: float
    alpha_by_parts: float = math.nan
    constraint: float = math.nan

    @property
    def C(self):
        """Constant of ``d_t u >= -C/t`` at ``rho = 0``."""
        return self.beta / (4.0 * self.alpha)

    def to_dict(self):
        d = dict(self.__dict__)
        d["C"] = self.C
        return d


def _quad_cell(fn, a, b, singular_exponent):
    """Quadrature on one cell; on ``[0, b]`` substitute ``x = b u**k``."""
    if a > 0.0:
        val, _ = integrate.quad(fn, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        return val
    e = singular_exponent
    # x**e dx becomes u**(k(e+1)-1) du, bounded once k(e+1) >= 1
    k = 1.0 if e >= 0 else math.ceil(1.0 / (e + 1.0) - 1e-12)

    def g(u):
        x = b * u**k
        return fn(x) * b * k * u ** (k - 1.0)

    val, _ = integrate.quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _quad_sum(V, fn, first_exponent):
    total = 0.0
    for i, (a, b) in enumerate(zip(V.nodes[:-1], V.nodes[1:])):
        total += _quad_cell(fn, a, b, first_exponent if i == 0 else 0.0)
    return total


def functionals(V: VProfile, method="quad") -> VFunctionals:
    """``alpha(V)``, ``beta(V)`` and ``V(1)``.

    ``method='quad'`` integrates numerically cell by cell and computes
    ``alpha`` twice, directly and through ``V(1) + 2 int V/x^3``;
    ``method='exact'`` uses the power-law cell primitives.
    """
    _diagnose(V)
    v1 = float(V.values[-1])
    if method == "quad":
        p = V.p
        alpha = _quad_sum(V, lambda x: V.derivative(x) / (x * x), p - 3.0)
        by_parts = v1 + 2.0 * _quad_sum(V, lambda x: V(x) / x**3, p - 3.0)
        beta = _quad_sum(V, lambda x: (V.derivative(x) / (x * x)) ** 2, 2.0 * p - 6.0)
        constraint = constraint_integral(V, "quad")
        if abs(alpha - by_parts) > 1e-8 * max(1.0, abs(alpha)):
            raise ArithmeticError(f"alpha routes disagree: {alpha} vs {by_parts}")
        return VFunctionals(alpha, beta, v1, by_parts, constraint)
    alpha = beta = by_parts = 0.0
    for a, b, K, q in zip(V.nodes[:-1], V.nodes[1:], V.prefactors, V.exponents):
        alpha += K * q * _power_integral(q - 3.0, a, b)
        by_parts += 2.0 * K * _power_integral(q - 3.0, a, b)
        beta += (K * q) ** 2 * _power_integral(2.0 * q - 6.0, a, b)
    return VFunctionals(alpha, beta, v1, v1 + by_parts, constraint_integral(V))


def liyau_from_V(V: VProfile, rho, t, fn: VFunctionals | None = None) -> LiYauForm:
    """Li-Yau coefficients of a normalized profile at curvature ``rho``, time ``t``."""
    fn = fn or functionals(V)
    rate = fn.alpha - 2.0 * rho * t
    return LiYauForm(
        fn.v_at_1,
        float(t),
        rate,
        (fn.beta - fn.alpha**2 + rate**2) / (4.0 * t),
        float(rho),
        float(t),
        source=f"V-profile[{V.kind}]",
    )


def profile_from_b(profile: BProfile, n=64) -> VProfile:
    """Reduced profile of ``b`` through ``V(x) = -b^2 b'`` at ``x = b(s)``.

    The raw profile lives on ``[0, b(0)]`` with constraint integral ``t``;
    it is mapped to ``[0, 1]`` by ``W(y) = V(b(0) y) t / b(0)^3``.  Cells are
    power-law interpolated, which is exact for ``b = (t - s)**alpha``.
    """
    t = profile.t
    b0 = float(profile.b(0.0))
    # sample densely towards s = t where x -> 0
    u = np.linspace(0.0, 1.0, n + 1)[:-1]
    s = t * (1.0 - (1.0 - u) ** 2)
    x = profile.b(s)[::-1]
    v = (-(profile.b(s) ** 2) * profile.db(s))[::-1]
    y = x / b0
    w = v * t / b0**3
    p = math.log(w[1] / w[0]) / math.log(y[1] / y[0])
    return VProfile(np.concatenate([[0.0], y]), w, p)


def raw_constants(V_fn, dV_fn, b0):
    """``(t, a0, A, B)`` of an unreduced profile on ``[0, b0]`` at ``rho = 0``.

    ``a0 Gamma(u) + b0 (Zu)^2 <= A d_t u + B``; used to check that the
    rescalings leave the constant ``C = t B / A`` unchanged.
    """
    quad = lambda f: integrate.quad(f, 0.0, b0, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    t = quad(lambda x: x * x / V_fn(x))
    A = quad(lambda x: dV_fn(x) / (x * x))
    B = 0.25 * quad(lambda x: (dV_fn(x) / (x * x)) ** 2)
    return t, V_fn(b0) / b0**2, A, B


# -- best constant search ------------------------------------------------------
@dataclass
class SearchResult:
    C_min: float
    profile: VProfile
    evaluated: int
    min_evaluated_C: float
    all_above_two: bool
    trace: list = field(default_factory=list)

    def trace_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stage", "step", "eps", "gamma", "C"])
        for row in self.trace:
            writer.writerow([row[0], row[1], f"{row[2]:.12g}", f"{row[3]:.12g}", f"{row[4]:.12g}"])
        return buf.getvalue()


def family_C(eps, gamma):
    return family_beta(eps, gamma) / (4.0 * family_alpha(eps, gamma))


def best_C_rho0(n_eps=40, n_gamma=30, grid_nodes=12, sweeps=30, seed=0) -> SearchResult:
    """Smallest ``C = beta / (4 alpha)`` found over admissible profiles.

    Stage 1 scans the family on an ``n_eps x n_gamma`` grid and refines the
    best point with Nelder-Mead.  Stage 2 starts from that profile on a
    free power-law grid and runs a coordinate search on ``log V`` at the
    nodes and on the near-zero exponent, renormalizing after every move.
    """
    trace = []
    values = []
    eps_grid = np.logspace(-6, -0.05, n_eps)
    gamma_grid = np.linspace(2.5, 3.0, n_gamma + 2)[1:-1]
    for i, e in enumerate(eps_grid):
        for j, g in enumerate(gamma_grid):
            c = family_C(e, g)
            values.append(c)
            trace.append(("scan", i * n_gamma + j, e, g, c))
    k = int(np.argmin(values))
    e0, g0 = trace[k][2], trace[k][3]

    def family_obj(z):
        e = 1.0 / (1.0 + math.exp(-z[0]))
        g = 2.5 + 0.5 / (1.0 + math.exp(-z[1]))
        if not (0 < e < 1 and 2.5 < g < 3):
            return math.inf
        c = family_C(e, g)
        values.append(c)
        trace.append(("refine", len(trace), e, g, c))
        return c

    z0 = [math.log(e0 / (1 - e0)), math.log((g0 - 2.5) / (3.0 - g0))]
    res = optimize.minimize(family_obj, z0, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-12})
    e_best = 1.0 / (1.0 + math.exp(-res.x[0]))
    g_best = 2.5 + 0.5 / (1.0 + math.exp(-res.x[1]))
    best_family = VProfile.parametric(e_best, g_best)

    # stage 2: free grid warm-started from the family optimum
    rng = np.random.default_rng(seed)
    nodes = np.unique(np.concatenate([[0.0], np.geomspace(e_best, 1.0, grid_nodes)]))
    V = normalize(VProfile(nodes, best_family(nodes[1:]), g_best))
    best_c = functionals(V, "exact").C
    values.append(best_c)
    step = 0.05
    n_coord = len(V.values) + 1
    for sweep in range(sweeps):
        improved = False
        for idx in rng.permutation(n_coord):
            for sign in (1.0, -1.0):
                logv = np.log(V.values)
                p = V.p
                if idx < len(V.values):
                    logv = logv.copy()
                    logv[idx] += sign * step
                else:
                    p = p + sign * step * 0.1
                    if not 2.5 < p < 3.0:
                        continue
                cand = normalize(VProfile(V.nodes, np.exp(logv), p))
                c = functionals(cand, "exact").C
                values.append(c)
                trace.append(("grid", sweep, float(cand.nodes[1]), cand.p, c))
                if c < best_c - 1e-14:
                    V, best_c, improved = cand, c, True
                    break
        if not improved:
            step *= 0.5
            if step < 1e-5:
                break
    best_profile = V if best_c < res.fun else best_family
    values = np.asarray(values)
    return SearchResult(
        float(min(best_c, res.fun)),
        best_profile,
        int(values.size),
        float(values.min()),
        bool(np.all(values > 2.0)),
        trace,
    )


# -- long-time behaviour for rho > 0 -------------------------------------------------
@dataclass
class DecayFit:
    slope: float
    intercept: float
    t: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    order_ratio: np.ndarray

    @property
    def width(self):
        return self.upper + self.lower

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "t": self.t.tolist(),
            "upper": self.upper.tolist(),
            "lower": self.lower.tolist(),
            "order_ratio": self.order_ratio.tolist(),
        }


def decay_eps(rho, t, gamma, c):
    R = c * t * math.exp(-rho * t / 3.0)
    return math.exp(-2.0 * rho * t / 3.0 + 1.0 / (3.0 - gamma) + R)


def long_time_decay(rho, t_grid, gamma=2.75, c=2.5) -> DecayFit:
    """Two-sided bound on ``d_t log P_t f`` from the tuned family, and its decay rate.

    For each ``t`` the family parameter is
    ``eps = exp(-2 rho t/3 + 1/(3 - gamma) + R)`` with ``R = c t exp(-rho t/3)``.
    A positive ``c`` makes the rate coefficient negative and bounds
    ``d_t u`` from above; ``-c`` bounds it from below.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    upper, lower, ratio = [], [], []
    for t in t_grid:
        bounds = {}
        for sign in (1.0, -1.0):
            eps = decay_eps(rho, t, gamma, sign * abs(c))
            if eps >= 1.0:
                raise AdmissibilityError(f"t = {t} too small: eps = {eps:.3g} >= 1")
            fn = VFunctionals(family_alpha(eps, gamma), family_beta(eps, gamma), family_lambda(eps, gamma))
            form = liyau_from_V(VProfile.parametric(eps, gamma), rho, t, fn)
            # Gamma and (Zu)^2 terms are non-negative, so rate * d_t u >= -const
            bounds[sign] = form.c_const / abs(form.c_rate)
            if sign > 0:
                if form.c_rate >= 0:
                    raise ArithmeticError("rate coefficient did not turn negative")
                ratio.append(form.c_rate**2 / family_beta_minus_alpha_sq(eps, gamma))
            elif form.c_rate <= 0:
                raise ArithmeticError("rate coefficient did not stay positive")
        upper.append(bounds[1.0])
        lower.append(bounds[-1.0])
    upper, lower = np.array(upper), np.array(lower)
    slope, intercept = np.polyfit(t_grid, np.log(upper + lower), 1)
    return DecayFit(float(slope), float(intercept), t_grid, upper, lower, np.array(ratio))
