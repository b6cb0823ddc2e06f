"""Li-Yau coefficients from decreasing time profiles ``b(s)``.

Integrating the differential inequality for ``-b' Phi_1 + b Phi_2`` over
``[0, t]`` with ``b(t) = b'(t) = 0`` gives

    -b'(0) Gamma(u) + b(0) (Zu)^2 <= I_1 d_t u - I_2 / 4,

    I_1 = int_0^t b' E ds,   I_2 = int_0^t b' E^2 ds,
    E = b''/b' + 2 b'/b + 2 rho,

with ``u = log P_t f``.  Forms are normalized so the ``Gamma`` coefficient
is one.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize


class ProfileError(ValueError):
    """The profile violates positivity, monotonicity or terminal conditions."""


class QuadratureError(RuntimeError):
    pass


@dataclass
class BProfile:
    """A non-negative, non-increasing profile on ``[0, t]`` with two derivatives.

    ``order`` is the vanishing order of ``b`` at ``s = t``; it selects the
    endpoint substitution used by the quadrature.
    """

    b: Callable
    db: Callable
    d2b: Callable
    t: float
    order: float = 1.0
    terminal: bool = True
    name: str = "profile"

    def check(self, n=1000):
        s = np.linspace(0.0, self.t, n, endpoint=False)
        if np.any(self.b(s) < 0) or np.any(self.db(s) > 0):
            raise ProfileError(f"{self.name}: b must be non-negative and non-increasing")
        if self.terminal and (abs(self.b(self.t)) > 1e-12 or abs(self.db(self.t)) > 1e-12):
            raise ProfileError(f"{self.name}: b(t) and b'(t) must vanish")
        if self.db(0.0) == 0.0:
            raise ProfileError(f"{self.name}: b'(0) = 0 cannot be normalized")
        return self


def power_profile(alpha, t) -> BProfile:
    """``b(s) = (t - s)**alpha``."""
    alpha = float(alpha)

    def b(s):
        return np.maximum(t - np.asarray(s, float), 0.0) ** alpha

    def db(s):
        return -alpha * np.maximum(t - np.asarray(s, float), 0.0) ** (alpha - 1)

    def d2b(s):
        return alpha * (alpha - 1) * np.maximum(t - np.asarray(s, float), 0.0) ** (alpha - 2)

    return BProfile(b, db, d2b, float(t), order=alpha, name=f"power(alpha={alpha:g})")


def exponential_profile(alpha, rho, t) -> BProfile:
    """``b(s) = (exp(-k s) - exp(-k t))**alpha`` with ``k = 2 rho / (3 alpha)``."""
    if rho <= 0:
        raise ValueError("exponential profile needs rho > 0")
    alpha = float(alpha)
    k = 2.0 * rho / (3.0 * alpha)

    def w(s):
        s = np.asarray(s, float)
        # exp(-ks) - exp(-kt) without cancellation near s = t
        return np.maximum(-np.exp(-k * s) * np.expm1(-k * (t - s)), 0.0)

    def b(s):
        return w(s) ** alpha

    def db(s):
        return -alpha * k * np.exp(-k * np.asarray(s, float)) * w(s) ** (alpha - 1)

    def d2b(s):
        s = np.asarray(s, float)
        e = np.exp(-k * s)
        ws = w(s)
        return alpha * (alpha - 1) * k * k * e * e * ws ** (alpha - 2) + alpha * k * k * e * ws ** (alpha - 1)

    return BProfile(b, db, d2b, float(t), order=alpha, name=f"exp(alpha={alpha:g}, rho={rho:g})")


def integrand_E(profile: BProfile, rho, s):
    """``b''/b' + 2 b'/b + 2 rho``."""
    s = np.asarray(s, float)
    b, db = profile.b(s), profile.db(s)
    if np.any(db == 0) or np.any(b == 0):
        raise ZeroDivisionError("E is undefined where b or b' vanishes")
    return profile.d2b(s) / db + 2.0 * db / b + 2.0 * rho


@dataclass
class LiYauForm:
    """``c_gamma Gamma(u) + c_z (Zu)^2 <= c_rate d_t u + c_const``."""

    c_gamma: float
    c_z: float
    c_rate: float
    c_const: float
    rho: float
    t: float
    source: str = ""
    errors: dict = field(default_factory=dict)

    def normalized(self) -> "LiYauForm":
        s = self.c_gamma
        return LiYauForm(
            1.0, self.c_z / s, self.c_rate / s, self.c_const / s, self.rho, self.t, self.source,
            {k: v / abs(s) for k, v in self.errors.items()},
        )

    def coefficients(self):
        return np.array([self.c_gamma, self.c_z, self.c_rate, self.c_const])

    def margin(self, gamma_u, zu_sq, du_dt):
        return self.c_rate * du_dt + self.c_const - self.c_gamma * gamma_u - self.c_z * zu_sq

    def to_dict(self):
        return asdict(self)


def _substituted(fn, t, k):
    """``int_0^t fn(s) ds`` with ``s = t - tau**k`` to tame the endpoint at ``s = t``."""
    upper = t ** (1.0 / k)

    def g(tau):
        return fn(t - tau**k) * k * tau ** (k - 1)

    return g, upper


def substitution_power(order) -> int:
    """Smallest ``k`` making ``(t-s)**(order-3) ds`` bounded after ``s = t - tau**k``."""
    if order >= 3:
        return 1
    return max(1, math.ceil(1.0 / (order - 2.0) - 1e-12))


def coefficients_from_b(profile: BProfile, rho, rtol=1e-9, k=None) -> LiYauForm:
    """Integrate the profile inequality over ``[0, t]`` numerically."""
    profile.check()
    t = profile.t
    if k is None:
        k = substitution_power(profile.order)

    def first(s):
        return profile.db(s) * integrand_E(profile, rho, s)

    def second(s):
        return profile.db(s) * integrand_E(profile, rho, s) ** 2

    results = []
    for fn in (first, second):
        g, upper = _substituted(fn, t, k)
        # tau = 0 is s = t where b vanishes; quad never samples the endpoint
        val, err = integrate.quad(g, 0.0, upper, epsabs=0.0, epsrel=rtol, limit=500)
        if not np.isfinite(val):
            raise QuadratureError("non-finite integral")
        results.append((val, err))
    (i1, e1), (i2, e2) = results
    scale = -float(profile.db(0.0))
    form = LiYauForm(
        1.0,
        float(profile.b(0.0)) / scale,
        i1 / scale,
        -0.25 * i2 / scale,
        float(rho),
        t,
        source=f"quadrature[{profile.name}]",
        errors={"c_rate": e1 / scale, "c_const": 0.25 * e2 / scale},
    )
    return form


def corollary22_form(alpha, rho, t, printed=False) -> LiYauForm:
    """Closed form for the power profile ``(t - s)**alpha``, ``alpha > 2``.

    The constant term is ``rho^2 t/alpha - rho(3a-1)/(a-1) + (3a-1)^2/(4(a-2)t)``,
    which is what the integration yields.  ``printed=True`` returns the looser
    variant without the factor ``1/4`` in the last term.
    """
    a = float(alpha)
    if a <= 2:
        raise ValueError("alpha must exceed 2")
    last = (3 * a - 1) ** 2 / ((a - 2) * t)
    if not printed:
        last /= 4.0
    return LiYauForm(
        1.0,
        t / a,
        (3 * a - 1) / (a - 1) - 2 * rho * t / a,
        rho * rho * t / a - rho * (3 * a - 1) / (a - 1) + last,
        float(rho),
        float(t),
        source="closed-form power" + (" (printed)" if printed else ""),
    )


def corollary24_form(alpha, rho, t) -> LiYauForm:
    """Closed form for the exponential profile, ``rho > 0``."""
    a = float(alpha)
    if a <= 2:
        raise ValueError("alpha must exceed 2")
    if rho <= 0:
        raise ValueError("rho must be positive")
    decay = math.exp(-2 * rho * t / (3 * a))
    return LiYauForm(
        1.0,
        1.5 * (-math.expm1(-2 * rho * t / (3 * a))) / rho,
        (3 * a - 1) / (a - 1) * decay,
        1.5 * rho * (1 - 1 / (3 * a)) ** 2 / (1 - 2 / a) * decay**2 / (-math.expm1(-2 * rho * t / (3 * a))),
        float(rho),
        float(t),
        source="closed-form exponential",
    )


def corollary23_constants(alpha):
    """``(A, B, C)`` with ``d_t u >= A Gamma(u) + B t (Zu)^2 - C / t`` for ``rho >= 0``.

    Obtained by dividing the ``rho = 0`` power-profile form by its rate
    coefficient.
    """
    form = corollary22_form(alpha, 0.0, 1.0)
    return 1.0 / form.c_rate, form.c_z / form.c_rate, form.c_const / form.c_rate


def best_power_C():
    """Minimize the ``C`` of :func:`corollary23_constants` over ``alpha > 2``."""
    res = optimize.minimize_scalar(
        lambda a: corollary23_constants(a)[2], bracket=(2.5, 3.0, 6.0), method="golden", tol=1e-10
    )
    return float(res.x), float(res.fun)


@dataclass
class MarginReport:
    margin: np.ndarray
    sigma: np.ndarray
    threshold: np.ndarray
    passed: bool

    def to_dict(self):
        return {
            "min_margin": float(np.min(self.margin)),
            "max_sigma": float(np.max(self.sigma, initial=0.0)),
            "worst_normalized": float(np.min((self.margin + self.threshold))),
            "n": int(np.size(self.margin)),
            "passed": self.passed,
        }


def verify_liyau(form: LiYauForm, derivs, k=3.0, budget=None) -> MarginReport:
    """Margin of the inequality on estimated derivatives of ``u = log P_t f``.

    Passes when ``margin >= -k sigma`` (Monte Carlo) or
    ``margin >= -budget`` (grid route, ``budget`` given).
    """
    if abs(derivs.t - form.t) > 1e-12 or (derivs.rho is not None and abs(derivs.rho - form.rho) > 1e-12):
        raise ValueError("form and derivative estimates refer to different (rho, t)")
    margin = np.asarray(form.margin(derivs.gamma_u, derivs.zu_sq, derivs.du_dt), float)
    sigma = np.sqrt(
        (form.c_rate * np.asarray(derivs.du_dt_err)) ** 2
        + (form.c_gamma * np.asarray(derivs.gamma_u_err)) ** 2
        + (form.c_z * np.asarray(derivs.zu_sq_err)) ** 2
    )
    threshold = k * sigma if budget is None else np.broadcast_to(np.asarray(budget, float), margin.shape)
    return MarginReport(margin, sigma, threshold, bool(np.all(margin >= -threshold)))


def harnack_time_bound(log_pt, log_p1, t, C) -> dict:
    """Check ``log P_t f <= log P_1 f - C log t`` pointwise for ``0 < t <= 1``."""
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    slack = np.asarray(log_p1, float) - C * math.log(t) - np.asarray(log_pt, float)
    return {"t": t, "C": C, "min_slack": float(np.min(slack)), "holds": bool(np.all(slack >= -1e-12))}
