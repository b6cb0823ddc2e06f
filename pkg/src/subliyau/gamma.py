"""The sub-Laplacian ``L = X^2 + Y^2``, the carre du champ and its iterate.

Everything here is exact up to floating point: derivatives come from
:mod:`subliyau.jets`.  The definitional ``Gamma_2`` is the reference; the
closed expansion in terms of ``X^2 f, Y^2 f, (XY+YX) f, Z f, XZ f, YZ f`` is
checked against it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .groups import X, Y, Z, get_model
from .jets import ScalarField, apply_field


class Operators:
    """Left-invariant vector fields of a model bound as field operators."""

    def __init__(self, model):
        self.model = get_model(model)

    def X(self, f):
        return apply_field(X, f, self.model)

    def Y(self, f):
        return apply_field(Y, f, self.model)

    def Z(self, f):
        return apply_field(Z, f, self.model)

    def L(self, f):
        return L_op(f)


def _ops(f: ScalarField) -> Operators:
    return Operators(f.model)


def L_op(f: ScalarField, model=None) -> ScalarField:
    """``X^2 f + Y^2 f``."""
    d = Operators(model or f.model)
    return d.X(d.X(f)) + d.Y(d.Y(f))


def gamma(f: ScalarField, h: ScalarField | None = None, model=None) -> ScalarField:
    """``Gamma(f, h) = Xf Xh + Yf Yh``."""
    h = f if h is None else h
    d = Operators(model or f.model)
    return d.X(f) * d.X(h) + d.Y(f) * d.Y(h)


def gamma_by_definition(f: ScalarField, h: ScalarField | None = None, model=None) -> ScalarField:
    """``(L(fh) - f Lh - h Lf) / 2``."""
    h = f if h is None else h
    return 0.5 * (L_op(f * h, model) - f * L_op(h, model) - h * L_op(f, model))


def Z_op(f: ScalarField, model=None) -> ScalarField:
    """Derivative along the basis matrix ``Z``."""
    return Operators(model or f.model).Z(f)


def Z_by_bracket(f: ScalarField, model=None) -> ScalarField:
    """``XYf - YXf``."""
    d = Operators(model or f.model)
    return d.X(d.Y(f)) - d.Y(d.X(f))


def gamma2_definition(f: ScalarField, model=None) -> ScalarField:
    """``(L Gamma(f, f) - 2 Gamma(f, Lf)) / 2``."""
    return 0.5 * (L_op(gamma(f, model=model), model) - 2.0 * gamma(f, L_op(f, model), model))


def gamma2_expanded(f: ScalarField, model=None) -> ScalarField:
    """Closed expansion of ``Gamma_2`` valid under the rho-structure constants."""
    d = Operators(model or f.model)
    rho = d.model.rho
    xf, yf, zf = d.X(f), d.Y(f), d.Z(f)
    xxf, yyf = d.X(xf), d.Y(yf)
    sym = d.X(yf) + d.Y(xf)
    xzf, yzf = d.X(zf), d.Y(zf)
    return (
        xxf * xxf
        + yyf * yyf
        + 0.5 * sym * sym
        + 0.5 * zf * zf
        + rho * (xf * xf + yf * yf)
        - 2.0 * xf * yzf
        + 2.0 * yf * xzf
    )


@dataclass
class GammaReport:
    """Definition versus expansion of ``Gamma_2`` on fields x points."""

    model: str
    gamma2_definition: np.ndarray
    gamma2_expanded: np.ndarray
    field_names: list = field(default_factory=list)

    @property
    def abs_gap(self):
        return np.abs(self.gamma2_definition - self.gamma2_expanded)

    @property
    def relative_gap(self):
        return self.abs_gap / (1.0 + np.abs(self.gamma2_definition))

    def passed(self, tol=1e-8):
        return bool(np.all(self.relative_gap <= tol))

    def to_dict(self):
        return {
            "model": self.model,
            "n_fields": int(self.gamma2_definition.shape[0]),
            "n_points": int(self.gamma2_definition.shape[1]),
            "max_abs_gap": float(self.abs_gap.max(initial=0.0)),
            "max_relative_gap": float(self.relative_gap.max(initial=0.0)),
        }


def gamma2_report(model, fields, points) -> GammaReport:
    model = get_model(model)
    defn = np.array([gamma2_definition(f)(points) for f in fields]).reshape(len(fields), -1)
    expd = np.array([gamma2_expanded(f)(points) for f in fields]).reshape(len(fields), -1)
    return GammaReport(model.name, defn, expd, [f.name for f in fields])


def check_proof_identities(model, fields, points) -> dict:
    """Max violations of the algebraic facts used in the semigroup argument.

    Returns the commutator relations acting on fields, the commutation of
    ``L`` with ``Z``, the mixed-term cancellation, agreement of ``Z`` with
    ``XY - YX`` and of the two forms of ``Gamma``.
    """
    model = get_model(model)
    d = Operators(model)
    rho = model.rho
    out = {
        "xy_bracket": 0.0,
        "xz_bracket": 0.0,
        "yz_bracket": 0.0,
        "L_Z_commutator": 0.0,
        "mixed_term": 0.0,
        "gamma_forms": 0.0,
    }
    for f in fields:
        xf, yf, zf = d.X(f)(points), d.Y(f)(points), d.Z(f)(points)
        scale = 1.0 + np.abs(f(points))
        xy = Z_by_bracket(f)(points)
        xz = (d.X(d.Z(f)) - d.Z(d.X(f)))(points)
        yz = (d.Y(d.Z(f)) - d.Z(d.Y(f)))(points)
        lz = (L_op(d.Z(f)) - d.Z(L_op(f)))(points)
        # X(f) Z(f) [X,Z](f) + Y(f) Z(f) [Y,Z](f) with the brackets as operators
        mixed = xf * zf * xz + yf * zf * yz
        g_def = gamma_by_definition(f)(points)
        g_dir = gamma(f)(points)
        updates = {
            "xy_bracket": np.abs(xy - zf) / scale,
            "xz_bracket": np.abs(xz + rho * yf) / scale,
            "yz_bracket": np.abs(yz - rho * xf) / scale,
            "L_Z_commutator": np.abs(lz) / scale,
            "mixed_term": np.abs(mixed) / (1.0 + np.abs(xf * zf * xz) + np.abs(yf * zf * yz)),
            "gamma_forms": np.abs(g_def - g_dir) / (1.0 + np.abs(g_dir)),
        }
        for key, val in updates.items():
            out[key] = max(out[key], float(np.max(val, initial=0.0)))
    return out


def gamma2_lower_bound_check(f: ScalarField, lambda_values, points) -> dict:
    """Margin of ``Gamma_2(g) >= (Lg)^2/2 + (Zg)^2/2 + (rho - 1/lam) Gamma(g) - lam Gamma(Zg)``."""
    lambda_values = np.atleast_1d(np.asarray(lambda_values, dtype=float))
    if np.any(lambda_values <= 0):
        raise ValueError("lambda must be positive")
    d = _ops(f)
    rho = f.model.rho
    g2 = gamma2_definition(f)(points)
    lf = L_op(f)(points)
    zf = d.Z(f)(points)
    gf = gamma(f)(points)
    gz = gamma(d.Z(f))(points)
    margins = {}
    for lam in lambda_values:
        rhs = 0.5 * lf**2 + 0.5 * zf**2 + (rho - 1.0 / lam) * gf - lam * gz
        margins[float(lam)] = (g2 - rhs) / (1.0 + np.abs(g2) + np.abs(rhs))
    return {
        "margins": margins,
        "min_margin": float(min(np.min(m) for m in margins.values())),
    }


def quadratic_bound_check(values, gammas) -> dict:
    """Margin of ``v^2 >= 2 gamma v - gamma^2``, i.e. ``(v - gamma)^2``."""
    v = np.asarray(values, dtype=float)
    g = np.asarray(gammas, dtype=float)
    margin = v * v - (2.0 * g * v - g * g)
    return {"margin": margin, "min_margin": float(np.min(margin, initial=np.inf))}
