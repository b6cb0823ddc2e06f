"""Command-line entry point: ``subliyau <command> [options]``.

Every command prints (or writes) one JSON document, or a CSV table with
``--format csv`` where a table makes sense.  Exit codes: 0 all checks
passed, 1 a check failed, 2 usage error, 3 numerical failure.  When
``--out`` is omitted and ``SUBLIYAU_OUTDIR`` is set, output goes to
``$SUBLIYAU_OUTDIR/<command>.<format>``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .expr import ExpressionError

OUTDIR_ENV = "SUBLIYAU_OUTDIR"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def schema_path(command) -> Path:
    """JSON schema shipped for the output of ``command``."""
    path = Path(__file__).with_name("schemas") / f"{command}.json"
    if not path.exists():
        raise KeyError(f"no schema for {command!r}")
    return path


def _numeric_errors():
    from .geodesics import NoConvergenceError
    from .grid import BoxTooSmallError, ResolutionError, StabilityError
    from .heat import NumericalError
    from .liyau import ProfileError, QuadratureError
    from .spectral import FitError
    from .vprofile import AdmissibilityError

    return (
        NoConvergenceError, BoxTooSmallError, ResolutionError, StabilityError, NumericalError,
        ProfileError, QuadratureError, FitError, AdmissibilityError, ArithmeticError, FloatingPointError,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _positive(name, lo=0.0):
    def conv(text):
        v = float(text)
        if not v > lo:
            raise argparse.ArgumentTypeError(f"{name} must exceed {lo:g}")
        return v

    return conv


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- commands ---------------------------------------------------------------------------
def cmd_verify_identities(args):
    from .gamma import check_proof_identities, gamma2_lower_bound_check, gamma2_report
    from .groups import get_model
    from .jets import test_function_suite

    model = get_model(args.model)
    fields = test_function_suite(model, args.seed, args.count, kind="polynomial")
    points = model.random_element(args.seed + 1, size=args.points)
    report = gamma2_report(model, fields, points)
    ident = check_proof_identities(model, fields, points)
    lower = min(
        gamma2_lower_bound_check(f, [0.1, 1.0, 10.0], points)["min_margin"] for f in fields
    ) if fields else 0.0
    summary = report.to_dict()
    passed = (
        summary["max_relative_gap"] <= 1e-8 and max(ident.values(), default=0.0) <= 1e-9 and lower >= -1e-9
    )
    result = {"gamma2": summary, "identities": ident, "cauchy_schwarz_min_margin": lower}
    return result, passed, None


def cmd_liyau_coeffs(args):
    from .liyau import (coefficients_from_b, corollary22_form, corollary24_form, exponential_profile,
                        power_profile)

    rows = []
    out = []
    for alpha in args.alpha:
        if alpha <= 2:
            raise UsageError("alpha must exceed 2")
        if args.profile == "power":
            quad = coefficients_from_b(power_profile(alpha, args.t), args.rho)
            closed = corollary22_form(alpha, args.rho, args.t)
            printed = corollary22_form(alpha, args.rho, args.t, printed=True)
        else:
            if args.rho <= 0:
                raise UsageError("the exponential profile needs --rho > 0")
            quad = coefficients_from_b(exponential_profile(alpha, args.rho, args.t), args.rho)
            closed = corollary24_form(alpha, args.rho, args.t)
            printed = None
        q, c = quad.coefficients(), closed.coefficients()
        agreement = float(np.max(np.abs(q - c) / np.maximum(np.abs(c), 1e-300)))
        entry = {
            "alpha": alpha,
            "quadrature": _form_dict(quad),
            "closed_form": _form_dict(closed),
            "agreement": agreement,
        }
        if printed is not None:
            entry["closed_form_printed"] = _form_dict(printed)
        out.append(entry)
        rows.append([alpha, args.rho, args.t, quad.c_z, quad.c_rate, quad.c_const, closed.c_z, closed.c_rate,
                     closed.c_const, agreement])
    header = ["alpha", "rho", "t", "quad_c_z", "quad_c_rate", "quad_c_const", "closed_c_z", "closed_c_rate",
              "closed_c_const", "agreement"]
    result = out[0] if len(out) == 1 else {"scan": out}
    passed = all(e["agreement"] <= 1e-6 for e in out)
    return result, passed, (header, rows)


def _form_dict(form):
    return {"c_gamma": form.c_gamma, "c_z": form.c_z, "c_rate": form.c_rate, "c_const": form.c_const,
            "rho": form.rho, "t": form.t}


def _form_for(model, alpha, t):
    from .liyau import corollary22_form, corollary24_form

    if model.rho > 0:
        return corollary24_form(alpha, model.rho, t)
    return corollary22_form(alpha, model.rho, t)


def cmd_check_liyau(args):
    from .expr import parse_field
    from .groups import HEISENBERG, get_model

    model = get_model(args.model)
    if args.alpha <= 2:
        raise UsageError("alpha must exceed 2")
    if args.route == "grid":
        from .grid import GridConfig, heisenberg_grid_solve, interior_points, interpolate, log_derivatives
        from .groups import heisenberg_matrix

        if model != HEISENBERG:
            raise UsageError("the grid route exists only for the heisenberg model")
        results, passed = [], True
        levels = {}
        for label, cfg in (("fine", GridConfig()), ("coarse", GridConfig().coarsened())):
            if args.f:
                f = parse_field(args.f, model)
                x, y, z = cfg.mesh()
                f0 = f(heisenberg_matrix(x, y, z))
            else:
                from .grid import gaussian_bump

                f0 = gaussian_bump(cfg)
            if np.any(f0 <= 0):
                raise UsageError("f must be positive on the grid")
            run = heisenberg_grid_solve(f0, max(args.t), cfg, snapshots=args.t)
            pts = interior_points(args.points, args.seed)
            for t in args.t:
                d = log_derivatives(run.at(t), t, cfg)
                m = _form_for(model, args.alpha, t).margin(d.gamma_u, d.zu_sq, d.du_dt)
                levels[(label, t)] = interpolate(m, cfg, pts)
        for t in args.t:
            fine, coarse = levels[("fine", t)], levels[("coarse", t)]
            budget = 3.0 * np.abs(fine - coarse)
            ok = bool(np.all(fine >= -budget))
            passed &= ok
            results.append({"t": t, "min_margin": float(fine.min()), "max_budget": float(budget.max()),
                            "passed": ok})
        return {"route": "grid", "checks": results}, passed, None
    from .heat import DiffusionConfig, estimate_log_derivatives
    from .liyau import verify_liyau

    f = parse_field(args.f or _default_f(model), model, positive=True)
    points = model.random_element(args.seed + 7, size=args.points)
    if np.any(f(points) <= 0):
        raise UsageError("f must be positive")
    cfg = DiffusionConfig(step=args.step, paths=args.paths, seed=args.seed, workers=args.threads)
    results, passed = [], True
    for t in args.t:
        d = estimate_log_derivatives(points, f, t, cfg)
        rep = verify_liyau(_form_for(model, args.alpha, t), d)
        passed &= rep.passed
        results.append({"t": t, **rep.to_dict()})
    return {"route": "mc", "f": f.name, "checks": results}, passed, None


def _default_f(model):
    return {"heisenberg": "exp(x)", "su2": "exp(2*re_a)", "sl2": "exp(a/2)"}[model.name]


def cmd_optimize_v(args):
    from .vprofile import (VProfile, best_C_rho0, family_alpha, family_beta, family_lambda, functionals,
                           liyau_from_V, long_time_decay)

    if args.mode == "family-scan":
        rows = []
        for eps in args.eps:
            for gam in args.gamma:
                _check_eps_gamma(eps, gam)
                V = VProfile.parametric(eps, gam)
                fn = functionals(V)
                form = liyau_from_V(V, args.rho, 1.0, fn)
                rows.append([eps, gam, family_lambda(eps, gam), family_alpha(eps, gam), family_beta(eps, gam),
                             fn.alpha, fn.beta, fn.C, form.c_rate, form.c_const])
        header = ["eps", "gamma", "lambda", "alpha_closed", "beta_closed", "alpha_quad", "beta_quad", "C",
                  "c_rate", "c_const"]
        result = {"mode": "family-scan", "rho": args.rho, "rows": [dict(zip(header, r)) for r in rows]}
        passed = all(r[7] > 2 for r in rows)
        return result, passed, (header, rows)
    if args.mode == "grid-search":
        if args.rho != 0:
            raise UsageError("the best-constant search is defined for rho = 0")
        res = best_C_rho0(n_eps=args.n_eps, n_gamma=args.n_gamma, seed=args.seed)
        result = {"mode": "grid-search", "C_min": res.C_min, "evaluated": res.evaluated,
                  "min_evaluated_C": res.min_evaluated_C, "all_above_two": res.all_above_two,
                  "profile": res.profile.to_dict()}
        rows = [list(r) for r in res.trace]
        return result, res.all_above_two, (["stage", "step", "eps", "gamma", "C"], rows)
    if args.rho <= 0:
        raise UsageError("decay mode needs --rho > 0")
    gam = args.gamma[0]
    _check_eps_gamma(0.5, gam)
    fit = long_time_decay(args.rho, np.linspace(args.t_min, args.t_max, args.n_t), gamma=gam, c=args.c)
    rows = [[t, u, l, r] for t, u, l, r in zip(fit.t, fit.upper, fit.lower, fit.order_ratio)]
    ok = abs(fit.slope + args.rho / 3) <= 0.2 * args.rho and bool(np.all((fit.order_ratio >= 0.1) & (fit.order_ratio <= 10)))
    return {"mode": "decay", "rho": args.rho, "gamma": gam, "c": args.c, **fit.to_dict()}, ok, (
        ["t", "upper", "lower", "order_ratio"], rows)


def _check_eps_gamma(eps, gam):
    if not 0 < eps < 1:
        raise UsageError("eps must lie in (0, 1)")
    if not 2.5 < gam < 3:
        raise UsageError("gamma must lie in (5/2, 3)")


def cmd_spectral_gap(args):
    from .expr import parse_field
    from .groups import SU2
    from .heat import DiffusionConfig
    from .spectral import poincare_check, variance_decay

    f = parse_field(args.f, SU2)
    cfg = DiffusionConfig(step=args.step, paths=args.paths, seed=args.seed, workers=args.threads)
    est = variance_decay(f, args.t_grid, cfg)
    pc = poincare_check(f, n=args.paths, seed=args.seed)
    passed = est.decay_rate >= 2.0 / 3.0 - 0.1 and pc.passed
    result = {"f": args.f, "spectral": est.to_dict(), "near_half_gap": abs(est.decay_rate - 1.0) <= 0.3,
              "poincare": pc.to_dict()}
    rows = [[t, v, e] for t, v, e in zip(est.t, est.norm_sq, est.norm_sq_err)]
    return result, passed, (["t", "norm_sq", "norm_sq_err"], rows)


def _parse_point(model, text):
    coeffs = _float_list(text)
    if len(coeffs) != 3:
        raise UsageError("points are given as three algebra coefficients a,b,c of exp(aX+bY+cZ)")
    return model.exp(np.array(coeffs))


def cmd_cc_distance(args):
    from .geodesics import PathConfig, cc_distance
    from .groups import get_model

    model = get_model(args.model)
    x, y = _parse_point(model, args.x), _parse_point(model, args.y)
    cfg = PathConfig(cells=args.cells, starts=args.starts, seed=args.seed)
    d, path = cc_distance(x, y, model, cfg)
    states = path.states()
    rows = []
    for k, g in enumerate(states):
        u = path.controls[min(k, path.cells - 1)]
        rows.append([k / path.cells, u[0], u[1], *g.ravel()])
    n = model.size
    header = ["time", "u1", "u2"] + [f"g{i}{j}" for i in range(n) for j in range(n)]
    result = {"model": model.name, "distance": d, "residual": path.residual, "cells": path.cells,
              "controls": path.controls}
    return result, True, (header, rows)


def cmd_diameter(args):
    from .geodesics import PathConfig, diameter_probe

    cfg = PathConfig(cells=args.cells, starts=args.starts, seed=args.seed)
    rep = diameter_probe("su2", args.n_pairs, cfg, seed=args.seed)
    result = rep.to_dict()
    passed = result["all_converged"]
    if args.check_resolution:
        fine = diameter_probe("su2", args.n_pairs, PathConfig(cells=2 * args.cells, starts=args.starts,
                                                              seed=args.seed), seed=args.seed)
        rel = abs(fine.max_distance - rep.max_distance) / rep.max_distance
        result["doubled_resolution"] = {"max_distance": fine.max_distance, "relative_change": rel}
        passed &= rel <= 0.1
    rows = [[i, d] for i, d in enumerate(rep.distances)]
    return result, passed, (["pair", "distance"], rows)


def cmd_short_time(args):
    from .heat import DiffusionConfig, dilation_summaries, short_time_exponent
    from .spectral import ultracontractivity_probe

    t_grid = np.geomspace(args.t_min, args.t_max, args.n_t)
    cfg = DiffusionConfig(step=args.step, paths=args.paths, seed=args.seed, workers=args.threads)
    fit = short_time_exponent(cfg, t_grid)
    ultra = ultracontractivity_probe(cfg, t_grid)
    result = {"exponent": fit.to_dict(), "ultracontractivity": ultra.to_dict()}
    if args.dilation:
        result["dilation"] = dilation_summaries(t_grid, DiffusionConfig(args.step, min(args.paths, 100_000), args.seed))
    passed = -2.3 <= fit.slope <= -1.7
    rows = [[t, p, e] for t, p, e in zip(fit.t, fit.density, fit.density_err)]
    return result, passed, (["t", "density", "density_err"], rows)


COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "liyau-coeffs": cmd_liyau_coeffs,
    "check-liyau": cmd_check_liyau,
    "optimize-v": cmd_optimize_v,
    "spectral-gap": cmd_spectral_gap,
    "cc-distance": cmd_cc_distance,
    "diameter": cmd_diameter,
    "short-time": cmd_short_time,
}


def build_parser():
    p = argparse.ArgumentParser(prog="subliyau", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=0):
        sp.add_argument("--out", help="output file (default: stdout or $%s)" % OUTDIR_ENV)
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--plot", action="store_true", help="also write an SVG line plot of the CSV table")
        sp.add_argument("--threads", type=int, default=1, help="cap on worker threads")
        sp.add_argument("--seed", type=int, default=seed)
        return sp

    models = ["heisenberg", "su2", "sl2"]
    sp = common(sub.add_parser("verify-identities", help="Gamma_2 expansion and proof identities"))
    sp.add_argument("--model", choices=models, required=True)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--points", type=int, default=20)

    sp = common(sub.add_parser("liyau-coeffs", help="coefficients by quadrature and in closed form"))
    sp.add_argument("--profile", choices=["power", "exp"], default="power")
    sp.add_argument("--alpha", type=_float_list, default=[3.0], help="one value or a comma list")
    sp.add_argument("--rho", type=float, default=0.0)
    sp.add_argument("--t", type=_positive("t"), default=1.0)

    sp = common(sub.add_parser("check-liyau", help="Li-Yau margins on a simulated or solved semigroup"))
    sp.add_argument("--model", choices=models, default="heisenberg")
    sp.add_argument("--route", choices=["mc", "grid"], default="mc")
    sp.add_argument("--f", help="positive test function, e.g. 'exp(x)'; grid default is a Gaussian bump")
    sp.add_argument("--t", type=_float_list, default=[0.5])
    sp.add_argument("--alpha", type=float, default=3.0)
    sp.add_argument("--paths", type=int, default=20_000)
    sp.add_argument("--step", type=_positive("step"), default=1e-2)
    sp.add_argument("--points", type=int, default=8)

    sp = common(sub.add_parser("optimize-v", help="V-profile functionals, best constant, long-time decay"))
    sp.add_argument("--mode", choices=["family-scan", "grid-search", "decay"], default="family-scan")
    sp.add_argument("--rho", type=float, default=0.0)
    sp.add_argument("--eps", type=_float_list, default=[0.01, 0.05, 0.1, 0.3])
    sp.add_argument("--gamma", type=_float_list, default=[2.6, 2.75, 2.9])
    sp.add_argument("--n-eps", type=int, default=40)
    sp.add_argument("--n-gamma", type=int, default=30)
    sp.add_argument("--c", type=float, default=2.5)
    sp.add_argument("--t-min", type=float, default=10.0)
    sp.add_argument("--t-max", type=float, default=40.0)
    sp.add_argument("--n-t", type=int, default=16)

    sp = common(sub.add_parser("spectral-gap", help="variance decay and Poincare check on SU(2)"))
    sp.add_argument("--f", default="re_a + re_b*im_c")
    sp.add_argument("--t-grid", type=_float_list, default=[0.25, 0.5, 0.75, 1.0, 1.25, 1.5])
    sp.add_argument("--paths", type=int, default=50_000)
    sp.add_argument("--step", type=_positive("step"), default=1e-2)

    sp = common(sub.add_parser("cc-distance", help="horizontal path length between exp(x) and exp(y)"))
    sp.add_argument("--model", choices=models, required=True)
    sp.add_argument("--x", default="0,0,0", help="algebra coefficients of the start point")
    sp.add_argument("--y", required=True, help="algebra coefficients of the end point")
    sp.add_argument("--cells", type=int, default=24)
    sp.add_argument("--starts", type=int, default=8)

    sp = common(sub.add_parser("diameter", help="CC distances between Haar pairs on SU(2)"))
    sp.add_argument("--n-pairs", type=int, default=100)
    sp.add_argument("--cells", type=int, default=24)
    sp.add_argument("--starts", type=int, default=8)
    sp.add_argument("--check-resolution", action="store_true")

    sp = common(sub.add_parser("short-time", help="small-t exponent of p_t(e, e) on the Heisenberg group"))
    sp.add_argument("--paths", type=int, default=1_000_000)
    sp.add_argument("--step", type=_positive("step"), default=0.05 / 16)
    sp.add_argument("--t-min", type=_positive("t-min"), default=0.05)
    sp.add_argument("--t-max", type=_positive("t-max"), default=0.4)
    sp.add_argument("--n-t", type=int, default=6)
    sp.add_argument("--dilation", action="store_true")
    return p


def _config(args):
    skip = {"command", "out", "plot", "threads", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _render(args, payload, table):
    if args.format == "csv":
        if table is None:
            raise UsageError(f"{args.command} has no tabular output; use --format json")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table[0])
        for row in table[1]:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return buf.getvalue()
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _destination(args):
    if args.out:
        return Path(args.out)
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir:
        return Path(outdir) / f"{args.command}.{args.format}"
    return None


def _plot(table, target: Path):
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "subliyau"
    import matplotlib.pyplot as plt

    header, rows = table
    data = np.array([[float(v) for v in r] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    for j in range(1, data.shape[1]):
        ax.plot(data[:, 0], data[:, j], marker=".", label=header[j])
    ax.set_xlabel(header[0])
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(target, format="svg", metadata={"Date": None})
    plt.close(fig)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad usage
    dest = _destination(args)
    try:
        result, passed, table = COMMANDS[args.command](args)
        payload = {"command": args.command, "config": _config(args), "passed": bool(passed), "result": result}
        text = _render(args, payload, table)
        code = EXIT_OK if passed else EXIT_FAIL
    except (UsageError, ExpressionError) as exc:
        parser.print_usage(sys.stderr)
        print(f"subliyau: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _numeric_errors() as exc:
        payload = {"command": args.command, "config": _config(args), "passed": False,
                   "error": {"type": type(exc).__name__, "message": str(exc)}}
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
        table, code = None, EXIT_NUMERIC
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text)
        if args.plot and table is not None:
            _plot(table, dest.with_suffix(".svg"))
    return code


if __name__ == "__main__":
    sys.exit(main())
