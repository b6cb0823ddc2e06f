"""Acceptance criteria 1-12, one test each.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line with the measured
quantities, then asserts.  Tolerances are the pinned ones; none are relaxed.
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from subliyau.gamma import check_proof_identities, gamma2_lower_bound_check, gamma2_report
from subliyau.geodesics import PathConfig, cc_distance, diameter_probe
from subliyau.grid import GridConfig, liyau_grid_check
from subliyau.groups import HEISENBERG, MODELS, SU2
from subliyau.heat import DiffusionConfig, estimate_log_derivatives, estimate_Ptf, short_time_exponent
from subliyau.jets import constant_field, test_function_suite
from subliyau.liyau import coefficients_from_b, corollary22_form, corollary24_form, exponential_profile, \
    power_profile, verify_liyau
from subliyau.spectral import variance_decay
from subliyau.expr import parse_field
from subliyau.vprofile import (VProfile, best_C_rho0, family_alpha, family_beta, family_beta_minus_alpha_sq,
                               family_lambda, functionals, liyau_from_V, normalize, profile_from_b)

MODEL_LIST = list(MODELS.values())


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def suites():
    """100 random polynomial fields of degree <= 4 and 20 points per model."""
    return {
        m.name: (test_function_suite(m, 2024, 100, kind="polynomial", max_degree=4),
                 m.random_element(99, size=20, scale=1.5))
        for m in MODEL_LIST
    }


def test_criterion_01_gamma2_identity(report, suites):
    start = time.perf_counter()
    worst = 0.0
    for m in MODEL_LIST:
        fields, pts = suites[m.name]
        worst = max(worst, float(gamma2_report(m, fields, pts).relative_gap.max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed <= 120
    assert report(1, ok, f"max |def - exp|/(1+|val|) = {worst:.2e} (<= 1e-8), {elapsed:.1f} s (<= 120 s)")


def test_criterion_02_proof_identities(report, suites):
    worst = {}
    for m in MODEL_LIST:
        fields, pts = suites[m.name]
        for key, val in check_proof_identities(m, fields, pts).items():
            worst[key] = max(worst.get(key, 0.0), val)
    ok = max(worst.values()) <= 1e-9
    assert report(2, ok, "max violations " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + " (<= 1e-9)")


def test_criterion_03_gamma2_lower_bound(report, suites):
    worst = math.inf
    for m in MODEL_LIST:
        fields, pts = suites[m.name]
        for f in fields:
            worst = min(worst, gamma2_lower_bound_check(f, [0.1, 1.0, 10.0], pts)["min_margin"])
    ok = worst >= -1e-9
    assert report(3, ok, f"min normalized margin {worst:.3e} (>= -1e-9)")


def test_criterion_04_quadrature_vs_closed_form(report):
    worst_power = worst_exp = 0.0
    for a in (2.5, 3.0, 5.0, 10.0):
        for t in (0.1, 1.0, 10.0):
            for rho in (-1.0, 0.0, 1.0):
                q = coefficients_from_b(power_profile(a, t), rho).normalized().coefficients()
                c = corollary22_form(a, rho, t).coefficients()
                worst_power = max(worst_power, float(np.max(np.abs(q - c) / np.abs(c))))
            q = coefficients_from_b(exponential_profile(a, 1.0, t), 1.0).normalized().coefficients()
            c = corollary24_form(a, 1.0, t).coefficients()
            worst_exp = max(worst_exp, float(np.max(np.abs(q - c) / np.abs(c))))
    spot = coefficients_from_b(power_profile(3, 1.0), 0.0).normalized()
    expected = (1 / 3, 4.0, 64.0)
    got = (spot.c_z, spot.c_rate, spot.c_const)
    spot_ok = np.allclose(got, expected, rtol=1e-6)
    ok = worst_power <= 1e-6 and worst_exp <= 1e-6 and spot_ok
    assert report(
        4, ok,
        f"power rel err {worst_power:.1e}, exponential rel err {worst_exp:.1e} (<= 1e-6); "
        f"spot (3,0,1) -> ({got[0]:.6g}, {got[1]:.6g}, {got[2]:.6g}) vs expected (1/3, 4, 64)",
    )


def test_criterion_05_v_machinery(report):
    worst = constraint_err = 0.0
    min_gap = min_excess = math.inf
    for eps in (0.01, 0.05, 0.1, 0.3):
        for g in (2.6, 2.75, 2.9):
            V = VProfile.parametric(eps, g)
            q = functionals(V, "quad")
            constraint_err = max(constraint_err, abs(q.constraint - 1.0))
            worst = max(
                worst,
                abs(q.v_at_1 - family_lambda(eps, g)) / family_lambda(eps, g),
                abs(q.alpha - family_alpha(eps, g)) / family_alpha(eps, g),
                abs(q.beta - family_beta(eps, g)) / family_beta(eps, g),
                abs(q.beta - q.alpha**2 - family_beta_minus_alpha_sq(eps, g)) / family_beta_minus_alpha_sq(eps, g),
            )
            min_gap = min(min_gap, q.beta - q.alpha**2)
            min_excess = min(min_excess, q.alpha - (q.v_at_1 + 8.0))
    W = normalize(profile_from_b(power_profile(3, 1.0)))
    pipe = 0.0
    for rho, t in [(0.0, 1.0), (1.0, 0.5), (-1.0, 2.0)]:
        a = liyau_from_V(W, rho, t).normalized().coefficients()
        b = corollary22_form(3, rho, t).coefficients()
        pipe = max(pipe, float(np.max(np.abs(a - b) / np.abs(b))))
    ok = constraint_err <= 1e-8 and worst <= 1e-6 and min_gap > 0 and min_excess > 0 and pipe <= 1e-6
    assert report(
        5, ok,
        f"constraint err {constraint_err:.1e} (<= 1e-8), closed forms rel err {worst:.1e} (<= 1e-6), min(beta - alpha^2) = {min_gap:.3g}, "
        f"min(alpha - V(1) - 8) = {min_excess:.3g}, pipeline rel err {pipe:.1e}",
    )


def test_criterion_06_best_constant(report):
    res = best_C_rho0()
    n_scan = sum(1 for row in res.trace if row[0] == "scan")
    n_grid = sum(1 for row in res.trace if row[0] == "grid")
    ok = res.all_above_two and res.min_evaluated_C > 2 and n_scan >= 1000 and n_grid > 0
    assert report(
        6, ok,
        f"{res.evaluated} profiles ({n_scan} scan, {n_grid} grid), smallest C = {res.min_evaluated_C:.6f} (> 2)",
    )


def test_criterion_07_heat_calibration(report):
    start = time.perf_counter()
    r2 = parse_field("x^2 + y^2", HEISENBERG)
    details, ok = [], True
    for t in (0.25, 0.5, 1.0):
        est = estimate_Ptf(HEISENBERG.identity(), r2, t, DiffusionConfig(paths=100_000, seed=11))
        z = (est.mean - 4 * t) / est.std_error
        ok &= abs(z) <= 3
        details.append(f"t={t}: {est.mean:.4f} vs {4 * t} ({z:+.2f} se)")
    one = estimate_Ptf(SU2.identity(), constant_field(SU2, 1.0), 1.0, DiffusionConfig(paths=10_000))
    ok &= one.mean == 1.0 and one.std_error == 0.0
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 60
    assert report(7, ok, "; ".join(details) + f"; P_t 1 = {one.mean!r}; {elapsed:.1f} s (<= 60 s)")


@pytest.mark.slow
def test_criterion_08_liyau_end_to_end(report):
    ts = [0.25, 0.5, 1.0]
    checks = liyau_grid_check(lambda t: corollary22_form(3.0, 0.0, t), ts, GridConfig(), n_points=50)
    grid_ok = all(c.passed for c in checks.values())
    grid_worst = min(float(np.min(c.margin + c.budget)) for c in checks.values())
    f = parse_field("exp(re_a + 0.5*im_b)", SU2, positive=True)
    pts = SU2.random_element(5, size=8)
    mc_worst, mc_ok = math.inf, True
    for t in (0.5, 1.0):
        d = estimate_log_derivatives(pts, f, t, DiffusionConfig(paths=20_000, seed=3))
        rep = verify_liyau(corollary24_form(3.0, 1.0, t), d, k=3.0)
        mc_ok &= rep.passed
        mc_worst = min(mc_worst, float(np.min(rep.margin / np.maximum(rep.sigma, 1e-300))))
    ok = grid_ok and mc_ok
    assert report(
        8, ok,
        f"grid min(margin + budget) = {grid_worst:.3g} over 3 x 50 points; "
        f"SU(2) MC min margin/sigma = {mc_worst:.3g} (>= -3)",
    )


@pytest.mark.slow
def test_criterion_09_short_time_order(report):
    start = time.perf_counter()
    fit = short_time_exponent(DiffusionConfig(step=0.05 / 16, paths=1_000_000, seed=0))
    elapsed = time.perf_counter() - start
    ok = -2.3 <= fit.slope <= -1.7 and elapsed <= 600
    assert report(9, ok, f"exponent {fit.slope:.3f} +- {fit.slope_err:.3f} in [-2.3, -1.7], {elapsed:.0f} s (<= 600 s)")


@pytest.mark.slow
def test_criterion_10_spectral_gap(report):
    f = parse_field("re_a + re_b*im_c", SU2)
    est = variance_decay(f, [0.25, 0.5, 0.75, 1.0, 1.25, 1.5], DiffusionConfig(paths=100_000, seed=0))
    ok = est.decay_rate >= 2 / 3 - 0.1
    near = abs(est.decay_rate - 1.0) <= 0.3
    assert report(
        10, ok,
        f"squared-norm rate {est.decay_rate:.3f} +- {est.rate_err:.3f} (>= {2 / 3 - 0.1:.3f}); "
        f"within 0.3 of 1: {'yes' if near else 'no'}",
    )


@pytest.mark.slow
def test_criterion_11_geometry(report):
    worst_ratio = 0.0
    for m in MODEL_LIST:
        for s in (0.5, 1.0, 2.0):
            d, _ = cc_distance(m.identity(), m.exp(np.array([s, 0.0, 0.0])), m, PathConfig(cells=12, starts=4))
            worst_ratio = max(worst_ratio, d / s)
    coarse = diameter_probe("su2", 100, PathConfig(cells=24))
    fine = diameter_probe("su2", 100, PathConfig(cells=48))
    change = abs(fine.max_distance - coarse.max_distance) / coarse.max_distance
    ok = worst_ratio <= 1.01 and coarse.converged.all() and fine.converged.all() and change <= 0.10
    assert report(
        11, ok,
        f"max d(e, exp sX)/|s| = {worst_ratio:.6f} (<= 1.01); diameter {coarse.max_distance:.4f} (K=24) vs "
        f"{fine.max_distance:.4f} (K=48), change {100 * change:.2f}% (<= 10%), all pairs converged",
    )


CLI_RUNS = {
    "verify-identities": ["--model", "sl2", "--count", "10", "--points", "5"],
    "liyau-coeffs": ["--alpha", "3,5", "--rho", "1", "--profile", "exp"],
    "check-liyau": ["--model", "su2", "--f", "exp(re_a)", "--paths", "3000", "--step", "0.05", "--points", "3"],
    "optimize-v": ["--mode", "grid-search", "--n-eps", "12", "--n-gamma", "10"],
    "spectral-gap": ["--paths", "20000", "--step", "0.05"],
    "cc-distance": ["--model", "su2", "--y", "0.3,0.2,0.4", "--cells", "12", "--starts", "4"],
    "diameter": ["--n-pairs", "5", "--cells", "12", "--starts", "4"],
    "short-time": ["--paths", "100000", "--step", "0.0125"],
}


@pytest.mark.slow
def test_criterion_12_determinism(report, tmp_path):
    differing = []
    for command, extra in CLI_RUNS.items():
        outputs = []
        for k in range(2):
            out = tmp_path / f"{command}-{k}.json"
            argv = [sys.executable, "-m", "subliyau.cli", command, *extra, "--seed", "3", "--out", str(out)]
            proc = subprocess.run(argv, capture_output=True, text=True)
            assert proc.returncode in (0, 1), proc.stderr
            outputs.append(out.read_bytes())
        json.loads(outputs[0])
        if outputs[0] != outputs[1]:
            differing.append(command)
    ok = not differing
    assert report(12, ok, f"{len(CLI_RUNS)} commands run twice, differing outputs: {differing or 'none'}")
