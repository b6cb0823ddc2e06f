import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subliyau.liyau import (BProfile, LiYauForm, ProfileError, best_power_C, coefficients_from_b, corollary22_form,
                            corollary23_constants, corollary24_form, exponential_profile, harnack_time_bound,
                            integrand_E, power_profile, substitution_power, verify_liyau)

GRID = [(a, r, t) for a in (2.5, 3, 4, 6) for r in (-1, 0, 1) for t in (0.5, 1, 2)]


@pytest.mark.parametrize("alpha, rho, t", GRID)
def test_quadrature_matches_power_closed_form(alpha, rho, t):
    q = coefficients_from_b(power_profile(alpha, t), rho).normalized()
    c = corollary22_form(alpha, rho, t)
    assert np.allclose(q.coefficients(), c.coefficients(), rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("alpha, rho, t", [(a, r, t) for a in (2.5, 3, 5) for r in (0.5, 1, 2) for t in (0.5, 1, 3)])
def test_quadrature_matches_exponential_closed_form(alpha, rho, t):
    q = coefficients_from_b(exponential_profile(alpha, rho, t), rho).normalized()
    c = corollary24_form(alpha, rho, t)
    assert np.allclose(q.coefficients(), c.coefficients(), rtol=1e-8, atol=1e-10)


def test_power_form_at_three_zero_one():
    f = corollary22_form(3, 0, 1)
    assert np.allclose(f.coefficients(), [1, 1 / 3, 4, 16])
    assert corollary22_form(3, 0, 1, printed=True).c_const == pytest.approx(64)


def test_exponential_form_tends_to_power_form_as_rho_vanishes():
    a, t = 3.5, 0.8
    e = corollary24_form(a, 1e-7, t)
    p = corollary22_form(a, 0.0, t)
    assert np.allclose(e.coefficients(), p.coefficients(), rtol=1e-5)


def test_constants_at_alpha_three():
    A, B, C = corollary23_constants(3)
    assert (A, B, C) == pytest.approx((0.25, 1 / 12, 4.0), rel=1e-14)


def test_best_power_C():
    a, C = best_power_C()
    assert a == pytest.approx(3.2910, abs=2e-4)
    assert C == pytest.approx(3.9365, abs=2e-4)
    assert C > 2


@settings(max_examples=50, deadline=None)
@given(st.floats(2.05, 20.0))
def test_C_exceeds_two_everywhere(alpha):
    assert corollary23_constants(alpha)[2] > 2


def test_integrand_E_rejects_endpoint():
    p = power_profile(3, 1.0)
    with pytest.raises(ZeroDivisionError):
        integrand_E(p, 0.0, 1.0)


def test_integrand_E_closed_form():
    p = power_profile(3, 1.0)
    s = np.linspace(0, 0.9, 5)
    # b''/b' = -(a-1)/(t-s), 2b'/b = -2a/(t-s)
    assert np.allclose(integrand_E(p, 0.5, s), -(2 + 6) / (1 - s) + 1.0)


def test_profile_checks():
    power_profile(3, 1).check()
    exponential_profile(3, 1, 1).check()
    bad = BProfile(lambda s: np.ones_like(np.asarray(s, float)), lambda s: 0 * np.asarray(s, float),
                   lambda s: 0 * np.asarray(s, float), 1.0)
    with pytest.raises(ProfileError):
        bad.check()
    rising = BProfile(lambda s: np.asarray(s, float), lambda s: np.ones_like(np.asarray(s, float)),
                      lambda s: 0 * np.asarray(s, float), 1.0, terminal=False)
    with pytest.raises(ProfileError):
        rising.check()


def test_invalid_parameters():
    with pytest.raises(ValueError):
        corollary22_form(2, 0, 1)
    with pytest.raises(ValueError):
        corollary24_form(3, 0, 1)
    with pytest.raises(ValueError):
        exponential_profile(3, -1, 1)


def test_substitution_power():
    assert substitution_power(3) == 1
    assert substitution_power(2.5) == 2
    assert substitution_power(2.2) == 5


def test_normalized_form():
    f = LiYauForm(2.0, 1.0, 4.0, 6.0, 0.0, 1.0, errors={"c_const": 0.2}).normalized()
    assert np.allclose(f.coefficients(), [1, 0.5, 2, 3])
    assert f.errors["c_const"] == pytest.approx(0.1)


def test_verify_liyau_margin_and_threshold():
    form = corollary22_form(3, 0, 1)
    d = SimpleNamespace(t=1.0, rho=0.0, gamma_u=np.array([1.0, 30.0]), zu_sq=np.zeros(2), du_dt=np.zeros(2),
                        gamma_u_err=np.array([0.1, 0.1]), zu_sq_err=np.zeros(2), du_dt_err=np.zeros(2))
    rep = verify_liyau(form, d)
    assert np.allclose(rep.margin, [15.0, -14.0])
    assert not rep.passed
    assert verify_liyau(form, d, budget=20.0).passed
    with pytest.raises(ValueError):
        verify_liyau(corollary22_form(3, 0, 2), d)


def test_harnack_time_bound():
    out = harnack_time_bound(np.array([1.0]), np.array([0.0]), 0.5, 4.0)
    assert out["holds"]
    assert out["min_slack"] == pytest.approx(4 * math.log(2) - 1)
    with pytest.raises(ValueError):
        harnack_time_bound([0], [0], 1.5, 4.0)
