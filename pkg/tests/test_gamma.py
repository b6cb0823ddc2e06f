import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subliyau.gamma import (L_op, Z_by_bracket, Z_op, check_proof_identities, gamma, gamma2_definition,
                            gamma2_expanded, gamma2_lower_bound_check, gamma2_report, gamma_by_definition,
                            quadratic_bound_check)
from subliyau.groups import HEISENBERG, MODELS, SU2
from subliyau.jets import coordinate_field, polynomial_field, test_function_suite

ALL = list(MODELS.values())


def heis_points(n=25, seed=0):
    return HEISENBERG.random_element(seed, size=n)


def test_heisenberg_L_of_quadratics():
    pts = heis_points()
    x = coordinate_field(HEISENBERG, 0)
    z = coordinate_field(HEISENBERG, 2)
    assert np.allclose(L_op(x * x)(pts), 2.0)
    # Y z = x, Y^2 z = 0, X z = 0
    assert np.allclose(L_op(z)(pts), 0.0)
    # L(z^2) = 2 (Yz)^2 = 2 x^2
    assert np.allclose(L_op(z * z)(pts), 2 * pts[:, 0, 1] ** 2)


def test_gamma_of_coordinates_heisenberg():
    pts = heis_points()
    x, y, z = (coordinate_field(HEISENBERG, i) for i in range(3))
    assert np.allclose(gamma(x)(pts), 1.0)
    assert np.allclose(gamma(z)(pts), pts[:, 0, 1] ** 2)
    assert np.allclose(gamma(x, y)(pts), 0.0)


@pytest.mark.parametrize("model", ALL, ids=lambda m: m.name)
def test_gamma2_definition_matches_expansion(model):
    pts = model.random_element(1, size=40, scale=1.5)
    fields = test_function_suite(model, 2, 20)
    rep = gamma2_report(model, fields, pts)
    assert rep.passed(1e-8), rep.to_dict()


@pytest.mark.parametrize("model", ALL, ids=lambda m: m.name)
def test_proof_identities(model):
    pts = model.random_element(3, size=30)
    out = check_proof_identities(model, test_function_suite(model, 4, 12), pts)
    assert max(out.values()) < 1e-9, out


@pytest.mark.parametrize("model", ALL, ids=lambda m: m.name)
def test_gamma_two_ways_and_z_two_ways(model):
    pts = model.random_element(5, size=20)
    for f in test_function_suite(model, 6, 6):
        a, b = gamma(f)(pts), gamma_by_definition(f)(pts)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9)
        assert np.allclose(Z_op(f)(pts), Z_by_bracket(f)(pts), rtol=1e-9, atol=1e-9)
        assert np.all(a >= -1e-14)


def test_su2_matrix_entries_are_eigenfunctions():
    pts = SU2.random_element(0, size=20, scale=3)
    for i in range(8):
        f = coordinate_field(SU2, i)
        assert np.allclose(L_op(f)(pts), -0.5 * f(pts), atol=1e-12)


@pytest.mark.parametrize("model", ALL, ids=lambda m: m.name)
def test_lower_bound_holds(model):
    pts = model.random_element(7, size=30)
    for f in test_function_suite(model, 8, 8):
        res = gamma2_lower_bound_check(f, [0.1, 0.5, 1.0, 3.0, 10.0], pts)
        assert res["min_margin"] >= -1e-10


def test_lower_bound_rejects_bad_lambda():
    f = coordinate_field(HEISENBERG, 0)
    with pytest.raises(ValueError):
        gamma2_lower_bound_check(f, [0.0], heis_points(3))


def test_gamma2_of_linear_heisenberg_field_is_nonnegative_and_exact():
    # f = z: Xf = 0, Yf = x, Zf = 1 so Gamma_2 = 1/2 (XYf)^2 ... checked numerically against the expansion
    z = coordinate_field(HEISENBERG, 2)
    pts = heis_points()
    assert np.allclose(gamma2_definition(z)(pts), gamma2_expanded(z)(pts))
    assert np.all(gamma2_definition(z)(pts) >= 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=10), st.floats(-1e3, 1e3))
def test_quadratic_bound_property(vs, g):
    res = quadratic_bound_check(vs, np.full(len(vs), g))
    assert res["min_margin"] >= -1e-9 * (1 + g * g + max(v * v for v in vs))
