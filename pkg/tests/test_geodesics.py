import math

import numpy as np
import pytest

from subliyau.geodesics import (NoConvergenceError, PathConfig, cc_distance, diameter_probe, lipschitz_gap,
                                solve_paths)
from subliyau.groups import HEISENBERG, MODELS, SL2, SU2
from subliyau.jets import coordinate_field

SMALL = PathConfig(cells=12, starts=4)


def test_heisenberg_horizontal_line_is_a_geodesic():
    for a in (0.3, 1.0, 2.5):
        d, path = cc_distance(np.eye(3), HEISENBERG.exp(np.array([a, 0, 0])), HEISENBERG, SMALL)
        assert d == pytest.approx(a, rel=1e-6)
        assert path.residual < 1e-9


@pytest.mark.parametrize("model", list(MODELS.values()), ids=lambda m: m.name)
def test_straight_paths_bound_the_distance(model):
    A = np.array([0.4, -0.3, 0.0])
    d, _ = cc_distance(model.identity(), model.exp(A), model, SMALL)
    assert d <= 0.5 + 1e-8
    assert d > 0.45


def test_heisenberg_vertical_distance():
    d, path = cc_distance(np.eye(3), HEISENBERG.exp(np.array([0, 0, 1.0])), HEISENBERG)
    assert d == pytest.approx(2 * math.sqrt(math.pi), rel=0.01)
    assert d >= 2 * math.sqrt(math.pi) - 1e-9


def test_distance_is_left_invariant():
    g = SU2.random_element(2)
    x, y = SU2.random_element(3), SU2.random_element(4)
    d1, _ = cc_distance(x, y, SU2, SMALL)
    d2, _ = cc_distance(g @ x, g @ y, SU2, SMALL)
    assert d1 == pytest.approx(d2, rel=1e-6)


def test_same_point_has_zero_distance():
    g = SL2.random_element(0)
    d, path = cc_distance(g, g, SL2)
    assert d == 0.0 and path.length == 0.0


def test_path_states_and_csv(tmp_path):
    d, path = cc_distance(np.eye(4), SU2.exp(np.array([0.2, 0.5, 0.1])), SU2, SMALL)
    states = path.states()
    assert np.allclose(states[-1], path.endpoint, atol=1e-9)
    assert path.length == pytest.approx(d)
    out = tmp_path / "path.csv"
    path.write_csv(out)
    lines = out.read_text().splitlines()
    assert len(lines) == SMALL.cells + 2
    assert lines[0].startswith("time,u1,u2,g00")


def test_unreachable_tolerance_raises():
    with pytest.raises(NoConvergenceError):
        cc_distance(np.eye(4), SU2.exp(np.array([0.0, 0.0, 2.0])), SU2, PathConfig(cells=4, starts=1, max_iter=1,
                                                                                  stages=1), tol=1e-300)


def test_batch_solve_matches_single():
    targets = SU2.exp(np.array([[0.3, 0.1, 0.2], [0.0, 0.6, -0.1]]))
    lengths, paths, ok = solve_paths(SU2, targets, SMALL)
    assert ok.all()
    single, _ = cc_distance(np.eye(4), targets[1], SU2, SMALL)
    assert lengths[1] == pytest.approx(single, rel=1e-3)


def test_diameter_probe_small():
    rep = diameter_probe("su2", n_pairs=6, cfg=SMALL)
    assert rep.converged.all()
    assert 0 < rep.max_distance < 2 * math.pi * math.sqrt(2) + 1
    assert rep.to_dict()["n_pairs"] == 6
    with pytest.raises(ValueError):
        diameter_probe("heisenberg", n_pairs=2)


def test_lipschitz_gap_non_positive_for_linear_field():
    # |X x| = 1 and Y x = 0 on the Heisenberg group, so Gamma(x) = 1
    f = coordinate_field(HEISENBERG, 0)
    x, y = HEISENBERG.identity(), HEISENBERG.exp(np.array([0.5, 0.4, 0.3]))
    d, _ = cc_distance(x, y, HEISENBERG, SMALL)
    assert lipschitz_gap(lambda g: float(f(g)), y, x, d, 1.0) <= 1e-9
