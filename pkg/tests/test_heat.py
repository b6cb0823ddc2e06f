import math

import numpy as np
import pytest

from subliyau import heat
from subliyau.groups import HEISENBERG, SL2, SU2
from subliyau.heat import (DiffusionConfig, NumericalError, brownian_samples, dilation_summaries,
                           estimate_log_derivatives, estimate_Ptf, fit_log_log, heisenberg_coordinates_samples,
                           heisenberg_density_at_identity, mc_step, trajectory_rows)
from subliyau.jets import ScalarField, constant_field, coordinate_field
from subliyau import jets


def exp_x():
    return ScalarField(lambda c: jets.exp(c[0]), HEISENBERG, positive=True, name="exp(x)")


def test_segments_hit_record_times():
    segs = heat._segments([0.05, 0.3, 0.3, 1.0], 0.1)
    assert [n for n, _ in segs] == [1, 3, 0, 7]
    total = sum(n * h for n, h in segs)
    assert total == pytest.approx(1.0)


def test_mc_step_zero_noise_is_identity():
    g = SU2.random_element(0, size=3)
    assert np.allclose(mc_step(SU2, g, 0.1, np.zeros((3, 2))), g)


@pytest.mark.parametrize("model", [HEISENBERG, SU2, SL2], ids=lambda m: m.name)
def test_samples_stay_on_group(model):
    w = brownian_samples(model, [0.5, 1.0], DiffusionConfig(step=0.05, paths=500))
    assert w.shape == (2, 500, model.size, model.size)
    assert model.membership_error(w.reshape(-1, model.size, model.size)).max() < 1e-8


def test_worker_count_does_not_change_results(monkeypatch):
    monkeypatch.setattr(heat, "CHUNK", 64)
    cfg1 = DiffusionConfig(step=0.1, paths=300, seed=4, workers=1)
    cfg3 = DiffusionConfig(step=0.1, paths=300, seed=4, workers=3)
    a = brownian_samples(SU2, [0.5], cfg1)
    b = brownian_samples(SU2, [0.5], cfg3)
    assert np.array_equal(a, b)


def test_seed_determinism_and_sensitivity():
    cfg = DiffusionConfig(step=0.1, paths=200, seed=1)
    a = brownian_samples(HEISENBERG, [1.0], cfg)
    assert np.array_equal(a, brownian_samples(HEISENBERG, [1.0], cfg))
    other = brownian_samples(HEISENBERG, [1.0], DiffusionConfig(step=0.1, paths=200, seed=2))
    assert not np.array_equal(a, other)


def test_fast_heisenberg_route_matches_matrix_route():
    cfg = DiffusionConfig(step=0.05, paths=2000, seed=3, renorm_interval=0)
    m = brownian_samples(HEISENBERG, [0.3, 1.0], cfg)
    c = heisenberg_coordinates_samples([0.3, 1.0], cfg)
    assert np.allclose(np.moveaxis(HEISENBERG.coordinates(m), 0, -1), c, atol=1e-12)


def test_heisenberg_moments():
    # x_t ~ N(0, 2t); z_t = int x dy has mean 0 and variance 2 t^2
    out = dilation_summaries([0.25, 1.0], DiffusionConfig(step=0.01, paths=40_000, seed=5))
    for row in out["moments"]:
        for key, target in (("x2", 2.0), ("y2", 2.0), ("z", 0.0), ("z2", 2.0)):
            mean, se = row[key]
            assert abs(mean - target) < 4 * se + 1e-12, (key, mean, se)


def test_ptf_of_constant_and_at_zero():
    one = constant_field(SU2, 1.0)
    est = estimate_Ptf(SU2.identity(), one, 0.5, DiffusionConfig(paths=100))
    assert est.mean == 1.0 and est.std_error == 0.0
    x = coordinate_field(HEISENBERG, 0)
    g = HEISENBERG.random_element(1)
    assert estimate_Ptf(g, x, 0, DiffusionConfig()).mean == pytest.approx(g[0, 1])


def test_ptf_of_exp_x_matches_closed_form():
    # P_t e^x = e^{x + t}
    cfg = DiffusionConfig(step=0.05, paths=50_000, seed=2)
    est = estimate_Ptf(HEISENBERG.identity(), exp_x(), 0.5, cfg)
    assert abs(est.mean - math.exp(0.5)) < 4 * est.std_error


def test_log_derivatives_of_exp_x():
    pts = HEISENBERG.random_element(0, size=3)
    cfg = DiffusionConfig(step=0.05, paths=4000, seed=1)
    d = estimate_log_derivatives(pts, exp_x(), 0.5, cfg, method="generator")
    assert np.allclose(d.extras["Xu"], 1.0, rtol=1e-9)
    assert np.allclose(d.extras["Yu"], 0.0, atol=1e-9)
    assert np.allclose(d.zu_sq, 0.0, atol=1e-12)
    assert np.allclose(d.du_dt, 1.0, rtol=1e-12)
    diff = estimate_log_derivatives(pts, exp_x(), 0.5, cfg)
    assert np.all(np.abs(diff.du_dt - 1.0) < 5 * diff.du_dt_err + 1e-3)


def test_log_derivatives_single_point_returns_floats():
    cfg = DiffusionConfig(step=0.1, paths=200)
    d = estimate_log_derivatives(SU2.identity(), constant_field(SU2, 2.0), 0.5, cfg)
    assert isinstance(d.gamma_u, float) and d.gamma_u == 0.0 and d.du_dt == 0.0
    assert d.to_dict()["t"] == 0.5


def test_non_positive_f_is_rejected():
    x = coordinate_field(HEISENBERG, 0)
    with pytest.raises(NumericalError):
        estimate_log_derivatives(HEISENBERG.identity(), x - 10.0, 0.5, DiffusionConfig(step=0.1, paths=100))


def test_time_difference_must_be_below_t():
    with pytest.raises(ValueError):
        estimate_log_derivatives(SU2.identity(), constant_field(SU2, 1.0), 0.5, DiffusionConfig(), dt=0.6)


def test_fit_log_log_exact_power_law():
    t = np.geomspace(0.1, 1, 5)
    slope, err, icpt, rms = fit_log_log(t, 3 * t**-2, 0.01 * t**-2)
    assert slope == pytest.approx(-2)
    assert icpt == pytest.approx(math.log(3))
    assert rms < 1e-12


def test_density_window_guard():
    with pytest.raises(NumericalError):
        heisenberg_density_at_identity([0.1], DiffusionConfig(paths=50), bandwidth=0.05)


def test_trajectory_rows_shape():
    rows = trajectory_rows(SU2, DiffusionConfig(step=0.1, paths=3), 4)
    assert len(rows) == 3 * 5
    assert len(rows[0]) == 2 + 16
    assert rows[0][2:] == np.eye(4).ravel().tolist()
