import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddform import regmeter as rm
from ddform.grid import DiscreteField, gradient, make_grid
from ddform.oracle import exact_1d


def cusp(t):
    return 1 + 0.5 * np.abs(t) ** 0.5


def oracle_field(n):
    g = make_grid(1, n)
    return DiscreteField(g, exact_1d(cusp, 1.0, -0.3, g.axis(0)))


def test_universal_rho_delta():
    rho, delta = rm.universal_rho_delta(1.0, 0.5)
    assert rho == pytest.approx(0.25)
    assert delta == pytest.approx(0.25)
    with pytest.raises(ValueError):
        rm.universal_rho_delta(0.2, 0.5)


def test_interpolate_exact_on_multilinear():
    g = make_grid(2, 17)
    x, y = g.coords()
    u = DiscreteField(g, 1 + 2 * x - y + 3 * x * y)
    p = np.array([0.137, -0.411])
    assert rm.interpolate(u, p) == pytest.approx(1 + 2 * p[0] - p[1] + 3 * p[0] * p[1], abs=1e-14)


def test_zero_level_of_linear_field():
    g = make_grid(2, 33)
    x, _ = g.coords()
    level = rm.detect_zero_level(DiscreteField(g, x))
    assert level.status == "ok" and len(level) > 0
    for p in level:
        assert p.x[0] == 0.0
        assert p.value_residual == 0.0
        assert np.max(np.abs(p.x)) <= 0.5


def test_zero_level_oracle():
    u = oracle_field(513)
    level = rm.detect_zero_level(u)
    assert len(level) == 1
    assert abs(level[0].x[0] - 0.3) <= u.grid.h


def test_zero_level_empty_and_zero():
    g = make_grid(2, 17)
    assert rm.detect_zero_level(DiscreteField(g, np.ones(g.shape))).status == "empty"
    assert rm.detect_zero_level(DiscreteField(g, np.zeros(g.shape))).status == "identically-zero"


def test_zero_level_points_are_separated():
    g = make_grid(2, 65)
    x, y = g.coords()
    level = rm.detect_zero_level(DiscreteField(g, x**2 + y**2 - 0.16))
    pts = np.array([p.x for p in level])
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(len(pts)) * 9
    assert dist.min() >= g.h
    assert np.allclose(np.linalg.norm(pts, axis=1), 0.4, atol=g.h**2)


def test_first_level_saddle():
    g = make_grid(2, 33)
    x, y = g.coords()
    u = DiscreteField(g, x * y)
    level = rm.detect_first_level(u, gradient(u))
    assert len(level) == 1
    p = level[0]
    assert np.all(p.x == 0) and p.value_residual == 0 and p.gradient_residual == 0


def test_first_level_negative_control():
    g = make_grid(2, 33)
    x, y = g.coords()
    u = DiscreteField(g, x**2 + y**2 - 0.25)
    assert len(rm.detect_first_level(u, gradient(u))) == 0


def test_first_level_rejects_1d():
    u = oracle_field(65)
    level = rm.detect_first_level(u, gradient(u))
    assert level.status == "unsupported-dimension"
    assert "1" in level.message or "one" in level.message.lower()


def _radii(r0=0.25, k=12):
    return r0 * 0.5 ** np.arange(k + 1)


def test_distance_function_table():
    g = make_grid(2, 257)
    x0 = np.array([0.1, -0.05])
    u = DiscreteField(g, np.linalg.norm(g.points() - x0, axis=1).reshape(g.shape))
    rep = rm.oscillation_table(u, x0)
    assert np.all(rep.osc <= rep.radii * (1 + 1e-10))
    assert np.all(rep.osc >= rep.radii - g.h)
    assert rep.alpha_star == pytest.approx(1.0, abs=0.02)


def test_pure_power_table():
    g = make_grid(2, 257)
    x0 = np.array([0.1, -0.05])
    u = DiscreteField(g, np.linalg.norm(g.points() - x0, axis=1).reshape(g.shape) ** 0.5)
    rep = rm.oscillation_table(u, x0)
    assert np.all(rep.osc <= rep.radii**0.5 * (1 + 1e-10))
    assert np.all(rep.osc >= (rep.radii - g.h) ** 0.5)


def test_oracle_sandwich_at_zero():
    u = oracle_field(1025)
    h = u.grid.h
    rep = rm.oscillation_table(u, [0.3])
    ratio = rep.osc / rep.radii
    a_min, a_max = 1.0, 1.5
    assert np.all(ratio <= 1 / a_min)
    # nearest node to the ball edge sits at most h inside it
    assert np.all(ratio >= (rep.radii - h) / rep.radii / a_max)


def test_sharpness_sandwich_at_detected_zero():
    for n in (513, 1025, 2049):
        u = oracle_field(n)
        x = rm.detect_zero_level(u)[0].x
        rep = rm.oscillation_table(u, x)
        slack = 5 * u.grid.h / rep.window[0]
        assert 1 - slack <= rep.alpha_star <= 1 + slack


def test_gradient_table_saddle_and_null_quadratic():
    g = make_grid(2, 257)
    x, y = g.coords()
    du = gradient(DiscreteField(g, x * y))
    rep = rm.gradient_oscillation_table(du, [0.0, 0.0])
    assert np.all(rep.osc <= rep.radii * (1 + 1e-12))
    assert np.all(rep.osc >= rep.radii - g.h)
    dq = gradient(DiscreteField(g, (x**2 - y**2) / 2))
    rq = rm.gradient_oscillation_table(dq, [0.0, 0.0])
    assert np.allclose(rq.osc, rep.osc, atol=1e-12)
    assert rq.alpha_star == pytest.approx(1.0, abs=0.01)


def test_table_guards():
    g = make_grid(2, 33)
    u = DiscreteField(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        rm.oscillation_table(u, [0.0, 0.0], rho=1.5)
    with pytest.raises(ValueError):
        rm.oscillation_table(u, [0.0, 0.0], r0=1e-4)
    with pytest.raises(ValueError):
        rm.oscillation_table(gradient(u), [0.0, 0.0])
    coarse = rm.oscillation_table(DiscreteField(g, g.coords()[0]), [0.0, 0.0])
    assert coarse.status == "insufficient-radii" and coarse.alpha_star is None


def test_fit_examples():
    r = _radii()
    fit = rm.fit_exponent(r, r**0.7)
    assert abs(fit.alpha - 0.7) <= 1e-12 and fit.r2 == pytest.approx(1.0, abs=1e-12)
    fit = rm.fit_exponent(r, 3 * r)
    assert fit.alpha == pytest.approx(1.0, abs=1e-12) and fit.C == pytest.approx(3.0, rel=1e-12)


def test_fit_errors_and_zero_handling():
    r = _radii()
    with pytest.raises(ValueError):
        rm.fit_exponent(r[:3], r[:3])
    assert rm.fit_exponent(r, np.zeros_like(r)).status == "identically-zero"
    o = r**0.6
    o[-3:] = 0
    fit = rm.fit_exponent(r, o)
    assert fit.used == len(r) - 3 and fit.alpha == pytest.approx(0.6, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-5, 5), st.integers(4, 12))
def test_fitter_exact_on_power_laws(alpha, logC, k):
    r = _radii(k=k)
    fit = rm.fit_exponent(r, np.exp(logC) * r**alpha)
    assert abs(fit.alpha - alpha) <= 1e-12
    assert abs(fit.C / np.exp(logC) - 1) <= 1e-12
    assert abs(fit.r2 - 1) <= 1e-12


def test_cusp_fit_matches_closed_form_oscillation():
    # continuous sup over |x| <= r of |u(x) - u(0)| is attained at x = +r:
    # (r + 0.15 sqrt(r)) / (1 + 0.5 sqrt(r))
    u = oracle_field(2049)
    rep = rm.oscillation_table(u, [0.0], value=-0.3, kind="cusp")
    w = rep.radii[(rep.radii >= rep.window[0] * (1 - 1e-12)) & (rep.radii <= rep.window[1])]
    ref = rm.fit_exponent(w, (w + 0.15 * np.sqrt(w)) / (1 + 0.5 * np.sqrt(w)))
    assert rep.alpha_star == pytest.approx(ref.alpha, abs=1e-12)


def _random_field(g, rng):
    pts = g.points()
    v = np.zeros(g.size)
    for _ in range(3):
        v += rng.standard_normal() * np.cos(pts @ rng.uniform(-4, 4, g.dim) + rng.uniform(0, 6))
    return DiscreteField(g, v.reshape(g.shape))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.integers(0, 10**6))
def test_osc_nonincreasing(d, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(d, 257 if d == 1 else 65)
    rep = rm.oscillation_table(_random_field(g, rng), rng.uniform(-0.5, 0.5, d), value=rng.standard_normal())
    assert np.all(np.diff(rep.osc) <= 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 10**6))
def test_scale_equivariance(s, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(1, 1025)
    u = _random_field(g, rng)
    r1 = rm.oscillation_table(u, [0.1], value=0.2)
    r2 = rm.oscillation_table(u * s, [0.1], value=0.2 * s)
    if r1.alpha_star is None:
        assert r2.alpha_star is None
        return
    assert abs(r1.alpha_star - r2.alpha_star) <= 1e-12
    assert r2.C / (s * r1.C) == pytest.approx(1.0, abs=1e-12)


def test_translation_equivariance():
    rng = np.random.default_rng(5)
    g = make_grid(2, 257)
    u = _random_field(g, rng)
    shift = np.array([0.3125, -0.25])
    ut = DiscreteField(g.translated(shift), u.values)
    r1 = rm.oscillation_table(u, [0.1, -0.05], value=0.2)
    r2 = rm.oscillation_table(ut, np.array([0.1, -0.05]) + shift, value=0.2)
    assert np.array_equal(r1.osc, r2.osc)
    assert abs(r1.alpha_star - r2.alpha_star) <= 1e-12


def test_reports_parallel_match_serial(monkeypatch):
    g = make_grid(2, 129)
    x, y = g.coords()
    u = DiscreteField(g, x + 0.3 * np.sin(3 * y))
    pts = rm.detect_zero_level(u).points
    monkeypatch.setenv("DDFORM_THREADS", "1")
    serial = [r.summary() for r in rm.zero_level_reports(u, pts)]
    monkeypatch.setenv("DDFORM_THREADS", "4")
    assert rm.thread_count() == 4
    assert [r.summary() for r in rm.zero_level_reports(u, pts)] == serial
    monkeypatch.setenv("DDFORM_THREADS", "bogus")
    assert rm.thread_count() == 1


def test_report_serialization(tmp_path):
    u = oracle_field(1025)
    rep = rm.oscillation_table(u, [0.3], residuals={"value": 0.0})
    rep.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "r,osc" and len(lines) == len(rep.radii) + 1
    data = json.loads(rep.to_json())
    assert set(data) >= {"x0", "kind", "alpha_star", "C", "r2", "window", "residuals"}
