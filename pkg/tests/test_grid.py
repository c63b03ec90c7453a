import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddform.grid import DiscreteField, Grid, gradient, make_grid, read_csv, second_diff


def test_grid_spacing_and_origin():
    g = make_grid(1, 9)
    assert g.h == 0.25
    assert g.axis(0)[4] == 0.0
    assert make_grid(2, 257).h == 0.0078125


@pytest.mark.parametrize("d,n", [(1, 8), (2, 10), (1, 7), (2, 1027), (3, 131), (4, 9)])
def test_grid_rejects_bad_sizes(d, n):
    with pytest.raises(ValueError):
        make_grid(d, n)


@given(st.sampled_from([9, 11, 17, 33, 101, 257]), st.data())
def test_index_coordinate_round_trip(n, data):
    g = make_grid(2, n)
    k = data.draw(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)))
    assert g.index(g.coordinate(k)) == k


def test_origin_is_exact_node_for_every_odd_n():
    for n in range(9, 200, 2):
        assert make_grid(1, n).axis(0)[(n - 1) // 2] == 0.0


def test_field_validation():
    g = make_grid(2, 9)
    with pytest.raises(ValueError):
        DiscreteField(g, np.zeros(80))
    bad = np.zeros(g.shape)
    bad[3, 3] = np.nan
    with pytest.raises(ValueError):
        DiscreteField(g, bad)


def test_second_diff_exact_on_quadratics_and_bilinear():
    g = make_grid(2, 17)
    x, y = g.coords()
    assert np.allclose(second_diff(DiscreteField(g, x**2), 0, 0), 2.0, atol=1e-11)
    assert np.allclose(second_diff(DiscreteField(g, x * y), 0, 1), 1.0, atol=1e-11)
    assert np.allclose(second_diff(DiscreteField(g, x * y), 1, 0), 1.0, atol=1e-11)
    assert np.allclose(second_diff(DiscreteField(g, x * y), 0, 0), 0.0, atol=1e-11)


def test_second_diff_cubic_by_hand():
    # (x+h)^3 - 2x^3 + (x-h)^3 = 6 x h^2, so the stencil returns 6x exactly
    g = make_grid(1, 9)
    x = g.axis(0)
    d2 = second_diff(DiscreteField(g, x**3), 0, 0)
    assert d2[3] == 0.0  # node x = 0
    assert d2[4] == 1.5  # node x = 0.25
    assert np.allclose(d2, 6 * x[1:-1], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_summation_by_parts(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(2, 13)
    w = DiscreteField(g, rng.standard_normal(g.shape))
    phi_vals = rng.standard_normal(g.shape)
    phi_vals[~g.interior_mask(layers=2)] = 0
    phi = DiscreteField(g, phi_vals)
    inner = (slice(1, -1),) * 2
    for i in range(2):
        for j in range(2):
            lhs = np.sum(second_diff(w, i, j) * phi_vals[inner])
            rhs = np.sum(w.values[inner] * second_diff(phi, i, j))
            assert abs(lhs - rhs) * g.h**2 <= 1e-12 * max(1.0, np.sum(np.abs(w.values)))


def test_gradient_examples():
    g = make_grid(2, 9)
    x, y = g.coords()
    assert np.all(gradient(DiscreteField(g, np.full(g.shape, 3.0))).values == 0)
    gx = gradient(DiscreteField(g, x)).values
    assert np.allclose(gx[..., 0], 1.0, atol=1e-13) and np.allclose(gx[..., 1], 0.0, atol=1e-13)
    gq = gradient(DiscreteField(g, x**2)).values
    k = g.index([0.5, 0.0])
    assert gq[k][0] == pytest.approx(1.0, abs=1e-13)
    # one-sided boundary formula is second order, hence exact on quadratics too
    assert np.allclose(gq[..., 0], 2 * x, atol=1e-12)


def test_gradient_of_even_function_vanishes_at_center():
    g = make_grid(2, 33)
    x, y = g.coords()
    u = DiscreteField(g, np.cos(3 * x) + y**4)
    c = g.index([0.0, 0.0])
    assert np.all(np.abs(gradient(u).values[c]) <= 1e-14)


def test_csv_round_trip(tmp_path):
    g = make_grid(2, 9)
    x, y = g.coords()
    u = DiscreteField(g, np.sin(x) * np.exp(y) / 3)
    u.to_csv(tmp_path / "u.csv")
    header = (tmp_path / "u.csv").read_text().splitlines()[0]
    assert header == "x1,x2,u"
    back = read_csv(tmp_path / "u.csv", g)
    assert np.array_equal(back.values, u.values)
    du = gradient(u)
    du.to_csv(tmp_path / "du.csv")
    assert np.array_equal(read_csv(tmp_path / "du.csv", g).values, du.values)


def test_translated_grid_keeps_spacing():
    g = make_grid(2, 17).translated([0.5, -0.25])
    assert isinstance(g, Grid)
    assert g.h == 0.125
    assert g.coordinate((8, 8)).tolist() == [0.5, -0.25]
