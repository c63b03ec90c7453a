import numpy as np
import pytest
import scipy.sparse as sp
import sympy

from ddform import coeff as cf
from ddform.assemble import (
    SolverError,
    adjoint_pairing_defect,
    assemble_divergence_form,
    assemble_double_div,
    residual,
    residual_scale,
    solve_dirichlet,
)
from ddform.grid import DiscreteField, make_grid
from ddform.oracle import exact_1d, fit_1d_bvp, null_quadratic, quadratic


def cusp(t):
    return 1 + 0.5 * np.abs(t) ** 0.5


HOLDER_1D = cf.make_holder_bump(1, 1.0, 0.5, 0.5, [0.0])


def test_laplacian_rows():
    g = make_grid(1, 9)
    A = assemble_double_div(g, cf.make_constant([[1.0]])).A.toarray()
    ref = (np.diag(-2 * np.ones(7)) + np.diag(np.ones(6), 1) + np.diag(np.ones(6), -1)) / g.h**2
    assert np.array_equal(A, ref)


def test_variable_coefficient_rows():
    g = make_grid(1, 17)
    x = g.axis(0)
    rows = assemble_double_div(g, HOLDER_1D).rows.toarray()
    for r, k in enumerate(range(1, g.n - 1)):
        expect = np.zeros(g.n)
        expect[k - 1] = cusp(x[k - 1]) / g.h**2
        expect[k] = -2 * cusp(x[k]) / g.h**2
        expect[k + 1] = cusp(x[k + 1]) / g.h**2
        assert np.allclose(rows[r], expect, rtol=1e-14, atol=0)


def test_zeroth_order_shift():
    g = make_grid(2, 9)
    f = cf.make_constant(np.eye(2))
    A0 = assemble_double_div(g, f).A
    A1 = assemble_double_div(g, f, cf.LowerOrderData.constant(c=1.0)).A
    assert abs(A1 - A0 - sp.identity(A0.shape[0])).max() == 0


def test_drift_uses_plus_sign():
    # D0(b u) with constant b and u = x gives +b
    g = make_grid(1, 17)
    f = cf.make_constant([[1.0]])
    s = assemble_double_div(g, f, cf.LowerOrderData.constant(b=[0.7]))
    u = g.axis(0)
    assert np.allclose(s.rows @ u, 0.7, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        assemble_double_div(make_grid(2, 9), cf.make_constant([[1.0]]))


def test_divergence_form_rejects_holder():
    with pytest.raises(ValueError):
        assemble_divergence_form(make_grid(1, 9), HOLDER_1D)


def test_forms_agree_for_constant_coefficients_on_quadratics():
    g = make_grid(2, 33)
    f = cf.make_constant([[2.0, 0.5], [0.5, 1.0]])
    a = assemble_double_div(g, f).rows
    b = assemble_divergence_form(g, f).rows
    rng = np.random.default_rng(0)
    for _ in range(5):
        M = rng.standard_normal((2, 2))
        q = quadratic(M + M.T)(g.points()) + g.points() @ rng.standard_normal(2)
        assert np.max(np.abs((a - b) @ q)) <= 1e-12 * max(1.0, np.max(np.abs(a @ q)))


def test_forms_consistent_at_second_order_on_sobolev_field():
    f = cf.make_sobolev_perturbation(2, np.eye(2), 0.1, 1.5, [0.0, 0.0])
    diffs = []
    for n in (33, 65, 129):
        g = make_grid(2, n)
        u = g.points()[:, 0] ** 2
        d = (assemble_double_div(g, f).rows - assemble_divergence_form(g, f).rows) @ u
        # stay off the singular point of D^2 a so the ratio reflects h^2
        mask = np.linalg.norm(g.points()[g.interior_mask().ravel()], axis=1) >= 0.25
        diffs.append(np.max(np.abs(d[mask])))
    assert 3 <= diffs[0] / diffs[1] <= 5
    assert 3 <= diffs[1] / diffs[2] <= 5


def test_divergence_form_residual_second_order_1d():
    f = cf.make_sine(1, 2.0, 0.15)

    def a(t):
        return 2 * (1 + 0.15 * np.sin(np.pi * t))

    res = []
    for n in (65, 129, 257):
        g = make_grid(1, n)
        u = exact_1d(a, 1.0, 0.2, g.axis(0))
        r = np.abs(assemble_divergence_form(g, f).rows @ u)
        # rows next to the boundary see the one-sided gradient and are only O(h)
        res.append(r[1:-1].max())
    assert 3.5 <= res[0] / res[1] <= 4.5
    assert 3.5 <= res[1] / res[2] <= 4.5


def test_null_quadratic_discrete_exact():
    g = make_grid(2, 65)
    q = quadratic(null_quadratic(np.eye(2)))
    u = solve_dirichlet(assemble_double_div(g, cf.make_constant(np.eye(2))), q)
    assert np.max(np.abs(u.values.ravel() - q(g.points()))) <= 1e-8


def test_oracle_solve_at_2049():
    g = make_grid(1, 2049)
    c1, c2 = fit_1d_bvp(cusp, -13 / 15, 7 / 15)
    u = solve_dirichlet(assemble_double_div(g, HOLDER_1D), lambda p: exact_1d(cusp, c1, c2, p[:, 0]))
    assert np.max(np.abs(u.values - exact_1d(cusp, 1.0, -0.3, g.axis(0)))) <= 1e-3


def test_zero_data_gives_zero_solution():
    g = make_grid(2, 33)
    f = cf.make_holder_bump(2, np.eye(2), 0.1, 0.3, [0.2, 0.1])
    u = solve_dirichlet(assemble_double_div(g, f), lambda p: np.zeros(len(p)))
    assert u.sup() == 0.0


def test_residual_contract_and_linearity():
    g = make_grid(2, 33)
    f = cf.make_holder_bump(2, np.eye(2), 0.1, 0.3, [0.2, 0.1])
    s = assemble_double_div(g, f)
    u = solve_dirichlet(s, lambda p: p[:, 0] * p[:, 1] + 0.3)
    assert residual(s, u) <= 1e-10 * residual_scale(s, u)
    rng = np.random.default_rng(1)
    w = DiscreteField(g, rng.standard_normal(g.shape))
    for scale in (2.0, -0.5, 7.25):
        assert residual(s, w * scale) == pytest.approx(abs(scale) * residual(s, w), rel=1e-12)


def test_single_node_perturbation_raises_residual():
    # row k's diagonal is -2 d a(x_k) / h^2, so a bump of delta at x_k shows up there
    g = make_grid(2, 33)
    f = cf.make_holder_bump(2, np.eye(2), 0.1, 0.3, [0.2, 0.1])
    s = assemble_double_div(g, f)
    u = solve_dirichlet(s, lambda p: p[:, 0])
    base = residual(s, u)
    delta = 1e-3
    v = u.values.copy()
    k = g.index([0.25, -0.25])
    v[k] += delta
    bound = delta * 2 * g.dim * f.lam / g.h**2
    assert residual(s, DiscreteField(g, v)) >= bound - base


def test_solver_error_when_residual_contract_fails():
    g = make_grid(2, 17)
    s = assemble_double_div(g, cf.make_holder_bump(2, np.eye(2), 0.3, 0.5, [0.1, 0.2]))
    with pytest.raises(SolverError) as info:
        solve_dirichlet(s, lambda p: np.sin(3 * p[:, 0]) + p[:, 1], rtol=1e-30)
    assert info.value.residual > 1e-30


def test_solver_error_on_exactly_singular_system():
    # c = 4/h^2 with c-term cancelling the 1-D Laplacian diagonal leaves a
    # matrix whose rows are [1, 0, 1]/h^2: singular for an odd interior count
    g = make_grid(1, 9)
    s = assemble_double_div(g, cf.make_constant([[1.0]]), cf.LowerOrderData.constant(c=2 / g.h**2))
    with pytest.raises(SolverError):
        solve_dirichlet(s, lambda p: p[:, 0] + 2)


def _pairing_symbolic(n=9):
    """Exact summation-by-parts on a 9-node grid, over symbols."""
    a = sympy.symbols(f"a0:{n}", positive=True)
    w = sympy.symbols(f"w0:{n}")
    inner = sympy.symbols(f"p2:{n - 2}")
    phi = [0, 0] + list(inner) + [0, 0]
    h = sympy.Rational(2, n - 1)
    left = sum((a[k + 1] * w[k + 1] - 2 * a[k] * w[k] + a[k - 1] * w[k - 1]) / h**2 * phi[k] for k in range(1, n - 1))
    right = sum(w[k] * a[k] * (phi[k + 1] - 2 * phi[k] + phi[k - 1]) / h**2 for k in range(1, n - 1))
    return sympy.expand(left - right)


def test_adjoint_identity_holds_symbolically():
    assert _pairing_symbolic() == 0


def test_adjoint_pairing_numeric():
    rng = np.random.default_rng(4)
    for d, n, field in [
        (1, 9, HOLDER_1D),
        (1, 65, cf.make_constant([[1.7]])),
        (2, 33, cf.make_holder_bump(2, np.array([[1.0, 0.2], [0.2, 0.8]]), 0.2, 0.4, [0.1, 0.0])),
    ]:
        g = make_grid(d, n)
        w = DiscreteField(g, rng.standard_normal(g.shape))
        p = rng.standard_normal(g.shape)
        p[~g.interior_mask(layers=2)] = 0
        assert adjoint_pairing_defect(g, field, w, DiscreteField(g, p)) <= 1e-12


def test_adjoint_pairing_rejects_unsupported_phi():
    g = make_grid(1, 9)
    w = DiscreteField(g, np.ones(9))
    p = np.zeros(9)
    p[1] = 1.0
    with pytest.raises(ValueError):
        adjoint_pairing_defect(g, HOLDER_1D, w, DiscreteField(g, p))
