"""Discrete Dirichlet problems for the double-divergence operator.

Two assemblies are provided over the interior nodes of a :class:`~ddform.grid.Grid`:

``double_div``
    ``sum_ij D_ij(a^{ij} u) + sum_i D0_i(b^i u) + c u = f`` with the product
    ``a^{ij} u`` formed at nodes before differencing.
``divergence``
    ``sum_i D0_i(a^{ij} G_j u + (d_j a^{ij}) u) = f``, nested centered
    differences, where ``G`` is the grid gradient (one-sided at the boundary).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coeff import CoefficientField, LowerOrderData
from .grid import DiscreteField, Grid, second_diff, second_diff_array

log = logging.getLogger(__name__)

SOLVE_RTOL = 1e-10


class SolverError(RuntimeError):
    """The linear solve did not reach the requested relative residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class LinearSystem:
    """Interior-row equations ``rows @ u = f`` over all grid nodes.

    Splitting ``rows`` into interior and boundary columns gives the square
    system ``A_II u_I = f - A_IB g`` once Dirichlet data ``g`` is fixed.
    """

    grid: Grid
    rows: sp.csr_matrix
    f: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    form: str

    @property
    def A(self) -> sp.csc_matrix:
        return self.rows[:, self.interior].tocsc()

    @property
    def A_boundary(self) -> sp.csr_matrix:
        return self.rows[:, self.boundary]

    def rhs(self, g_boundary: np.ndarray) -> np.ndarray:
        return self.f - self.A_boundary @ g_boundary


def _first_diff_1d(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference; boundary rows left empty."""
    k = np.arange(1, n - 1)
    rows = np.concatenate([k, k])
    cols = np.concatenate([k + 1, k - 1])
    vals = np.concatenate([np.full(k.size, 0.5 / h), np.full(k.size, -0.5 / h)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _second_diff_1d(n: int, h: float) -> sp.csr_matrix:
    k = np.arange(1, n - 1)
    rows = np.concatenate([k, k, k])
    cols = np.concatenate([k - 1, k, k + 1])
    vals = np.concatenate([np.ones(k.size), -2 * np.ones(k.size), np.ones(k.size)]) / h**2
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _gradient_1d(n: int, h: float) -> sp.csr_matrix:
    """Centered inside, one-sided second order at both ends (matches ``grid.gradient``)."""
    G = _first_diff_1d(n, h).tolil()
    G[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    G[n - 1, n - 3:n] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return G.tocsr()


def _along(ops: dict, d: int, n: int) -> sp.csr_matrix:
    """Kronecker product with ``ops[axis]`` on the given axes and identity elsewhere."""
    out = None
    eye = sp.identity(n, format="csr")
    for axis in range(d):
        m = ops.get(axis, eye)
        out = m if out is None else sp.kron(out, m, format="csr")
    return out


def _node_coefficients(grid: Grid, field: CoefficientField) -> np.ndarray:
    if field.dim != grid.dim:
        raise ValueError(f"coefficient field is {field.dim}-D but grid is {grid.dim}-D")
    return field.evaluate(grid.points())


def _lower_order(grid: Grid, lower: Optional[LowerOrderData]):
    pts = grid.points()
    N = grid.size
    b = c = None
    f = np.zeros(N)
    if lower is not None:
        if lower.b is not None:
            b = np.asarray(lower.b(pts), dtype=float).reshape(N, grid.dim)
        if lower.c is not None:
            c = np.asarray(lower.c(pts), dtype=float).reshape(N)
        if lower.f is not None:
            f = np.asarray(lower.f(pts), dtype=float).reshape(N)
    return b, c, f


def _finish(grid: Grid, full: sp.spmatrix, f_nodes: np.ndarray, form: str) -> LinearSystem:
    mask = grid.interior_mask().ravel()
    interior = np.flatnonzero(mask)
    boundary = np.flatnonzero(~mask)
    rows = full.tocsr()[interior]
    rows.eliminate_zeros()
    rows.sort_indices()
    if not np.all(np.isfinite(rows.data)):
        raise ValueError("assembled matrix has non-finite entries")
    return LinearSystem(grid, rows, f_nodes[interior], interior, boundary, form)


def _add_lower(full, grid, b, c, D0):
    if b is not None:
        for i in range(grid.dim):
            full = full + D0[i] @ sp.diags(b[:, i])
    if c is not None:
        full = full + sp.diags(c)
    return full


def assemble_double_div(
    grid: Grid, field: CoefficientField, lower: Optional[LowerOrderData] = None
) -> LinearSystem:
    """Rows of ``sum_ij D_ij(a^{ij} u) + sum_i D0_i(b^i u) + c u = f``."""
    a = _node_coefficients(grid, field)
    b, c, f = _lower_order(grid, lower)
    d, n, h = grid.dim, grid.n, grid.h
    D0 = [_along({i: _first_diff_1d(n, h)}, d, n) for i in range(d)]
    full = sp.csr_matrix((grid.size, grid.size))
    for i in range(d):
        full = full + _along({i: _second_diff_1d(n, h)}, d, n) @ sp.diags(a[:, i, i])
        for j in range(i + 1, d):
            # a symmetric: the (i, j) and (j, i) cross terms coincide
            aij = a[:, i, j] + a[:, j, i]
            if np.any(aij != 0):
                full = full + (D0[i] @ D0[j]) @ sp.diags(aij)
    full = _add_lower(full, grid, b, c, D0)
    return _finish(grid, full, f, "double_div")


def assemble_divergence_form(
    grid: Grid, field: CoefficientField, lower: Optional[LowerOrderData] = None
) -> LinearSystem:
    """Rows of ``sum_i D0_i(sum_j a^{ij} G_j u + (sum_j d_j a^{ij}) u) = f``.

    Needs a differentiable coefficient (constant or Sobolev tag). Without an
    analytic derivative the coefficient is differenced with step ``grid.h``.
    """
    if not field.smoothness.differentiable:
        raise ValueError(
            f"divergence form needs weakly differentiable coefficients, got {field.smoothness.kind!r}"
        )
    a = _node_coefficients(grid, field)
    da = field.gradient(grid.points(), step=grid.h)  # [m, k, i, j] = d_k a^{ij}
    drift = np.einsum("mjij->mi", da)
    b, c, f = _lower_order(grid, lower)
    d, n, h = grid.dim, grid.n, grid.h
    D0 = [_along({i: _first_diff_1d(n, h)}, d, n) for i in range(d)]
    G = [_along({j: _gradient_1d(n, h)}, d, n) for j in range(d)]
    full = sp.csr_matrix((grid.size, grid.size))
    for i in range(d):
        flux = sp.diags(drift[:, i])
        for j in range(d):
            if np.any(a[:, i, j] != 0):
                flux = flux + sp.diags(a[:, i, j]) @ G[j]
        full = full + D0[i] @ flux
    full = _add_lower(full, grid, b, c, D0)
    return _finish(grid, full, f, "divergence")


BoundaryData = Union[Callable[[np.ndarray], np.ndarray], DiscreteField, np.ndarray]


def boundary_values(grid: Grid, g: BoundaryData) -> np.ndarray:
    """Full-grid array of Dirichlet data (only boundary entries are used)."""
    if isinstance(g, DiscreteField):
        vals = g.values
    elif callable(g):
        vals = np.asarray(g(grid.points()), dtype=float)
    else:
        vals = np.asarray(g, dtype=float)
    vals = vals.reshape(grid.size)
    if not np.all(np.isfinite(vals[~grid.interior_mask().ravel()])):
        raise ValueError("boundary data must be finite")
    return vals


def _banded_solve(A: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    coo = A.tocoo()
    offs = coo.col - coo.row
    lower, upper = int(max(0, -offs.min())), int(max(0, offs.max()))
    ab = np.zeros((lower + upper + 1, A.shape[0]))
    ab[upper + coo.row - coo.col, coo.col] = coo.data
    return scipy.linalg.solve_banded((lower, upper), ab, rhs, check_finite=False)


@dataclass
class SolveStats:
    unknowns: int
    nnz: int
    method: str
    relative_residual: float
    residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def solve_dirichlet(
    system: LinearSystem, g: BoundaryData, rtol: float = SOLVE_RTOL, return_stats: bool = False
):
    """Solve with Dirichlet data ``g`` on the boundary of the box.

    1-D systems use a banded LU, higher dimensions a sparse LU. Raises
    :class:`SolverError` when the normwise relative residual
    ``|A x - b| / (|A| |x| + |b|)`` exceeds ``rtol``.
    """
    grid = system.grid
    full = boundary_values(grid, g)
    gB = full[system.boundary]
    rhs = system.rhs(gB)
    A = system.A
    try:
        if grid.dim == 1:
            method = "banded-lu"
            x = _banded_solve(A, rhs)
        else:
            method = "sparse-lu"
            x = spla.splu(A).solve(rhs)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise SolverError(f"linear solve failed: {exc}", float("inf")) from exc
    r = A @ x - rhs
    res = float(np.max(np.abs(r))) if r.size else 0.0
    scale = spla.norm(A, np.inf) * float(np.max(np.abs(x), initial=0.0)) + float(np.max(np.abs(rhs), initial=0.0))
    rel = res / scale if scale > 0 else 0.0
    if not np.isfinite(rel) or rel > rtol:
        raise SolverError(f"relative residual {rel:.3e} exceeds {rtol:.1e}", rel)
    u = np.zeros(grid.size)
    u[system.boundary] = gB
    u[system.interior] = x
    field = DiscreteField(grid, u.reshape(grid.shape))
    log.debug("solved %d unknowns (%s), relative residual %.2e", x.size, method, rel)
    if return_stats:
        return field, SolveStats(int(x.size), int(A.nnz), method, rel, res)
    return field


def residual(system: LinearSystem, u: DiscreteField) -> float:
    """``max_k |row_k . u - f_k|`` over interior rows."""
    r = system.rows @ u.values.reshape(-1) - system.f
    return float(np.max(np.abs(r))) if r.size else 0.0


def residual_scale(system: LinearSystem, u: DiscreteField) -> float:
    """``|rows|_inf |u|_inf + |f|_inf``, the natural magnitude of the residual."""
    return float(
        spla.norm(system.rows, np.inf) * np.max(np.abs(u.values)) + np.max(np.abs(system.f), initial=0.0)
    )


def adjoint_pairing_defect(grid: Grid, field: CoefficientField, w: DiscreteField, phi: DiscreteField) -> float:
    """``|<sum_ij D_ij(a^{ij} w), phi> - <w, sum_ij a^{ij} D_ij phi>|`` with weight ``h^d``.

    ``phi`` must vanish on the two outermost node layers, so its zero-padded
    differences vanish on the boundary and summation by parts is exact.
    """
    if np.any(phi.values[~grid.interior_mask(layers=2)] != 0):
        raise ValueError("test field must vanish on the two outermost node layers")
    a = _node_coefficients(grid, field).reshape(grid.shape + (grid.dim, grid.dim))
    h = grid.h
    inner = (slice(1, grid.n - 1),) * grid.dim
    left = 0.0
    right = 0.0
    for i in range(grid.dim):
        for j in range(grid.dim):
            aw = a[..., i, j] * w.values
            left += float(np.sum(second_diff(DiscreteField(grid, aw), i, j) * phi.values[inner]))
            right += float(np.sum(w.values * a[..., i, j] * second_diff_array(np.pad(phi.values, 1), h, i, j)))
    return abs(left - right) * h**grid.dim
