"""Zero and first level sets of discrete solutions and their local decay rates.

A :class:`DecayReport` records ``osc_k = sup_{B_{r_k}(x0)} |u - u(x0)|`` on
dyadic radii ``r_k = r0 * rho**k`` and the least-squares slope of
``log osc`` against ``log r``.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import DiscreteField, Grid
from .kernels import ball_max

MIN_BALL_NODES = 3
MIN_FIT_POINTS = 4
WINDOW_CELLS = 4.0


@dataclass
class LevelSetPoint:
    x: np.ndarray
    kind: str
    value_residual: float
    gradient_residual: Optional[float] = None
    cell: tuple = ()

    def to_dict(self) -> dict:
        return {
            "x0": [float(v) for v in self.x],
            "kind": self.kind,
            "value_residual": self.value_residual,
            "gradient_residual": self.gradient_residual,
            "cell": list(self.cell),
        }


@dataclass
class LevelSet:
    """Detected points plus a status: ``ok``, ``empty``, ``identically-zero``
    or ``unsupported-dimension``."""

    points: list
    status: str = "ok"
    message: str = ""

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]


def universal_rho_delta(C: float, alpha: float) -> tuple[float, float]:
    """``rho = (1 / (2C))**(1 / (1 - alpha))`` and ``delta = rho**alpha / 2``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if C <= 0.5:
        raise ValueError("C must exceed 1/2 for rho < 1")
    rho = (1.0 / (2.0 * C)) ** (1.0 / (1.0 - alpha))
    return rho, rho**alpha / 2.0


def _cell_of(grid: Grid, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = (np.asarray(x, dtype=float) - grid.lower) / grid.h
    k = np.clip(np.floor(s).astype(int), 0, grid.n - 2)
    return k, s - k


_CORNER_CACHE: dict = {}


def _corners(d: int) -> np.ndarray:
    if d not in _CORNER_CACHE:
        _CORNER_CACHE[d] = np.array(list(itertools.product((0, 1), repeat=d)))
    return _CORNER_CACHE[d]


def _cell_values(values: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Corner values of cell ``k`` in the order of ``_corners``."""
    return np.array([values[tuple(k + c)] for c in _corners(len(k))])


def _weights(t: np.ndarray) -> np.ndarray:
    c = _corners(t.size)
    return np.prod(np.where(c == 1, t, 1.0 - t), axis=1)


def _weight_jacobian(t: np.ndarray) -> np.ndarray:
    """``J[c, m] = d weight_c / d t_m``."""
    c = _corners(t.size)
    J = np.empty(c.shape, dtype=float)
    for m in range(t.size):
        f = np.where(c == 1, t, 1.0 - t)
        f[:, m] = np.where(c[:, m] == 1, 1.0, -1.0)
        J[:, m] = np.prod(f, axis=1)
    return J


def interpolate(u: DiscreteField, x) -> np.ndarray | float:
    """Multilinear interpolation of a scalar or vector field at point ``x``."""
    k, t = _cell_of(u.grid, x)
    vals = _cell_values(u.values, k)
    out = _weights(t) @ vals
    return float(out) if np.ndim(out) == 0 else out


def _in_region(grid: Grid, x: np.ndarray, region: float) -> bool:
    return bool(np.max(np.abs(x - np.asarray(grid.center))) <= region + 1e-12)


def _dedup(points: list, h: float) -> list:
    """Greedy removal of points closer than ``h`` to an already kept point."""
    kept = []
    buckets: dict = {}
    for p in points:
        key = tuple(np.floor(p.x / h).astype(int))
        close = False
        for off in itertools.product((-1, 0, 1), repeat=len(key)):
            for q in buckets.get(tuple(a + b for a, b in zip(key, off)), ()):
                if np.linalg.norm(q.x - p.x) < h:
                    close = True
                    break
            if close:
                break
        if not close:
            kept.append(p)
            buckets.setdefault(key, []).append(p)
    return kept


def detect_zero_level(u: DiscreteField, tol: float = 1e-6, region: float = 0.5) -> LevelSet:
    """Roots of ``u`` on grid edges with a sign change (and nodes where ``u = 0``).

    Roots are linearly interpolated along the edge, restricted to
    ``|x - center|_inf <= region`` and thinned so no two are closer than ``h``.
    """
    g = u.grid
    v = u.values
    if not np.any(v):
        return LevelSet([], "identically-zero", "u vanishes at every node")
    lower = g.lower
    h = g.h
    raw = []
    for idx in zip(*np.nonzero(v == 0)):
        raw.append((np.array(idx, dtype=float), np.array(idx)))
    for axis in range(g.dim):
        a = np.take(v, np.arange(g.n - 1), axis=axis)
        b = np.take(v, np.arange(1, g.n), axis=axis)
        for idx in zip(*np.nonzero(a * b < 0)):
            idx = np.array(idx)
            va, vb = a[tuple(idx)], b[tuple(idx)]
            pos = idx.astype(float)
            pos[axis] += va / (va - vb)
            raw.append((pos, idx))
    pts = []
    for pos, idx in sorted(raw, key=lambda r: tuple(r[0])):
        x = lower + pos * h
        if not _in_region(g, x, region):
            continue
        res = abs(interpolate(u, x))
        if res > tol:
            continue
        pts.append(LevelSetPoint(x, "S0", res, None, tuple(int(i) for i in np.minimum(idx, g.n - 2))))
    pts = _dedup(pts, h)
    return LevelSet(pts, "ok" if pts else "empty")


def _newton_cell(vals: np.ndarray, t0: np.ndarray, iters: int = 50) -> Optional[np.ndarray]:
    """Root of the multilinear vector interpolant with corner values ``vals`` (2^d, d)."""
    t = t0.copy()
    for _ in range(iters):
        F = _weights(t) @ vals
        J = vals.T @ _weight_jacobian(t)
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None
        t = t - step
        if np.max(np.abs(step)) < 1e-14:
            break
        if np.max(np.abs(t - 0.5)) > 10:
            return None
    if np.max(np.abs(_weights(t) @ vals)) > 1e-10 * max(1.0, np.max(np.abs(vals))):
        return None
    return t


def detect_first_level(
    u: DiscreteField,
    grad: DiscreteField,
    tol: float = 1e-6,
    grad_tol: float = 1e-6,
    region: float = 0.5,
    zero_tol: float = 1e-10,
) -> LevelSet:
    """Points where ``u = 0`` and ``Du = 0``.

    Candidate cells are those where every gradient component changes sign
    (values below ``zero_tol * max|Du|`` count as zero). The gradient root
    inside each candidate comes from Newton's method on the multilinear
    interpolant; it is kept when ``|u| <= tol`` and ``|Du| <= grad_tol`` there.
    """
    g = u.grid
    if g.dim == 1:
        return LevelSet(
            [], "unsupported-dimension",
            "one-dimensional solutions (c1 x + c2)/a have no nontrivial point with u = u' = 0",
        )
    G = np.array(grad.values, copy=True)
    scale = np.max(np.abs(G))
    if scale == 0:
        return LevelSet([], "identically-zero", "gradient vanishes at every node")
    G[np.abs(G) <= zero_tol * scale] = 0.0
    cell_sl = [tuple(slice(c, g.n - 1 + c) for c in corner) for corner in _corners(g.dim)]
    candidate = np.ones((g.n - 1,) * g.dim, dtype=bool)
    for comp in range(g.dim):
        corner_vals = np.stack([G[sl + (comp,)] for sl in cell_sl])
        candidate &= (corner_vals.min(axis=0) <= 0) & (corner_vals.max(axis=0) >= 0)
    pts = []
    for idx in zip(*np.nonzero(candidate)):
        k = np.array(idx)
        vals = _cell_values(G, k)
        zero_corner = np.flatnonzero(np.all(vals == 0, axis=1))
        if zero_corner.size:
            t = _corners(g.dim)[zero_corner[0]].astype(float)
        else:
            t = _newton_cell(vals, np.full(g.dim, 0.5))
            if t is None or np.any(t < -1e-9) or np.any(t > 1 + 1e-9):
                continue
            t = np.clip(t, 0.0, 1.0)
        x = g.lower + (k + t) * g.h
        if not _in_region(g, x, region):
            continue
        ures = abs(interpolate(u, x))
        gres = float(np.linalg.norm(interpolate(grad, x)))
        if ures <= tol and gres <= grad_tol:
            pts.append(LevelSetPoint(x, "S1", ures, gres, tuple(int(i) for i in k)))
    pts = _dedup(pts, g.h)
    return LevelSet(pts, "ok" if pts else "empty")


@dataclass
class FitResult:
    alpha: Optional[float]
    C: Optional[float]
    r2: Optional[float]
    used: int
    status: str = "ok"


def fit_exponent(radii: Sequence[float], osc: Sequence[float], window: Optional[tuple] = None) -> FitResult:
    """Ordinary least squares of ``log osc`` on ``log r``: slope ``alpha``, ``C = exp(intercept)``.

    Pairs outside ``window = (rmin, rmax)`` and pairs with ``osc == 0`` are
    dropped. Raises ``ValueError`` if fewer than four pairs remain, unless
    every remaining oscillation is zero (status ``identically-zero``).
    """
    r = np.asarray(radii, dtype=float)
    o = np.asarray(osc, dtype=float)
    keep = np.ones(r.size, dtype=bool)
    if window is not None:
        lo, hi = window
        keep &= (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    if keep.any() and not np.any(o[keep] > 0):
        return FitResult(None, None, None, 0, "identically-zero")
    keep &= o > 0
    if keep.sum() < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} (r, osc) pairs with osc > 0, got {int(keep.sum())}")
    x = np.log(r[keep])
    y = np.log(o[keep])
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_res = np.sum((y - (intercept + slope * x)) ** 2)
    ss_tot = np.sum((y - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(np.exp(intercept)), float(r2), int(keep.sum()))


@dataclass
class DecayReport:
    center: tuple
    kind: str
    value: object
    radii: np.ndarray
    osc: np.ndarray
    counts: np.ndarray
    window: tuple
    alpha_star: Optional[float] = None
    C: Optional[float] = None
    r2: Optional[float] = None
    used: int = 0
    status: str = "ok"
    residuals: dict = field(default_factory=dict)

    def summary(self) -> dict:
        val = self.value
        return {
            "x0": [float(v) for v in self.center],
            "kind": self.kind,
            "value_at_x0": val if np.ndim(val) == 0 else [float(v) for v in val],
            "alpha_star": self.alpha_star,
            "C": self.C,
            "r2": self.r2,
            "window": [float(w) for w in self.window],
            "radii_in_fit": self.used,
            "status": self.status,
            "residuals": self.residuals,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "osc"])
            for r, o in zip(self.radii, self.osc):
                w.writerow([f"{r:.17g}", f"{o:.17g}"])

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _radii(grid: Grid, x0: np.ndarray, rho: float, k_max: int, r0: Optional[float]):
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    dist = grid.boundary_distance(x0)
    if dist <= 0:
        raise ValueError("x0 must lie inside the box")
    top = min(0.25, dist / 2.0) if r0 is None else float(r0)
    return top * rho ** np.arange(k_max + 1), dist


def _table(grid, dev, x0, kind, value, rho, k_max, r0, residuals) -> DecayReport:
    x0 = np.asarray(x0, dtype=float).reshape(grid.dim)
    radii, dist = _radii(grid, x0, rho, k_max, r0)
    osc, counts = ball_max(dev, grid.lower, grid.h, x0, radii)
    keep = counts >= MIN_BALL_NODES
    if not keep.any():
        raise ValueError("no radius holds enough grid nodes")
    radii, osc, counts = radii[keep], osc[keep], counts[keep]
    window = (WINDOW_CELLS * grid.h, dist / 2.0)
    rep = DecayReport(tuple(float(v) for v in x0), kind, value, radii, osc, counts, window,
                      residuals=dict(residuals or {}))
    try:
        fit = fit_exponent(radii, osc, window)
    except ValueError:
        rep.status = "insufficient-radii"
        return rep
    rep.alpha_star, rep.C, rep.r2, rep.used, rep.status = fit.alpha, fit.C, fit.r2, fit.used, fit.status
    return rep


def oscillation_table(
    u: DiscreteField,
    x0,
    value: float = 0.0,
    rho: float = 0.5,
    k_max: int = 12,
    kind: str = "S0",
    r0: Optional[float] = None,
    residuals: Optional[dict] = None,
) -> DecayReport:
    """Dyadic table of ``sup_{|x - x0| <= r_k} |u(x) - value|`` over grid nodes, with its fit.

    ``r_k = r0 * rho**k`` with ``r0 = min(1/4, dist(x0, boundary) / 2)``;
    radii whose ball holds fewer than three nodes are dropped, and only radii
    in ``[4h, dist/2]`` enter the fit.
    """
    if u.is_vector:
        raise ValueError("oscillation_table expects a scalar field")
    dev = np.abs(u.values - value)
    return _table(u.grid, dev, x0, kind, float(value), rho, k_max, r0, residuals)


def gradient_oscillation_table(
    grad: DiscreteField,
    x0,
    value=None,
    rho: float = 0.5,
    k_max: int = 12,
    kind: str = "S1",
    r0: Optional[float] = None,
    residuals: Optional[dict] = None,
) -> DecayReport:
    """Same as :func:`oscillation_table` for ``|Du(x) - value|_2`` (``value`` defaults to 0)."""
    g = grad.grid
    if not grad.is_vector:
        raise ValueError("gradient_oscillation_table expects a vector field")
    value = np.zeros(g.dim) if value is None else np.asarray(value, dtype=float)
    dev = np.linalg.norm(grad.values - value, axis=-1)
    return _table(g, dev, x0, kind, [float(v) for v in value], rho, k_max, r0, residuals)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("DDFORM_THREADS", "1")))
    except ValueError:
        return 1


def zero_level_reports(u: DiscreteField, points: Iterable[LevelSetPoint], rho=0.5, k_max=12) -> list:
    """One report per S0 point, taking ``u(x0) = 0`` as the theorem assumes."""

    def one(p):
        return oscillation_table(u, p.x, 0.0, rho, k_max, "S0", residuals={"value": p.value_residual})

    with ThreadPoolExecutor(thread_count()) as ex:
        return list(ex.map(one, points))


def first_level_reports(grad: DiscreteField, points: Iterable[LevelSetPoint], rho=0.5, k_max=12) -> list:
    """One gradient report per S1 point, taking ``Du(x0) = 0``."""

    def one(p):
        return gradient_oscillation_table(
            grad, p.x, None, rho, k_max, "S1",
            residuals={"value": p.value_residual, "gradient": p.gradient_residual},
        )

    with ThreadPoolExecutor(thread_count()) as ex:
        return list(ex.map(one, points))
