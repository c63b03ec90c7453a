"""Exact reference solutions.

* the one-dimensional family ``u = (c1 x + c2) / a(x)`` solving ``(a u)'' = 0``,
* quadratics annihilated by a constant-coefficient operator,
* the fundamental solution of ``A : D^2`` for d >= 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


def _a_values(a: Callable, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    vals = np.asarray(a(x), dtype=float)
    if np.any(vals <= 0):
        raise ValueError("coefficient must be positive")
    return vals


def exact_1d(a: Callable, c1: float, c2: float, x):
    """``(c1 x + c2) / a(x)``; ``a`` takes and returns arrays."""
    x_arr = np.asarray(x, dtype=float)
    u = (c1 * x_arr + c2) / _a_values(a, x_arr)
    return float(u) if u.ndim == 0 else u


def fit_1d_bvp(a: Callable, u_left: float, u_right: float) -> tuple[float, float]:
    """``(c1, c2)`` such that ``exact_1d`` matches ``u(-1)`` and ``u(1)``."""
    al, ar = _a_values(a, np.array([-1.0, 1.0]))
    wl, wr = u_left * al, u_right * ar
    return float(0.5 * (wr - wl)), float(0.5 * (wr + wl))


@dataclass(frozen=True)
class Oracle1D:
    a: Callable
    c1: float
    c2: float

    def __call__(self, x):
        return exact_1d(self.a, self.c1, self.c2, x)

    @property
    def zero(self) -> float | None:
        return None if self.c1 == 0 else -self.c2 / self.c1


def null_quadratic(A) -> np.ndarray:
    """Symmetric ``M`` with ``trace(A M) = 0`` and spectral norm 1.

    Deterministic choice ``M ∝ A22 E11 - A11 E22``; the quadratic
    ``q(x) = x^T M x / 2`` then satisfies ``A : D^2 q = 0``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    if d < 2:
        raise ValueError("no nontrivial null quadratic in one dimension")
    M = np.zeros((d, d))
    M[0, 0] = A[1, 1]
    M[1, 1] = -A[0, 0]
    return M / np.linalg.norm(M, 2)


def quadratic(M) -> Callable[[np.ndarray], np.ndarray]:
    M = np.asarray(M, dtype=float)
    return lambda x: 0.5 * np.einsum("mi,ij,mj->m", x, M, x)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def fundamental_solution(A, y, x, d: int | None = None):
    """``H(x, y) = [a_ij (x-y)_i (x-y)_j]^{(2-d)/2} / ((d-2) |B_1| sqrt(det A))``

    with ``a_ij`` the inverse of ``A`` and ``|B_1|`` the unit-ball volume.
    Accepts one point ``x`` of shape ``(d,)`` or many of shape ``(m, d)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0] if d is None else d
    if d <= 2:
        raise ValueError("fundamental solution is only provided for d >= 3")
    if A.shape != (d, d):
        raise ValueError(f"matrix must be {d}x{d}")
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise ValueError("matrix must be positive definite")
    x = np.asarray(x, dtype=float)
    r = x - np.asarray(y, dtype=float)
    Ainv = np.linalg.inv(A)
    form = np.einsum("...i,ij,...j->...", r, Ainv, r)
    if np.any(form <= 0):
        raise ValueError("x coincides with the pole y")
    H = form ** ((2 - d) / 2) / ((d - 2) * unit_ball_volume(d) * math.sqrt(np.linalg.det(A)))
    return float(H) if np.ndim(H) == 0 else H


def annihilation_residuals(A, y, points, step: float, scale: float = 1.0):
    """``A : D^2 H`` by centered differences at each point, plus the sum of
    absolute terms ``sum_ij |A_ij D_ij H|`` used for normalisation."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    pts = np.asarray(points, dtype=float).reshape(-1, d)

    def H(p):
        return scale * fundamental_solution(A, y, p)

    s = float(step)
    h0 = H(pts)
    total = np.zeros(len(pts))
    magnitude = np.zeros(len(pts))
    eye = np.eye(d) * s
    for i in range(d):
        dii = (H(pts + eye[i]) - 2 * h0 + H(pts - eye[i])) / s**2
        total += A[i, i] * dii
        magnitude += abs(A[i, i]) * np.abs(dii)
        for j in range(i + 1, d):
            if A[i, j] == 0:
                continue
            dij = (
                H(pts + eye[i] + eye[j]) - H(pts + eye[i] - eye[j])
                - H(pts - eye[i] + eye[j]) + H(pts - eye[i] - eye[j])
            ) / (4 * s**2)
            total += 2 * A[i, j] * dij
            magnitude += 2 * abs(A[i, j]) * np.abs(dij)
    return total, magnitude


def annulus_samples(d: int, y, r0: float, r1: float, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((count, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(r0, r1, count)
    return np.asarray(y, dtype=float) + radii[:, None] * dirs


def fundsol_annihilation_defect(
    A, y, radii: tuple[float, float] = (0.3, 0.7), samples: int = 200, step: float = 1e-3, seed: int = 0
) -> float:
    """Relative annihilation defect of ``H(., y)`` on an annulus around ``y``.

    ``max |A : D^2 H| / max sum_ij |A_ij D_ij H|`` over sampled points, so the
    value does not depend on how ``H`` is normalised.
    """
    r0, r1 = radii
    if not 0 < r0 < r1:
        raise ValueError("annulus radii must satisfy 0 < r0 < r1")
    if step >= r0 / 10:
        raise ValueError(f"finite-difference step {step} must be below r0/10 = {r0 / 10}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    pts = annulus_samples(A.shape[0], y, r0, r1, samples, seed)
    total, magnitude = annihilation_residuals(A, y, pts, step)
    return float(np.max(np.abs(total)) / np.max(magnitude))
