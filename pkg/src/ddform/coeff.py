"""Coefficient fields a(x) for double-divergence operators.

Every constructor here returns a scalar-factor field ``a(x) = base * phi(x)``
with ``base`` a constant SPD matrix. That keeps the ellipticity bounds, the
Hölder seminorm and the derivatives available in closed form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kernels import holder_quotient_max

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Smoothness:
    """Regularity tag: ``constant``, ``holder`` (with ``alpha``), ``sobolev``
    (with ``p``, the exclusive upper bound of admissible exponents) or
    ``discontinuous``."""

    kind: str
    alpha: Optional[float] = None
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant", "holder", "sobolev", "discontinuous"):
            raise ValueError(f"unknown smoothness tag {self.kind!r}")

    @property
    def differentiable(self) -> bool:
        return self.kind in ("constant", "sobolev")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "p": self.p}


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric matrix field ``x -> a(x)`` with ellipticity bounds ``lam <= Lam``.

    ``matrix`` maps an ``(m, d)`` point array to ``(m, d, d)`` matrices.
    ``derivative``, when given, maps points to ``(m, d, d, d)`` with
    ``out[:, k, i, j] = d a^{ij} / d x_k``.
    """

    dim: int
    matrix: Evaluator
    lam: float
    Lam: float
    smoothness: Smoothness
    derivative: Optional[Evaluator] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise ValueError(f"need 0 < lambda <= Lambda, got {self.lam}, {self.Lam}")

    def evaluate(self, x) -> np.ndarray:
        """``a(x)`` for a single point (returns ``(d, d)``) or ``(m, d)`` points."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(1, self.dim) if single else x.reshape(-1, self.dim)
        out = np.asarray(self.matrix(pts), dtype=float)
        return out[0] if single else out

    def gradient(self, x, step: Optional[float] = None) -> np.ndarray:
        """``d a^{ij}/d x_k`` at ``(m, d)`` points, shape ``(m, d, d, d)``.

        Falls back to centered differences with ``step`` when no analytic
        derivative is attached.
        """
        pts = np.asarray(x, dtype=float).reshape(-1, self.dim)
        if self.derivative is not None:
            return np.asarray(self.derivative(pts), dtype=float)
        if step is None:
            raise ValueError("field has no analytic derivative; a finite-difference step is required")
        out = np.empty((pts.shape[0], self.dim, self.dim, self.dim))
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = step
            out[:, k] = (self.matrix(pts + e) - self.matrix(pts - e)) / (2 * step)
        return out


@dataclass(frozen=True)
class LowerOrderData:
    """Optional drift ``b``, zeroth-order ``c`` and source ``f``; absent means zero."""

    b: Optional[Evaluator] = None
    c: Optional[Evaluator] = None
    f: Optional[Evaluator] = None

    @staticmethod
    def constant(b=None, c=None, f=None) -> "LowerOrderData":
        def const_vec(v):
            v = np.asarray(v, dtype=float)
            return lambda x: np.broadcast_to(v, (x.shape[0], v.size)).copy()

        def const(v):
            return lambda x: np.full(x.shape[0], float(v))

        return LowerOrderData(
            b=None if b is None else const_vec(b),
            c=None if c is None else const(c),
            f=None if f is None else const(f),
        )


def _check_spd(base, dim: Optional[int] = None) -> np.ndarray:
    A = np.atleast_2d(np.asarray(base, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if dim is not None and A.shape[0] != dim:
        raise ValueError(f"matrix is {A.shape[0]}x{A.shape[0]} but d={dim}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-14):
        raise ValueError("matrix is not symmetric")
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise ValueError("matrix is not positive definite")
    return 0.5 * (A + A.T)


def _box_corners(d: int) -> np.ndarray:
    return np.array(list(itertools.product([-1.0, 1.0], repeat=d)))


def _distance_range(z: np.ndarray) -> tuple[float, float]:
    """Min and max of ``|x - z|`` over the box ``[-1, 1]^d``."""
    nearest = np.clip(z, -1.0, 1.0)
    dmin = float(np.linalg.norm(z - nearest))
    dmax = float(np.max(np.linalg.norm(_box_corners(z.size) - z, axis=1)))
    return dmin, dmax


def scalar_factor_field(
    base,
    factor: Callable[[np.ndarray], np.ndarray],
    factor_grad: Optional[Callable[[np.ndarray], np.ndarray]],
    factor_range: tuple[float, float],
    smoothness: Smoothness,
    params: Optional[dict] = None,
) -> CoefficientField:
    """Field ``a(x) = base * factor(x)`` given the factor's range on the box."""
    A = _check_spd(base)
    d = A.shape[0]
    lo, hi = factor_range
    if lo <= 0:
        raise ValueError(f"scalar factor reaches {lo:.3g} <= 0 on the box; ellipticity fails")
    mu = np.linalg.eigvalsh(A)

    def matrix(x):
        return factor(x)[:, None, None] * A

    derivative = None
    if factor_grad is not None:

        def derivative(x):
            return factor_grad(x)[:, :, None, None] * A

    return CoefficientField(
        dim=d,
        matrix=matrix,
        lam=float(mu[0] * lo),
        Lam=float(mu[-1] * hi),
        smoothness=smoothness,
        derivative=derivative,
        params=dict(params or {}, base=A.tolist()),
    )


def make_constant(A) -> CoefficientField:
    A = _check_spd(A)
    d = A.shape[0]
    return scalar_factor_field(
        A,
        lambda x: np.ones(x.shape[0]),
        lambda x: np.zeros((x.shape[0], d)),
        (1.0, 1.0),
        Smoothness("constant"),
        {"kind": "constant"},
    )


def make_holder_bump(d: int, base, amplitude: float, exponent: float, center) -> CoefficientField:
    """``a(x) = base * (1 + amplitude * |x - center|^exponent)``.

    The scalar factor has α-Hölder seminorm exactly ``amplitude``.
    """
    if not 0 < exponent < 1:
        raise ValueError(f"Hölder exponent must lie in (0, 1), got {exponent}")
    A = _check_spd(base, d)
    z = np.asarray(center, dtype=float).reshape(d)
    kappa, alpha = float(amplitude), float(exponent)
    if kappa == 0:
        field_ = make_constant(A)
        return CoefficientField(
            d, field_.matrix, field_.lam, field_.Lam, field_.smoothness, field_.derivative,
            {"kind": "holder_bump", "amplitude": 0.0, "exponent": alpha, "center": z.tolist(), "base": A.tolist()},
        )
    dmin, dmax = _distance_range(z)
    ends = sorted([1 + kappa * dmin**alpha, 1 + kappa * dmax**alpha])

    def factor(x):
        return 1.0 + kappa * np.linalg.norm(x - z, axis=1) ** alpha

    return scalar_factor_field(
        A, factor, None, (ends[0], ends[1]), Smoothness("holder", alpha=alpha),
        {"kind": "holder_bump", "amplitude": kappa, "exponent": alpha, "center": z.tolist()},
    )


def make_sobolev_perturbation(d: int, base, amplitude: float, power: float, center) -> CoefficientField:
    """``a(x) = base * (1 + amplitude * |x - center|^power)`` with ``power`` in (1, 2).

    Second derivatives behave like ``|x - center|^(power - 2)``, so the field
    is in W^{2,p} for every ``p < d / (2 - power)``; that bound exceeds ``d``.
    """
    if not 1 < power < 2:
        raise ValueError(f"power must lie in (1, 2), got {power}")
    A = _check_spd(base, d)
    z = np.asarray(center, dtype=float).reshape(d)
    kappa, gamma = float(amplitude), float(power)
    dmin, dmax = _distance_range(z)
    ends = sorted([1 + kappa * dmin**gamma, 1 + kappa * dmax**gamma])

    def factor(x):
        return 1.0 + kappa * np.linalg.norm(x - z, axis=1) ** gamma

    def factor_grad(x):
        r = x - z
        rn = np.linalg.norm(r, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(rn > 0, kappa * gamma * rn ** (gamma - 2), 0.0)
        return s[:, None] * r

    return scalar_factor_field(
        A, factor, factor_grad, (ends[0], ends[1]), Smoothness("sobolev", p=d / (2 - gamma)),
        {"kind": "sobolev", "amplitude": kappa, "power": gamma, "center": z.tolist()},
    )


def make_sine(d: int, base, amplitude: float, frequency: float = np.pi, axis: int = 0) -> CoefficientField:
    """Smooth ``a(x) = base * (1 + amplitude * sin(frequency * x_axis))``, tagged Sobolev(p=inf)."""
    A = _check_spd(base, d)
    kappa, w = float(amplitude), float(frequency)
    if abs(kappa) >= 1:
        raise ValueError("|amplitude| must be < 1 to keep the factor positive")

    def factor(x):
        return 1.0 + kappa * np.sin(w * x[:, axis])

    def factor_grad(x):
        g = np.zeros_like(x)
        g[:, axis] = kappa * w * np.cos(w * x[:, axis])
        return g

    # sin(w x) over [-1, 1] attains +-1 whenever w >= pi/2
    peak = 1.0 if w >= np.pi / 2 else abs(np.sin(w))
    return scalar_factor_field(
        A, factor, factor_grad, (1 - abs(kappa) * peak, 1 + abs(kappa) * peak),
        Smoothness("sobolev", p=np.inf),
        {"kind": "sine", "amplitude": kappa, "frequency": w, "axis": axis},
    )


def make_jump(d: int, base, left: float, right: float, axis: int = 0, at: float = 0.0) -> CoefficientField:
    """Piecewise constant factor: ``left`` for ``x_axis < at``, ``right`` otherwise."""
    if left <= 0 or right <= 0:
        raise ValueError("jump values must be positive")
    A = _check_spd(base, d)

    def factor(x):
        return np.where(x[:, axis] < at, float(left), float(right))

    return scalar_factor_field(
        A, factor, None, (min(left, right), max(left, right)), Smoothness("discontinuous"),
        {"kind": "jump", "left": left, "right": right, "axis": axis, "at": at},
    )


def proximity(field: CoefficientField, x0, samples) -> float:
    """``max_{x in samples} max_{ij} |a^{ij}(x) - a^{ij}(x0)|``."""
    pts = np.asarray(samples, dtype=float).reshape(-1, field.dim)
    if pts.shape[0] == 0:
        raise ValueError("proximity needs at least one sample point")
    a0 = field.evaluate(np.asarray(x0, dtype=float).reshape(field.dim))
    return float(np.max(np.abs(field.evaluate(pts) - a0)))


@dataclass
class AssumptionReport:
    symmetry_defect: float
    eig_min: float
    eig_max: float
    lam: float
    Lam: float
    holder_quotient: Optional[float] = None
    holder_bound: Optional[float] = None
    symmetric: bool = True
    elliptic: bool = True
    holder_ok: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.symmetric and self.elliptic and self.holder_ok is not False

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def sample_box(d: int, density: int, lower=-1.0, upper=1.0) -> np.ndarray:
    axes = [np.linspace(lower, upper, density)] * d
    return np.stack([c.ravel() for c in np.meshgrid(*axes, indexing="ij")], axis=1)


def check_assumptions(
    field: CoefficientField,
    box: tuple[float, float] = (-1.0, 1.0),
    density: int = 21,
    extra_points=None,
    sym_tol: float = 1e-12,
    eig_tol: float = 1e-9,
) -> AssumptionReport:
    """Sample ``field`` on a tensor grid of ``density`` points per axis and
    report symmetry, ellipticity and (for Hölder fields) the empirical
    Hölder quotient over all sample pairs. Violations are reported, not raised.
    """
    pts = sample_box(field.dim, density, *box)
    center = field.params.get("center")
    if center is not None:
        pts = np.vstack([pts, np.asarray(center, dtype=float).reshape(1, -1)])
    if extra_points is not None:
        pts = np.vstack([pts, np.asarray(extra_points, dtype=float).reshape(-1, field.dim)])
    mats = field.evaluate(pts)
    sym = float(np.max(np.abs(mats - np.swapaxes(mats, 1, 2))))
    eig = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, 1, 2)))
    rep = AssumptionReport(
        symmetry_defect=sym,
        eig_min=float(eig.min()),
        eig_max=float(eig.max()),
        lam=field.lam,
        Lam=field.Lam,
    )
    rep.symmetric = sym <= sym_tol
    rep.elliptic = rep.eig_min >= field.lam - eig_tol and rep.eig_max <= field.Lam + eig_tol
    if field.smoothness.kind == "holder":
        alpha = field.smoothness.alpha
        rep.holder_quotient = holder_quotient_max(mats.reshape(len(pts), -1), pts, alpha)
        kappa = field.params.get("amplitude")
        if kappa is not None:
            base = np.asarray(field.params["base"], dtype=float)
            rep.holder_bound = float(abs(kappa) * np.max(np.abs(base)))
            rep.holder_ok = rep.holder_quotient <= rep.holder_bound * (1 + 1e-9)
    return rep
