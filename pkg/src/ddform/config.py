"""JSON experiment configs: parsing, validation, and the objects they describe."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import coeff as cf
from .grid import Grid
from .oracle import exact_1d, null_quadratic, quadratic
from .regmeter import universal_rho_delta

COMMANDS = ("solve", "theorem1", "theorem2", "convergence", "fundsol", "invariants")
BOUNDARY_FAMILIES = ("linear", "saddle", "null_quadratic", "oracle_1d", "zero")
COEFFICIENT_KINDS = ("constant", "holder_bump", "sobolev", "sine", "jump")
FORMS = ("auto", "double_div", "divergence")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class CoefficientSpec:
    kind: str = "constant"
    base: object = None
    amplitude: float = 0.0
    exponent: Optional[float] = None
    power: Optional[float] = None
    center: Optional[list] = None
    frequency: float = math.pi
    axis: int = 0
    left: float = 1.0
    right: float = 2.0
    at: float = 0.0


@dataclass
class BoundarySpec:
    family: str = "linear"
    coeffs: Optional[list] = None
    offset: float = 0.0
    c1: float = 1.0
    c2: float = 0.0


@dataclass
class LowerOrderSpec:
    b: Optional[list] = None
    c: Optional[float] = None
    f: Optional[float] = None


@dataclass
class DecaySpec:
    rho: float = 0.5
    k_max: int = 12
    tol: float = 1e-6
    grad_tol: float = 1e-6
    region: float = 0.5
    C: Optional[float] = None
    alpha: Optional[float] = None


@dataclass
class FundsolSpec:
    matrix: Optional[list] = None
    pole: Optional[list] = None
    annulus: list = field(default_factory=lambda: [0.3, 0.7])
    samples: int = 200
    step: float = 1e-3
    tolerance: float = 1e-3


@dataclass
class ExperimentConfig:
    command: str
    dim: int = 2
    n: int = 129
    n_list: Optional[list] = None
    coefficient: CoefficientSpec = field(default_factory=CoefficientSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    lower_order: LowerOrderSpec = field(default_factory=LowerOrderSpec)
    decay: DecaySpec = field(default_factory=DecaySpec)
    fundsol: FundsolSpec = field(default_factory=FundsolSpec)
    form: str = "auto"
    output: str = "ddform-out"
    seed: int = 0
    inject: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        nested = {
            "coefficient": CoefficientSpec,
            "boundary": BoundarySpec,
            "lower_order": LowerOrderSpec,
            "decay": DecaySpec,
            "fundsol": FundsolSpec,
        }
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in nested:
                if not isinstance(value, dict):
                    raise ConfigError(f"{key!r} must be an object")
                sub_known = {f.name for f in fields(nested[key])}
                bad = set(value) - sub_known
                if bad:
                    raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
                value = nested[key](**value)
            kwargs[key] = value
        if "command" not in kwargs:
            raise ConfigError("config needs a 'command'")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        for n in [self.n] + list(self.n_list or []):
            try:
                Grid(self.dim, int(n))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            if int(n) != n:
                raise ConfigError(f"n must be an integer, got {n}")
        if self.form not in FORMS:
            raise ConfigError(f"form must be one of {FORMS}")
        if self.coefficient.kind not in COEFFICIENT_KINDS:
            raise ConfigError(f"coefficient kind must be one of {COEFFICIENT_KINDS}")
        try:
            self.build_field()
        except ValueError as exc:
            raise ConfigError(f"coefficient: {exc}") from exc
        b = self.boundary
        if b.family not in BOUNDARY_FAMILIES:
            raise ConfigError(f"boundary family must be one of {BOUNDARY_FAMILIES}")
        if b.family == "oracle_1d" and self.dim != 1:
            raise ConfigError("oracle_1d boundary data needs dim = 1")
        if b.family in ("saddle", "null_quadratic") and self.dim < 2:
            raise ConfigError(f"{b.family} boundary data needs dim >= 2")
        if b.coeffs is not None and len(b.coeffs) != self.dim:
            raise ConfigError("linear boundary coeffs need one entry per axis")
        lo = self.lower_order
        if lo.b is not None and len(lo.b) != self.dim:
            raise ConfigError("drift b needs one entry per axis")
        d = self.decay
        if not 0 < d.rho < 1:
            raise ConfigError(f"decay.rho must lie in (0, 1), got {d.rho}")
        if d.k_max < 1:
            raise ConfigError("decay.k_max must be >= 1")
        if d.tol <= 0 or d.grad_tol <= 0:
            raise ConfigError("decay tolerances must be positive")
        if not 0 < d.region < 1:
            raise ConfigError("decay.region must lie in (0, 1)")
        if (d.C is None) != (d.alpha is None):
            raise ConfigError("decay.C and decay.alpha must be given together")
        if d.C is not None:
            try:
                universal_rho_delta(d.C, d.alpha)
            except ValueError as exc:
                raise ConfigError(f"decay: {exc}") from exc
        fs = self.fundsol
        if len(fs.annulus) != 2 or not 0 < fs.annulus[0] < fs.annulus[1]:
            raise ConfigError("fundsol.annulus must be [r0, r1] with 0 < r0 < r1")
        if fs.samples < 1 or fs.step <= 0:
            raise ConfigError("fundsol.samples and fundsol.step must be positive")
        if self.inject not in (None, "asymmetric", "tampered"):
            raise ConfigError("inject must be null, 'asymmetric' or 'tampered'")

    # builders -----------------------------------------------------------

    def base_matrix(self) -> np.ndarray:
        base = self.coefficient.base
        if base is None:
            return np.eye(self.dim)
        A = np.asarray(base, dtype=float)
        if A.ndim == 0:
            return float(A) * np.eye(self.dim)
        return A

    def build_field(self) -> cf.CoefficientField:
        c = self.coefficient
        base = self.base_matrix()
        center = np.zeros(self.dim) if c.center is None else c.center
        if c.kind == "constant":
            return cf.make_constant(base)
        if c.kind == "holder_bump":
            if c.exponent is None:
                raise ValueError("holder_bump needs 'exponent'")
            return cf.make_holder_bump(self.dim, base, c.amplitude, c.exponent, center)
        if c.kind == "sobolev":
            if c.power is None:
                raise ValueError("sobolev needs 'power'")
            return cf.make_sobolev_perturbation(self.dim, base, c.amplitude, c.power, center)
        if c.kind == "sine":
            return cf.make_sine(self.dim, base, c.amplitude, c.frequency, c.axis)
        return cf.make_jump(self.dim, base, c.left, c.right, c.axis, c.at)

    def build_lower(self) -> Optional[cf.LowerOrderData]:
        lo = self.lower_order
        if lo.b is None and lo.c is None and lo.f is None:
            return None
        return cf.LowerOrderData.constant(lo.b, lo.c, lo.f)

    def boundary_function(self) -> Callable[[np.ndarray], np.ndarray]:
        b = self.boundary
        if b.family == "zero":
            return lambda x: np.zeros(x.shape[0])
        if b.family == "linear":
            coeffs = np.zeros(self.dim) if b.coeffs is None else np.asarray(b.coeffs, dtype=float)
            if b.coeffs is None:
                coeffs[0] = 1.0
            return lambda x: x @ coeffs + b.offset
        if b.family == "saddle":
            return lambda x: x[:, 0] * x[:, 1]
        if b.family == "null_quadratic":
            return quadratic(null_quadratic(self.base_matrix()))
        field_ = self.build_field()
        a = oracle_coefficient(field_)
        return lambda x: exact_1d(a, b.c1, b.c2, x[:, 0])

    def exact_solution(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Closed-form solution of the configured problem, when one is known."""
        field_ = self.build_field()
        if self.build_lower() is not None:
            return None
        if self.boundary.family == "oracle_1d":
            return self.boundary_function()
        if field_.smoothness.kind != "constant":
            return None
        fam = self.boundary.family
        if fam in ("zero", "linear", "null_quadratic"):
            return self.boundary_function()
        if fam == "saddle" and self.base_matrix()[0, 1] == 0:
            return self.boundary_function()
        return None

    def solve_form(self) -> str:
        if self.form != "auto":
            return self.form
        return "divergence" if self.build_field().smoothness.kind == "sobolev" else "double_div"

    def decay_rho(self) -> tuple[float, Optional[float]]:
        d = self.decay
        if d.C is not None:
            return universal_rho_delta(d.C, d.alpha)
        return d.rho, None


def oracle_coefficient(field_: cf.CoefficientField) -> Callable[[np.ndarray], np.ndarray]:
    """Scalar ``a(x)`` of a 1-D field as a function of an array of abscissae."""
    if field_.dim != 1:
        raise ValueError("oracle coefficient needs a one-dimensional field")
    return lambda x: field_.evaluate(np.asarray(x, dtype=float).reshape(-1, 1))[:, 0, 0].reshape(np.shape(x))
