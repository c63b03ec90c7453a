"""Uniform tensor grids on [-1, 1]^d, nodal fields and centered stencils."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_NODES = {1: 4097, 2: 1025, 3: 129}


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` nodes per axis on the box ``center + [-1, 1]^d``.

    ``n`` is odd so the box center is a node. Coordinates are computed as
    ``center + (2k - (n - 1)) / (n - 1)``, which puts the center node at an
    exact zero offset.
    """

    dim: int
    n: int
    center: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.dim not in MAX_NODES:
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.n % 2 == 0:
            raise ValueError(f"n must be odd so the origin is a node, got n={self.n}")
        if not 9 <= self.n <= MAX_NODES[self.dim]:
            raise ValueError(
                f"n must lie in [9, {MAX_NODES[self.dim]}] for d={self.dim}, got n={self.n}"
            )
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.dim)
        else:
            c = tuple(float(v) for v in self.center)
            if len(c) != self.dim:
                raise ValueError("center must have one entry per axis")
            object.__setattr__(self, "center", c)

    @property
    def h(self) -> float:
        return 2.0 / (self.n - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - 1.0

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + 1.0

    def axis(self, i: int) -> np.ndarray:
        k = np.arange(self.n)
        return self.center[i] + (2.0 * k - (self.n - 1)) / (self.n - 1)

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        return list(np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij"))

    def points(self) -> np.ndarray:
        """All node coordinates as an ``(size, dim)`` array in C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def coordinate(self, index: Sequence[int]) -> np.ndarray:
        index = np.asarray(index)
        return np.asarray(self.center) + (2.0 * index - (self.n - 1)) / (self.n - 1)

    def index(self, x: Sequence[float]) -> tuple[int, ...]:
        """Nearest node index of point ``x``."""
        k = np.rint((np.asarray(x, dtype=float) - self.lower) / self.h).astype(int)
        return tuple(int(v) for v in np.clip(k, 0, self.n - 1))

    def interior_mask(self, layers: int = 1) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[(slice(layers, self.n - layers),) * self.dim] = True
        return mask

    def boundary_distance(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.min(np.minimum(x - self.lower, self.upper - x)))

    def translated(self, shift: Sequence[float]) -> "Grid":
        return Grid(self.dim, self.n, tuple(np.asarray(self.center) + np.asarray(shift)))

    def evaluate(self, fn) -> "DiscreteField":
        """Sample ``fn(points) -> values`` at every node."""
        vals = np.asarray(fn(self.points()), dtype=float)
        if vals.ndim == 2:
            return DiscreteField(self, vals.reshape(self.shape + (vals.shape[1],)))
        return DiscreteField(self, vals.reshape(self.shape))


def make_grid(d: int, n: int) -> Grid:
    return Grid(d, n)


@dataclass(frozen=True)
class DiscreteField:
    """Nodal values on a grid: scalar (``grid.shape``) or vector (``grid.shape + (d,)``)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape not in (self.grid.shape, self.grid.shape + (self.grid.dim,)):
            raise ValueError(
                f"values of shape {v.shape} do not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == self.grid.dim + 1

    def __mul__(self, s: float) -> "DiscreteField":
        return DiscreteField(self.grid, self.values * s)

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path) -> None:
        """One row per node: coordinates, then value(s), 17 significant digits."""
        g = self.grid
        pts = g.points()
        vals = self.values.reshape(g.size, -1)
        coord_names = [f"x{i + 1}" for i in range(g.dim)]
        value_names = ["u"] if vals.shape[1] == 1 else [f"du{i + 1}" for i in range(vals.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(coord_names + value_names)
            for p, v in zip(pts, vals):
                w.writerow([f"{c:.17g}" for c in p] + [f"{c:.17g}" for c in v])


def read_csv(path, grid: Grid) -> DiscreteField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.size:
        raise ValueError(f"expected {grid.size} rows, found {data.shape[0]}")
    vals = data[:, grid.dim:]
    if vals.shape[1] == 1:
        return DiscreteField(grid, vals[:, 0].reshape(grid.shape))
    return DiscreteField(grid, vals.reshape(grid.shape + (vals.shape[1],)))


def second_diff_array(v: np.ndarray, h: float, i: int, j: int) -> np.ndarray:
    """``D_ij`` of a raw ``(n,) * d`` array at its interior nodes."""
    n = v.shape[0]
    d = v.ndim

    def at(offset):
        return v[tuple(slice(1 + o, n - 1 + o) for o in offset)]

    ei = np.zeros(d, dtype=int)
    ej = np.zeros(d, dtype=int)
    ei[i] = 1
    ej[j] = 1
    if i == j:
        return (at(ei) - 2.0 * at(0 * ei) + at(-ei)) / h**2
    return (at(ei + ej) - at(ei - ej) - at(-ei + ej) + at(-ei - ej)) / (4.0 * h**2)


def second_diff(w: DiscreteField, i: int, j: int) -> np.ndarray:
    """Centered second difference ``D_ij w`` at interior nodes.

    Returns an array of shape ``(n - 2,) * d``. Pure derivatives use the
    3-point stencil, mixed ones the 4-point cross stencil.
    """
    if w.is_vector:
        raise ValueError("second_diff expects a scalar field")
    return second_diff_array(w.values, w.grid.h, i, j)


def gradient(u: DiscreteField) -> DiscreteField:
    """Centered first differences inside, one-sided second order on the boundary."""
    g = u.grid
    comps = [np.gradient(u.values, g.h, axis=i, edge_order=2) for i in range(g.dim)]
    return DiscreteField(g, np.stack(comps, axis=-1))
