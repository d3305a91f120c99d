"""Uniform 1D finite-volume grid, fields of cell averages, boundary conditions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

# 5-point Gauss-Legendre rule on [-1/2, 1/2], exact through degree 9.
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)
_GAUSS_X = 0.5 * _GAUSS_X
_GAUSS_W = 0.5 * _GAUSS_W


class BoundaryCondition(enum.Enum):
    PERIODIC = "periodic"
    FREE_FLOW = "free-flow"


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of N cells on [a, b].

    Cell j (0-based) is [a + j*h, a + (j+1)*h] with h = (b - a)/N.
    Reconstruction stencils need at least three cells.
    """

    a: float
    b: float
    N: int

    def __post_init__(self) -> None:
        if not self.b > self.a:
            raise ValueError(f"need b > a, got [{self.a}, {self.b}]")
        if self.N < 3:
            raise ValueError(f"need N >= 3 cells, got N={self.N}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def cell_centers(self) -> np.ndarray:
        return self.a + (np.arange(self.N) + 0.5) * self.h

    @property
    def interfaces(self) -> np.ndarray:
        return self.a + np.arange(self.N + 1) * self.h


def validate_field(field: np.ndarray, grid: Grid1D, m: int) -> np.ndarray:
    """Check shape (N, m) and finiteness; returns the field unchanged."""
    field = np.asarray(field, dtype=float)
    if field.shape != (grid.N, m):
        raise ValueError(f"field shape {field.shape} != ({grid.N}, {m})")
    if not np.all(np.isfinite(field)):
        raise ValueError("field contains non-finite entries")
    return field


def project_initial_condition(
    f: Callable[[np.ndarray], np.ndarray], grid: Grid1D, m: int
) -> np.ndarray:
    """Cell averages of x -> f(x) by 5-point Gauss quadrature per cell.

    f maps an array of K points to an array of shape (K, m) (or (K,) for
    m = 1). The rule is exact for polynomials of degree <= 9, so smooth
    data is projected well beyond the scheme's order.
    """
    x = grid.cell_centers[:, None] + grid.h * _GAUSS_X[None, :]
    vals = np.asarray(f(x.ravel()), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    vals = vals.reshape(grid.N, _GAUSS_X.size, m)
    return np.einsum("g,jgc->jc", _GAUSS_W, vals)


def install_riemann_ic(
    grid: Grid1D, left: np.ndarray, right: np.ndarray, x_jump: float = 0.0
) -> np.ndarray:
    """Piecewise-constant field equal to `left` for x < x_jump, `right` after.

    The jump must sit on a cell interface so the projection is exact.
    """
    k = (x_jump - grid.a) / grid.h
    if abs(k - round(k)) > 1e-12 * grid.N:
        raise ValueError(f"jump at x={x_jump} is not a cell interface")
    k = int(round(k))
    left = np.atleast_1d(np.asarray(left, dtype=float))
    right = np.atleast_1d(np.asarray(right, dtype=float))
    field = np.empty((grid.N, left.size))
    field[:k] = left
    field[k:] = right
    return field


def write_field_csv(path: str, grid: Grid1D, field: np.ndarray) -> None:
    """Write `x,u1..um` rows at cell centers with 17 significant digits."""
    field = np.atleast_2d(field)
    m = field.shape[1]
    header = "x," + ",".join(f"u{c + 1}" for c in range(m))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for x, row in zip(grid.cell_centers, field):
            fh.write(",".join(f"{v:.17g}" for v in (x, *row)) + "\n")


def read_field_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of write_field_csv; returns (x, field)."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    return data[:, 0], data[:, 1:]
