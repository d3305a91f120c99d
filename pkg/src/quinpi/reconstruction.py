"""Third-order CWENOZ reconstruction with ghost-cell-free boundary closure.

Every cell blends an optimal quadratic with two lower-degree fallbacks:

  interior cell   P_opt on {j-1, j, j+1}, linear polys on {j-1, j} and {j, j+1}
  first/last cell P_opt on the three cells hugging the boundary, one linear
                  poly on the two cells nearest the boundary, and the constant
                  cell average (adaptive-order blend, no ghost data)

The blend is R = (w0/d0) (P_opt - sum_k d_k P_k) + sum_k w_k P_k with
Z-type nonlinear weights built from Jiang-Shu smoothness indicators and a
global indicator tau. Polynomials are stored in the scaled local variable
xi = (x - x_j)/h of the owning cell, as coefficient triplets (p0, p1, p2).

Periodic runs wrap the interior stencils across the seam, so every cell is
an interior cell; the adaptive-order closure serves domains with physical
boundaries (free flow), whose first/last cells have no outside neighbor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .grid import BoundaryCondition

# Local coordinates of the two-point Gauss rule nodes x_j +/- sqrt(3) h / 6.
XI_GAUSS = np.sqrt(3.0) / 6.0


class CellPosition(enum.Enum):
    INTERIOR = 0
    FIRST = 1
    LAST = 2


@dataclass(frozen=True)
class LinearWeights:
    """Linear (optimal) weights and Z-weight parameters.

    d0/dl/dr weight the interior blend; d_ao and dtilde(h) = max(h, floor)
    weight the boundary blend, whose optimal weight is 1 - d_ao - dtilde.
    epsilon(h) = (h/2)**q regularizes the indicators and p is the Z exponent;
    the half-width scale reproduces the measured weight-convergence rates.
    """

    d0: float = 0.75
    dl: float = 0.125
    dr: float = 0.125
    d_ao: float = 0.25
    dtilde_floor: float = 0.01
    p: int = 2
    q: int = 2

    def __post_init__(self) -> None:
        if min(self.d0, self.dl, self.dr, self.d_ao) <= 0:
            raise ValueError("linear weights must be positive")
        if abs(self.d0 + self.dl + self.dr - 1.0) > 1e-14:
            raise ValueError("interior linear weights must sum to 1")

    def epsilon(self, h: float) -> float:
        return (0.5 * h) ** self.q

    def dtilde(self, h: float) -> float:
        return max(h, self.dtilde_floor)

    def d0_ao(self, h: float) -> float:
        d = 1.0 - self.d_ao - self.dtilde(h)
        if d <= 0:
            raise ValueError(f"boundary optimal weight not positive at h={h}")
        return d


# Maps from stencil averages (s0, s1, s2) to poly coefficients (p0, p1, p2)
# in the owning cell's local variable. Rows are p0, p1, p2.
_C_OPT = {
    CellPosition.INTERIOR: np.array(
        [[-1 / 24, 13 / 12, -1 / 24], [-1 / 2, 0.0, 1 / 2], [1 / 2, -1.0, 1 / 2]]
    ),
    CellPosition.FIRST: np.array(
        [[23 / 24, 1 / 12, -1 / 24], [-3 / 2, 2.0, -1 / 2], [1 / 2, -1.0, 1 / 2]]
    ),
    CellPosition.LAST: np.array(
        [[-1 / 24, 1 / 12, 23 / 24], [1 / 2, -2.0, 3 / 2], [1 / 2, -1.0, 1 / 2]]
    ),
}
# First fallback: {j-1, j} linear poly interior, boundary-pair linear poly else.
_C_SUB1 = {
    CellPosition.INTERIOR: np.array(
        [[0.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]
    ),
    CellPosition.FIRST: np.array([[1.0, 0.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]),
    CellPosition.LAST: np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]]),
}
# Second fallback: {j, j+1} linear poly interior, constant average else.
_C_SUB2 = {
    CellPosition.INTERIOR: np.array(
        [[0.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]]
    ),
    CellPosition.FIRST: np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    CellPosition.LAST: np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
}


def smoothness(coeffs: np.ndarray) -> np.ndarray:
    """Jiang-Shu indicator of polynomials given as (..., 3) coefficients.

    For P = p0 + p1 xi + p2 xi^2 on the unit reference cell the closed form
    is p1^2 + (1/3 + 4) p2^2 = p1^2 + (13/3) p2^2.
    """
    return coeffs[..., 1] ** 2 + (13.0 / 3.0) * coeffs[..., 2] ** 2


def _linear_weight_vector(position: CellPosition, lw: LinearWeights, h: float):
    if position is CellPosition.INTERIOR:
        return lw.d0, lw.dl, lw.dr
    return lw.d0_ao(h), lw.d_ao, lw.dtilde(h)


def _blend(
    stencils: np.ndarray,
    h: float,
    position: CellPosition,
    lw: LinearWeights,
    tau: np.ndarray | None = None,
):
    """Blend the three candidate polynomials of one stencil class.

    stencils: (K, 3, m) averages. Returns (coeffs, weights, tau) with
    coeffs (K, 3, m) of the blended poly, weights (K, 3, m), tau (K, m).
    """
    sub = np.stack(
        [
            np.einsum("ab,kbm->kam", _C_OPT[position], stencils),
            np.einsum("ab,kbm->kam", _C_SUB1[position], stencils),
            np.einsum("ab,kbm->kam", _C_SUB2[position], stencils),
        ],
        axis=1,
    )  # (K, 3 polys, 3 coeffs, m)
    ind = np.stack([smoothness(sub[:, k].swapaxes(1, 2)) for k in range(3)], axis=1)
    if tau is None:
        if position is CellPosition.INTERIOR:
            tau = np.abs(2.0 * ind[:, 0] - ind[:, 1] - ind[:, 2])
        else:
            tau = np.abs(ind[:, 1] - ind[:, 0])
    eps = lw.epsilon(h)
    d = _linear_weight_vector(position, lw, h)
    alpha = np.stack(
        [d[k] * (1.0 + (tau / (ind[:, k] + eps)) ** lw.p) for k in range(3)], axis=1
    )
    weights = alpha / alpha.sum(axis=1, keepdims=True)
    w0 = weights[:, 0][:, None, :]
    coeffs = (w0 / d[0]) * (
        sub[:, 0] - d[1] * sub[:, 1] - d[2] * sub[:, 2]
    ) + weights[:, 1][:, None, :] * sub[:, 1] + weights[:, 2][:, None, :] * sub[:, 2]
    return coeffs, weights, tau


def reconstruct_cell(
    stencil: np.ndarray,
    h: float,
    position: CellPosition = CellPosition.INTERIOR,
    lw: LinearWeights = LinearWeights(),
    tau: np.ndarray | None = None,
):
    """Reconstruct one cell from its (3, m) stencil of averages.

    Returns (coeffs, weights, tau), each with the leading K axis dropped.
    A tau override is how the full-grid path injects the neighbor's global
    indicator into the first/last cell.
    """
    stencil = np.asarray(stencil, dtype=float)
    if stencil.ndim == 1:
        stencil = stencil[:, None]
    if stencil.shape[0] != 3:
        raise ValueError("stencil must hold exactly three cell averages")
    if tau is not None:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))[None, :]
    coeffs, weights, tau_out = _blend(stencil[None], h, position, lw, tau)
    return coeffs[0], weights[0], tau_out[0]


@dataclass
class Reconstruction:
    """Blended polynomials (and their weights) for every cell of a field."""

    coeffs: np.ndarray  # (N, 3, m)
    weights: np.ndarray  # (N, 3, m)
    tau: np.ndarray  # (N, m)
    h: float

    def evaluate(self, xi: float) -> np.ndarray:
        """Point values at local coordinate xi in every cell, shape (N, m)."""
        c = self.coeffs
        return c[:, 0] + xi * c[:, 1] + xi * xi * c[:, 2]


def reconstruct(
    field: np.ndarray,
    h: float,
    lw: LinearWeights = LinearWeights(),
    periodic: bool = False,
) -> Reconstruction:
    """CWENOZ-reconstruct all cells of a (N, m) field of averages.

    Periodic data wraps the interior stencils across the seam. Otherwise
    the first and last cell use the boundary blend; per the no-ghost-cell
    closure their tau is copied from the adjacent interior cell.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    N = field.shape[0]
    if N < 3:
        raise ValueError("reconstruction needs at least three cells")
    if periodic:
        stencils = np.stack(
            [np.roll(field, 1, axis=0), field, np.roll(field, -1, axis=0)], axis=1
        )
        coeffs, weights, tau = _blend(stencils, h, CellPosition.INTERIOR, lw)
        return Reconstruction(coeffs=coeffs, weights=weights, tau=tau, h=h)
    stencils = np.stack([field[:-2], field[1:-1], field[2:]], axis=1)
    coeffs_i, weights_i, tau_i = _blend(stencils, h, CellPosition.INTERIOR, lw)
    cf, wf, tf = _blend(
        field[:3][None], h, CellPosition.FIRST, lw, tau=tau_i[:1]
    )
    cl, wl_, tl = _blend(
        field[-3:][None], h, CellPosition.LAST, lw, tau=tau_i[-1:]
    )
    coeffs = np.concatenate([cf, coeffs_i, cl], axis=0)
    weights = np.concatenate([wf, weights_i, wl_], axis=0)
    tau = np.concatenate([tf, tau_i, tl], axis=0)
    return Reconstruction(coeffs=coeffs, weights=weights, tau=tau, h=h)


def periodic_interior_weights(
    field: np.ndarray, h: float, lw: LinearWeights = LinearWeights()
) -> np.ndarray:
    """Interior-blend nonlinear weights for every cell under periodic wrap.

    Used by the weight-convergence study, where the boundary closure is
    replaced by wrapping so that all N cells carry interior-type weights.
    Returns (N, 3, m) ordered (center, left, right).
    """
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    stencils = np.stack(
        [np.roll(field, 1, axis=0), field, np.roll(field, -1, axis=0)], axis=1
    )
    _, weights, _ = _blend(stencils, h, CellPosition.INTERIOR, lw)
    return weights


@dataclass
class BedSet:
    """Boundary-extrapolated data at the N + 1 interfaces.

    minus[i] is the trace from the left cell, plus[i] from the right cell;
    the outer two entries come from the boundary condition.
    """

    minus: np.ndarray  # (N + 1, m)
    plus: np.ndarray  # (N + 1, m)


def _pack_bed(left_trace: np.ndarray, right_trace: np.ndarray, bc: BoundaryCondition):
    N, m = left_trace.shape
    minus = np.empty((N + 1, m))
    plus = np.empty((N + 1, m))
    minus[1:] = right_trace
    plus[:N] = left_trace
    if bc is BoundaryCondition.PERIODIC:
        minus[0] = right_trace[-1]
        plus[N] = left_trace[0]
    else:
        minus[0] = left_trace[0]
        plus[N] = right_trace[-1]
    return BedSet(minus=minus, plus=plus)


def compute_bed(
    field: np.ndarray,
    h: float,
    bc: BoundaryCondition,
    lw: LinearWeights = LinearWeights(),
) -> BedSet:
    """Interface traces from fresh (nonlinear-weight) reconstructions."""
    recon = reconstruct(field, h, lw, periodic=bc is BoundaryCondition.PERIODIC)
    return _pack_bed(recon.evaluate(-0.5), recon.evaluate(0.5), bc)


def _mu(position: CellPosition, xi: float) -> np.ndarray:
    """Per-candidate stencil coefficient rows (3 polys, 3 cells) at xi."""
    e = np.array([1.0, xi, xi * xi])
    return np.stack(
        [
            e @ _C_OPT[position],
            e @ _C_SUB1[position],
            e @ _C_SUB2[position],
        ]
    )


@dataclass
class FrozenWeights:
    """Affine trace operators obtained by freezing the nonlinear weights.

    left[j]/right[j] hold, per component, the three stencil coefficients of
    the trace at cell j's left/right edge; base[j] is the first stencil cell
    (j - 1 interior, shifted one cell inward at a physical boundary). With
    wrap set, base + offsets index modulo N (periodic stencils). Each
    triplet sums to 1, so the linearized traces are exact on constants.
    """

    left: np.ndarray  # (N, 3, m)
    right: np.ndarray  # (N, 3, m)
    base: np.ndarray  # (N,) int
    wrap: bool = False

    @property
    def n_cells(self) -> int:
        return self.left.shape[0]

    def stencil_cells(self) -> np.ndarray:
        """(N, 3) cell indices feeding each cell's traces."""
        idx = self.base[:, None] + np.arange(3)[None, :]
        return idx % self.n_cells if self.wrap else idx


def _edge_coeffs(
    weights: np.ndarray, position: CellPosition, xi: float, lw: LinearWeights, h: float
) -> np.ndarray:
    """Unroll the blend at xi into stencil coefficients, (K, 3 cells, m)."""
    mu = _mu(position, xi)
    d = _linear_weight_vector(position, lw, h)
    w0 = weights[:, 0][:, None, :]
    return (
        (w0 / d[0]) * (mu[0] - d[1] * mu[1] - d[2] * mu[2])[None, :, None]
        + weights[:, 1][:, None, :] * mu[1][None, :, None]
        + weights[:, 2][:, None, :] * mu[2][None, :, None]
    )


def freeze_weights(
    field: np.ndarray,
    h: float,
    lw: LinearWeights = LinearWeights(),
    periodic: bool = False,
) -> FrozenWeights:
    """Reconstruct `field` and freeze its weights into affine trace operators."""
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    N = field.shape[0]
    recon = reconstruct(field, h, lw, periodic=periodic)
    left = np.empty_like(recon.weights)
    right = np.empty_like(recon.weights)
    if periodic:
        for xi, out in ((-0.5, left), (0.5, right)):
            out[:] = _edge_coeffs(recon.weights, CellPosition.INTERIOR, xi, lw, h)
        return FrozenWeights(
            left=left, right=right, base=np.arange(N) - 1, wrap=True
        )
    for xi, out in ((-0.5, left), (0.5, right)):
        out[1:-1] = _edge_coeffs(
            recon.weights[1:-1], CellPosition.INTERIOR, xi, lw, h
        )
        out[:1] = _edge_coeffs(recon.weights[:1], CellPosition.FIRST, xi, lw, h)
        out[-1:] = _edge_coeffs(recon.weights[-1:], CellPosition.LAST, xi, lw, h)
    base = np.clip(np.arange(N) - 1, 0, N - 3)
    return FrozenWeights(left=left, right=right, base=base)


def linearized_bed(
    field: np.ndarray, fw: FrozenWeights, bc: BoundaryCondition
) -> BedSet:
    """Interface traces of `field` through the frozen affine operators."""
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    gathered = field[fw.stencil_cells()]  # (N, 3, m)
    left_trace = np.einsum("jam,jam->jm", fw.left, gathered)
    right_trace = np.einsum("jam,jam->jm", fw.right, gathered)
    return _pack_bed(left_trace, right_trace, bc)
