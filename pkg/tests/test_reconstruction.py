"""Reconstruction operator: candidate coefficients against a symbolic oracle,
the oscillation indicator, weight behaviour in the smooth limit, boundary
blending, and the frozen-weight affine trace identity."""

import numpy as np
import pytest
import sympy as sp

from quinpi.grid import BoundaryCondition, Grid1D, project_initial_condition
from quinpi.reconstruction import (
    _C_OPT,
    _C_SUB1,
    _C_SUB2,
    XI_GAUSS,
    CellPosition,
    LinearWeights,
    compute_bed,
    freeze_weights,
    linearized_bed,
    periodic_interior_weights,
    reconstruct,
    reconstruct_cell,
    smoothness,
)

# stencil cell offsets (in own-cell widths) and the own-cell stencil index
POSITIONS = {
    CellPosition.INTERIOR: ((-1, 0, 1), 1),
    CellPosition.FIRST: ((0, 1, 2), 0),
    CellPosition.LAST: ((-2, -1, 0), 2),
}


def _coeff_map(constraints, degree):
    """Coefficient rows (p0, p1, p2) of the polynomial in the local variable
    fixed by prescribed cell averages.

    constraints: (offset, stencil index) pairs; the polynomial must average
    to stencil entry `index` over [offset - 1/2, offset + 1/2]. Solved
    symbolically, returned as the 3x3 map from stencil to coefficients.
    """
    s = sp.symbols("s0 s1 s2")
    xi = sp.Symbol("xi")
    p = sp.symbols("p0 p1 p2")[: degree + 1]
    poly = sum(pk * xi**k for k, pk in enumerate(p))
    eqs = [
        sp.Eq(
            sp.integrate(
                poly, (xi, sp.Rational(2 * o - 1, 2), sp.Rational(2 * o + 1, 2))
            ),
            s[idx],
        )
        for o, idx in constraints
    ]
    sol = sp.solve(eqs, p)
    out = np.zeros((3, 3))
    for row, pk in enumerate(p):
        expr = sp.expand(sol[pk])
        for col in range(3):
            out[row, col] = float(expr.coeff(s[col]))
    return out


@pytest.mark.parametrize("position", list(POSITIONS))
def test_optimal_coefficients_solve_the_quadratic_average_problem(position):
    offsets, _ = POSITIONS[position]
    oracle = _coeff_map([(o, k) for k, o in enumerate(offsets)], degree=2)
    np.testing.assert_allclose(_C_OPT[position], oracle, rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "position, constraints",
    [
        (CellPosition.INTERIOR, [(-1, 0), (0, 1)]),
        (CellPosition.FIRST, [(0, 0), (1, 1)]),
        (CellPosition.LAST, [(-1, 1), (0, 2)]),
    ],
)
def test_first_fallback_is_the_inward_linear_fit(position, constraints):
    oracle = _coeff_map(constraints, degree=1)
    np.testing.assert_allclose(_C_SUB1[position], oracle, rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "position, constraints",
    [
        (CellPosition.INTERIOR, [(0, 1), (1, 2)]),
        (CellPosition.FIRST, [(0, 0)]),
        (CellPosition.LAST, [(0, 2)]),
    ],
)
def test_second_fallback_linear_inside_constant_at_the_boundary(
    position, constraints
):
    oracle = _coeff_map(constraints, degree=len(constraints) - 1)
    np.testing.assert_allclose(_C_SUB2[position], oracle, rtol=0, atol=1e-15)


def test_smoothness_is_the_scaled_derivative_integral():
    # indicator = sum_l integral over the cell of h^(2l-1) (d^l P/dx^l)^2
    p0, p1, p2, h, x = sp.symbols("p0 p1 p2 h x", real=True, positive=True)
    P = p0 + p1 * (x / h) + p2 * (x / h) ** 2
    ind = sum(
        h ** (2 * l - 1) * sp.integrate(sp.diff(P, x, l) ** 2, (x, -h / 2, h / 2))
        for l in (1, 2)
    )
    assert sp.simplify(ind - (p1**2 + sp.Rational(13, 3) * p2**2)) == 0

    rng = np.random.default_rng(0)
    c = rng.normal(size=(6, 3))
    np.testing.assert_allclose(
        smoothness(c), c[:, 1] ** 2 + (13.0 / 3.0) * c[:, 2] ** 2, rtol=1e-15
    )


def test_gauss_node_integrates_cubics_on_the_reference_cell():
    assert XI_GAUSS == pytest.approx(np.sqrt(3.0) / 6.0, abs=1e-16)
    xi = sp.Symbol("xi")
    node = sp.sqrt(3) / 6
    for k in range(4):
        exact = sp.integrate(xi**k, (xi, -sp.Rational(1, 2), sp.Rational(1, 2)))
        two_point = ((-node) ** k + node**k) / 2
        assert sp.simplify(exact - two_point) == 0


def test_linear_weight_defaults_and_guards():
    lw = LinearWeights()
    assert (lw.d0, lw.dl, lw.dr) == (0.75, 0.125, 0.125)
    assert lw.epsilon(0.2) == pytest.approx(0.01)
    assert lw.dtilde(0.5) == 0.5
    assert lw.dtilde(0.001) == 0.01
    assert lw.d0_ao(0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError, match="boundary optimal weight"):
        lw.d0_ao(0.75)
    with pytest.raises(ValueError):
        LinearWeights(d0=0.5, dl=0.1, dr=0.1)


def test_periodic_wrap_has_no_boundary_blend_at_coarse_h():
    field = np.sin(np.arange(5.0))
    with pytest.raises(ValueError, match="boundary optimal weight"):
        reconstruct(field, 0.8)
    reconstruct(field, 0.8, periodic=True)  # wrap stays well posed at any h


def test_reconstruct_input_validation():
    with pytest.raises(ValueError):
        reconstruct(np.ones(2), 0.1)
    with pytest.raises(ValueError):
        reconstruct_cell(np.ones(4), 0.1)


def test_constant_data_recovers_linear_weights():
    lw = LinearWeights()
    h = 0.05
    field = np.full(12, 0.7)
    rec = reconstruct(field, h, periodic=True)
    np.testing.assert_allclose(
        rec.weights[:, :, 0], np.tile([lw.d0, lw.dl, lw.dr], (12, 1)), atol=1e-15
    )
    np.testing.assert_allclose(rec.tau, 0.0, atol=1e-30)
    rec = reconstruct(field, h)
    np.testing.assert_allclose(
        rec.weights[0, :, 0], [lw.d0_ao(h), lw.d_ao, lw.dtilde(h)], atol=1e-15
    )
    np.testing.assert_allclose(
        rec.weights[-1, :, 0], [lw.d0_ao(h), lw.d_ao, lw.dtilde(h)], atol=1e-15
    )


@pytest.mark.parametrize("position", list(POSITIONS))
def test_quadratic_stencil_exact_in_the_smooth_limit(position):
    # with the indicator contrast forced to zero the weights equal the linear
    # weights and the blend collapses to the optimal quadratic: exact traces
    offsets, _ = POSITIONS[position]
    a, b, c = 0.8, -1.4, 2.3
    off = np.array(offsets, dtype=float)
    stencil = a + b * off + c * (off**2 + 1.0 / 12.0)
    coeffs, weights, _ = reconstruct_cell(stencil, 0.3, position, tau=np.zeros(1))
    lw = LinearWeights()
    if position is CellPosition.INTERIOR:
        d = (lw.d0, lw.dl, lw.dr)
    else:
        d = (lw.d0_ao(0.3), lw.d_ao, lw.dtilde(0.3))
    np.testing.assert_allclose(weights[:, 0], d, rtol=0, atol=1e-15)
    for xi in (-0.5, 0.5, 0.25):
        value = coeffs[0, 0] + coeffs[1, 0] * xi + coeffs[2, 0] * xi**2
        assert value == pytest.approx(a + b * xi + c * xi**2, abs=1e-13)


def test_blend_preserves_the_own_cell_average():
    rng = np.random.default_rng(1)
    field = np.where(np.arange(20) < 10, 1.0, -0.5) + 0.1 * rng.normal(size=20)
    for periodic in (True, False):
        rec = reconstruct(field, 0.1, periodic=periodic)
        own_average = rec.coeffs[:, 0, 0] + rec.coeffs[:, 2, 0] / 12.0
        np.testing.assert_allclose(own_average, field, rtol=0, atol=1e-14)
        np.testing.assert_allclose(rec.weights.sum(axis=1), 1.0, atol=1e-14)


def test_periodic_reconstruction_wraps_interior_stencils():
    rng = np.random.default_rng(2)
    field = rng.normal(size=9)
    h = 0.2
    rec = reconstruct(field, h, periodic=True)
    for j in (0, 4, 8):
        stencil = field[[(j - 1) % 9, j, (j + 1) % 9]]
        coeffs, weights, _ = reconstruct_cell(stencil, h, CellPosition.INTERIOR)
        np.testing.assert_allclose(rec.coeffs[j, :, 0], coeffs[:, 0], atol=1e-15)
        np.testing.assert_allclose(rec.weights[j, :, 0], weights[:, 0], atol=1e-15)


def test_periodic_interior_weights_match_the_full_reconstruction():
    rng = np.random.default_rng(4)
    field = rng.normal(size=(14, 2))
    w = periodic_interior_weights(field, 0.07)
    rec = reconstruct(field, 0.07, periodic=True)
    assert w.shape == (14, 3, 2)
    np.testing.assert_allclose(w, rec.weights, atol=1e-15)


def test_stencil_cells_wrap_and_clamp():
    field = np.arange(6.0)
    cells = freeze_weights(field, 0.1, periodic=True).stencil_cells()
    assert cells.shape == (6, 3)
    np.testing.assert_array_equal(cells[0], [5, 0, 1])
    np.testing.assert_array_equal(cells[-1], [4, 5, 0])
    cells = freeze_weights(field, 0.1).stencil_cells()
    np.testing.assert_array_equal(cells[0], [0, 1, 2])
    np.testing.assert_array_equal(cells[1], [0, 1, 2])
    np.testing.assert_array_equal(cells[-1], [3, 4, 5])
    np.testing.assert_array_equal(cells[-2], [3, 4, 5])


@pytest.mark.parametrize("probe", ["constant", "linear"])
def test_frozen_trace_triplets_at_the_linear_weights(probe):
    # data whose indicator contrast vanishes freezes the classic third-order
    # trace coefficients: right (-1/6, 5/6, 1/3), left (1/3, 5/6, -1/6)
    n = 10
    h = 0.1
    if probe == "constant":
        field = np.full(n, 2.5)
    else:
        field = 0.3 + 1.7 * h * np.arange(n)
    fw = freeze_weights(field, h, periodic=True)
    np.testing.assert_allclose(
        fw.right[:, :, 0],
        np.tile([-1.0 / 6.0, 5.0 / 6.0, 1.0 / 3.0], (n, 1)),
        rtol=0,
        atol=1e-14,
    )
    np.testing.assert_allclose(
        fw.left[:, :, 0],
        np.tile([1.0 / 3.0, 5.0 / 6.0, -1.0 / 6.0], (n, 1)),
        rtol=0,
        atol=1e-14,
    )
    # triplets always sum to one: the affine traces are exact on constants
    np.testing.assert_allclose(fw.left.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(fw.right.sum(axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize(
    "bc", [BoundaryCondition.PERIODIC, BoundaryCondition.FREE_FLOW]
)
def test_frozen_bed_matches_direct_bed_on_the_freezing_state(bc):
    # freezing the weights of a state and applying the affine operators to
    # that same state must reproduce the nonlinear traces
    g = Grid1D(-1.0, 1.0, 64)

    def f(x):
        x = np.asarray(x)
        smooth = np.sin(np.pi * x) + 0.2 * np.cos(3 * np.pi * x)
        rough = np.where(x < 0.25, 1.0, -0.5)
        return np.stack([smooth, rough], axis=-1)

    field = project_initial_condition(f, g, 2)
    direct = compute_bed(field, g.h, bc)
    fw = freeze_weights(field, g.h, periodic=bc is BoundaryCondition.PERIODIC)
    frozen = linearized_bed(field, fw, bc)
    np.testing.assert_allclose(frozen.minus, direct.minus, rtol=0, atol=1e-14)
    np.testing.assert_allclose(frozen.plus, direct.plus, rtol=0, atol=1e-14)


@pytest.mark.parametrize(
    "bc", [BoundaryCondition.PERIODIC, BoundaryCondition.FREE_FLOW]
)
def test_bed_packing_and_boundary_closure(bc):
    g = Grid1D(0.0, 1.0, 16)
    field = project_initial_condition(lambda x: np.cos(2 * np.pi * np.asarray(x)), g, 1)
    bed = compute_bed(field, g.h, bc)
    rec = reconstruct(
        field, g.h, periodic=bc is BoundaryCondition.PERIODIC
    )
    left, right = rec.evaluate(-0.5), rec.evaluate(0.5)
    np.testing.assert_array_equal(bed.minus[1:], right)
    np.testing.assert_array_equal(bed.plus[:-1], left)
    if bc is BoundaryCondition.PERIODIC:
        np.testing.assert_array_equal(bed.minus[0], right[-1])
        np.testing.assert_array_equal(bed.plus[-1], left[0])
    else:
        np.testing.assert_array_equal(bed.minus[0], left[0])
        np.testing.assert_array_equal(bed.plus[-1], right[-1])


def test_first_and_last_cells_borrow_the_neighbor_indicator_contrast():
    # the no-ghost boundary blend reuses the adjacent interior cell's
    # indicator contrast instead of forming one from boundary candidates
    rng = np.random.default_rng(5)
    field = rng.normal(size=8)
    rec = reconstruct(field, 0.1)
    assert rec.tau[0, 0] == rec.tau[1, 0]
    assert rec.tau[-1, 0] == rec.tau[-2, 0]
