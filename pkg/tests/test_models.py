"""Conservation laws: fluxes, Jacobians, entropy pairs, admissibility
guards, the exact Euler Riemann solution, and the characteristic-tracing
reference solution for the scalar quadratic flux."""

import numpy as np
import pytest
from scipy.optimize import brentq

from quinpi.models import (
    AdmissibilityError,
    Burgers,
    EulerModel,
    EulerState,
    LinearAdvection,
    RiemannFan,
    burgers_characteristic_solution,
    conserved_to_primitive,
    entropy_compatibility_residual,
    exact_riemann_euler,
    primitive_to_conserved,
)

GAMMA = 1.4


def fd_jacobian(law, u, delta=1e-7):
    """Central-difference flux Jacobian at each state of a (K, m) array."""
    u = np.atleast_2d(u)
    K, m = u.shape
    J = np.empty((K, m, m))
    for b in range(m):
        e = np.zeros(m)
        e[b] = delta
        J[:, :, b] = (law.flux(u + e) - law.flux(u - e)) / (2 * delta)
    return J


def test_advection_model():
    law = LinearAdvection(2.0)
    u = np.array([[0.3], [-1.2], [4.0]])
    np.testing.assert_allclose(law.flux(u), 2.0 * u)
    np.testing.assert_allclose(law.flux_jacobian(u), np.full((3, 1, 1), 2.0))
    np.testing.assert_allclose(law.max_abs_eigenvalue(u), 2.0)
    np.testing.assert_allclose(law.entropy(u), 0.5 * u[:, 0] ** 2)
    np.testing.assert_allclose(law.entropy_flux(u), u[:, 0] ** 2)
    assert entropy_compatibility_residual(law, u) < 1e-9


def test_burgers_model():
    law = Burgers()
    u = np.array([[0.5], [-2.0], [1.5]])
    np.testing.assert_allclose(law.flux(u), 0.5 * u**2)
    np.testing.assert_allclose(law.flux_jacobian(u)[:, 0, 0], u[:, 0])
    np.testing.assert_allclose(law.max_abs_eigenvalue(u), np.abs(u[:, 0]))
    np.testing.assert_allclose(law.entropy_flux(u), u[:, 0] ** 3 / 3.0)
    assert entropy_compatibility_residual(law, u) < 1e-9


@pytest.mark.parametrize("eps", [1.0, 0.3])
def test_euler_flux_jacobian_matches_finite_differences(eps):
    law = EulerModel(eps=eps)
    w = np.array([[1.0, 0.4, 1.2], [0.7, -0.9, 2.0], [2.2, 0.0, 0.5]])
    u = primitive_to_conserved(w, law)
    J = law.flux_jacobian(u)
    assert J.shape == (3, 3, 3)
    np.testing.assert_allclose(J, fd_jacobian(law, u), rtol=0, atol=2e-6)


@pytest.mark.parametrize("eps", [1.0, 0.3])
def test_euler_entropy_pair(eps):
    law = EulerModel(eps=eps)
    w = np.array([[1.0, 0.4, 1.2], [0.7, -0.9, 2.0], [2.2, 0.0, 0.5]])
    u = primitive_to_conserved(w, law)
    # gradient against finite differences of the entropy itself
    grad = law.entropy_gradient(u)
    delta = 1e-7
    for b in range(3):
        e = np.zeros(3)
        e[b] = delta
        fd = (law.entropy(u + e) - law.entropy(u - e)) / (2 * delta)
        np.testing.assert_allclose(grad[:, b], fd, rtol=0, atol=2e-6)
    # compatibility grad(eta) . f'(u) == grad(psi)
    assert entropy_compatibility_residual(law, u) < 1e-6


def test_euler_eigenvalue_scaling_with_the_acoustic_parameter():
    w = np.array([[1.0, 0.5, 1.0]])
    for eps in (1.0, 0.5, 0.1):
        law = EulerModel(eps=eps)
        u = primitive_to_conserved(w, law)
        c = np.sqrt(GAMMA * 1.0 / 1.0)
        assert law.max_abs_eigenvalue(u)[0] == pytest.approx(0.5 + c / eps)


def test_euler_admissibility_guards():
    law = EulerModel()
    with pytest.raises(AdmissibilityError):
        law.validate(np.array([[-1.0, 0.0, 1.0]]))
    with pytest.raises(AdmissibilityError):
        law.validate(np.array([[1.0, 0.0, -1.0]]))  # negative internal energy
    with pytest.raises(AdmissibilityError):
        law.max_abs_eigenvalue(np.array([[1.0, 0.0, -1.0]]))
    with pytest.raises(AdmissibilityError):
        law.validate(np.array([[np.nan, 0.0, 1.0]]))


def test_euler_entropy_is_nan_safe_on_inadmissible_states():
    # diagnostics must receive NaN rather than an exception there
    law = EulerModel()
    bad = np.array([[1.0, 0.0, -1.0], [-0.5, 0.0, 1.0]])
    with np.errstate(all="raise"):
        eta = law.entropy(bad)
    assert np.isnan(eta).all()


def test_euler_state_round_trip():
    law = EulerModel(eps=0.7)
    s = EulerState(1.3, -0.4, 2.1)
    u = s.to_conserved(law)
    back = EulerState.from_conserved(u, law)
    assert back.rho == pytest.approx(1.3)
    assert back.v == pytest.approx(-0.4)
    assert back.p == pytest.approx(2.1)
    with pytest.raises(AdmissibilityError):
        EulerState(-1.0, 0.0, 1.0)
    with pytest.raises(AdmissibilityError):
        EulerState(1.0, 0.0, 0.0)


def test_primitive_conserved_round_trip_vectorized():
    law = EulerModel()
    w = np.array([[1.0, 0.4, 1.2], [0.7, -0.9, 2.0]])
    np.testing.assert_allclose(
        conserved_to_primitive(primitive_to_conserved(w, law), law), w, atol=1e-14
    )


def test_riemann_star_state_on_the_classic_shock_tube():
    # left (1, 0, 1) / right (0.125, 0, 0.1): textbook star values
    fan = RiemannFan(EulerState(1.0, 0.0, 1.0), EulerState(0.125, 0.0, 0.1))
    assert fan.p_star == pytest.approx(0.30313, abs=1e-5)
    assert fan.v_star == pytest.approx(0.92745, abs=1e-5)
    assert fan.rho_star_l == pytest.approx(0.42632, abs=1e-5)
    assert fan.rho_star_r == pytest.approx(0.26557, abs=1e-5)


def test_riemann_wave_speeds_on_the_classic_shock_tube():
    left = EulerState(1.0, 0.0, 1.0)
    right = EulerState(0.125, 0.0, 0.1)
    fan = RiemannFan(left, right)
    ws = fan.wave_speeds()
    assert ws["contact"] == pytest.approx(fan.v_star)
    # left rarefaction: head at u_L - c_L, tail at v* - c*_L
    c_l = np.sqrt(GAMMA * left.p / left.rho)
    c_star_l = np.sqrt(GAMMA * fan.p_star / fan.rho_star_l)
    head, tail = ws["left"]
    assert head == pytest.approx(-c_l, abs=1e-12)
    assert tail == pytest.approx(fan.v_star - c_star_l, abs=1e-12)
    # right shock: Rankine-Hugoniot speed from the solved star pressure
    g = GAMMA
    c_r = np.sqrt(g * right.p / right.rho)
    s_shock = right.v + c_r * np.sqrt(
        (g + 1) / (2 * g) * fan.p_star / right.p + (g - 1) / (2 * g)
    )
    assert ws["right"] == pytest.approx(s_shock, abs=1e-12)
    assert s_shock == pytest.approx(1.75216, abs=1e-4)


def test_riemann_sampling_hits_every_region():
    left = EulerState(1.0, 0.0, 1.0)
    right = EulerState(0.125, 0.0, 0.1)
    fan = exact_riemann_euler(left, right)
    xi = np.array([-5.0, -0.6, 0.5, 1.2, 5.0])
    w = fan.sample(xi)
    assert w.shape == (5, 3)
    np.testing.assert_allclose(w[0], [1.0, 0.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(w[4], [0.125, 0.0, 0.1], atol=1e-14)
    np.testing.assert_allclose(
        w[2], [fan.rho_star_l, fan.v_star, fan.p_star], atol=1e-12
    )
    np.testing.assert_allclose(
        w[3], [fan.rho_star_r, fan.v_star, fan.p_star], atol=1e-12
    )
    # inside the left rarefaction: the standard similarity solution
    g = GAMMA
    c_l = np.sqrt(g * left.p / left.rho)
    s = -0.6
    v = 2.0 / (g + 1) * (c_l + (g - 1) / 2 * left.v + s)
    c = c_l - (g - 1) / 2 * (v - left.v)
    rho = left.rho * (c / c_l) ** (2.0 / (g - 1))
    p = left.p * (c / c_l) ** (2.0 * g / (g - 1))
    np.testing.assert_allclose(w[1], [rho, v, p], atol=1e-12)


def test_riemann_vacuum_guard():
    with pytest.raises(AdmissibilityError):
        RiemannFan(EulerState(1.0, -20.0, 1.0), EulerState(1.0, 20.0, 1.0))


def test_characteristic_solution_linear_profile():
    # u0(x) = x gives u(x, t) = x / (1 + t) exactly
    x = np.linspace(-2.0, 2.0, 41)
    u = burgers_characteristic_solution(lambda y: y, lambda y: np.ones_like(y), x, 0.7)
    np.testing.assert_allclose(u, x / 1.7, rtol=0, atol=1e-12)


def test_characteristic_solution_matches_bracketed_root():
    u0 = lambda y: 0.5 + 0.3 * np.sin(y)
    u0p = lambda y: 0.3 * np.cos(y)
    x = np.linspace(0.0, 2 * np.pi, 17)
    t = 1.0  # well before characteristics cross at t = 1/0.3
    u = burgers_characteristic_solution(u0, u0p, x, t)
    for xi, ui in zip(x, u):
        root = brentq(lambda v: v - u0(xi - v * t), 0.1, 0.9, xtol=1e-14)
        assert ui == pytest.approx(root, abs=1e-10)
