"""Interface flux: consistency, upwind viscosity policies, the frozen-speed
Jacobian pair, and the matching interface entropy flux."""

import numpy as np
import pytest

from quinpi.models import Burgers, EulerModel, LinearAdvection, primitive_to_conserved
from quinpi.numflux import (
    ViscosityPolicy,
    local_viscosity,
    numerical_entropy_flux,
    rusanov,
    rusanov_jacobians,
)


def euler_states():
    law = EulerModel()
    w = np.array([[1.0, 0.4, 1.2], [0.7, -0.9, 2.0], [2.2, 0.1, 0.5]])
    return law, primitive_to_conserved(w, law)


def test_flux_is_consistent():
    # F(u, u) = f(u) for any viscosity because the jump term vanishes
    law, u = euler_states()
    for policy in ViscosityPolicy:
        F, alpha = rusanov(u, u, law, policy)
        np.testing.assert_allclose(F, law.flux(u), rtol=0, atol=1e-14)
        assert alpha.shape == (3,)


def test_viscosity_policies():
    law, u = euler_states()
    v, w = u[:-1], u[1:]
    spectral = local_viscosity(v, w, law, ViscosityPolicy.SPECTRAL)
    material = local_viscosity(v, w, law, ViscosityPolicy.MATERIAL_SPEED)
    np.testing.assert_allclose(
        spectral,
        np.maximum(law.max_abs_eigenvalue(v), law.max_abs_eigenvalue(w)),
    )
    np.testing.assert_allclose(
        material, np.maximum(np.abs(law.velocity(v)), np.abs(law.velocity(w)))
    )
    # the material speed is strictly slower than the acoustic one here
    assert np.all(material < spectral)


def test_material_speed_needs_a_velocity():
    law = Burgers()
    u = np.array([[0.5], [1.0]])
    with pytest.raises(ValueError):
        local_viscosity(u, u, law, ViscosityPolicy.MATERIAL_SPEED)
    # spectral works for any law
    np.testing.assert_allclose(
        local_viscosity(u, u, law, ViscosityPolicy.SPECTRAL), [0.5, 1.0]
    )


def test_flux_formula_against_direct_evaluation():
    law = LinearAdvection(1.5)
    v = np.array([[1.0], [2.0]])
    w = np.array([[3.0], [-1.0]])
    F, alpha = rusanov(v, w, law, ViscosityPolicy.SPECTRAL)
    np.testing.assert_allclose(alpha, 1.5)
    np.testing.assert_allclose(F, 0.5 * (1.5 * v + 1.5 * w - 1.5 * (w - v)))


def test_frozen_speed_jacobians():
    # with alpha held fixed, dF/dv = (f'(v) + alpha I)/2, dF/dw = (f'(w) - alpha I)/2
    law, u = euler_states()
    v, w = u[:-1], u[1:]
    _, alpha = rusanov(v, w, law, ViscosityPolicy.MATERIAL_SPEED)
    dFdv, dFdw = rusanov_jacobians(v, w, law, alpha)
    eye = np.eye(3)[None]
    np.testing.assert_allclose(
        dFdv, 0.5 * (law.flux_jacobian(v) + alpha[:, None, None] * eye), atol=1e-14
    )
    np.testing.assert_allclose(
        dFdw, 0.5 * (law.flux_jacobian(w) - alpha[:, None, None] * eye), atol=1e-14
    )
    # frozen-alpha finite-difference cross-check on the flux itself
    delta = 1e-7
    for b in range(3):
        e = np.zeros(3)
        e[b] = delta
        fd = (
            0.5 * (law.flux(v + e) + law.flux(w) - alpha[:, None] * (w - v - e))
            - 0.5 * (law.flux(v - e) + law.flux(w) - alpha[:, None] * (w - v + e))
        ) / (2 * delta)
        np.testing.assert_allclose(dFdv[:, :, b], fd, rtol=0, atol=2e-6)


def test_interface_entropy_flux_is_consistent():
    law, u = euler_states()
    _, alpha = rusanov(u, u, law, ViscosityPolicy.SPECTRAL)
    psi = numerical_entropy_flux(u, u, law, alpha)
    np.testing.assert_allclose(psi, law.entropy_flux(u), rtol=0, atol=1e-14)
    # and carries the same dissipation structure as the flux
    v, w = u[:-1], u[1:]
    _, alpha = rusanov(v, w, law, ViscosityPolicy.SPECTRAL)
    psi = numerical_entropy_flux(v, w, law, alpha)
    expected = 0.5 * (
        law.entropy_flux(v)
        + law.entropy_flux(w)
        - alpha * (law.entropy(w) - law.entropy(v))
    )
    np.testing.assert_allclose(psi, expected, rtol=0, atol=1e-14)
