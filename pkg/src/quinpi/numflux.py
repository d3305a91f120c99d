"""Rusanov interface flux, its approximate Jacobians, numerical entropy flux."""

from __future__ import annotations

import enum

import numpy as np

from .models import ConservationLaw


class ViscosityPolicy(enum.Enum):
    """How the Rusanov viscosity alpha is chosen per interface.

    SPECTRAL uses the larger spectral radius of the two flux Jacobians (the
    classical choice, mandatory for explicit schemes). MATERIAL_SPEED uses
    the larger |fluid velocity| of the two states, which keeps the implicit
    scheme's dissipation on material waves only; Euler-family models only.
    """

    SPECTRAL = "spectral"
    MATERIAL_SPEED = "material-speed"


def local_viscosity(
    v: np.ndarray, w: np.ndarray, law: ConservationLaw, policy: ViscosityPolicy
) -> np.ndarray:
    if policy is ViscosityPolicy.SPECTRAL:
        return np.maximum(law.max_abs_eigenvalue(v), law.max_abs_eigenvalue(w))
    if not hasattr(law, "velocity"):
        raise ValueError(f"{law.name} has no material speed; use SPECTRAL")
    return np.maximum(np.abs(law.velocity(v)), np.abs(law.velocity(w)))


def rusanov(
    v: np.ndarray,
    w: np.ndarray,
    law: ConservationLaw,
    policy: ViscosityPolicy,
    alpha: np.ndarray | None = None,
):
    """F(v, w) = (f(v) + f(w) - alpha (w - v)) / 2 at each interface.

    Returns (flux, alpha); pass alpha to reuse precomputed viscosities.
    """
    if alpha is None:
        alpha = local_viscosity(v, w, law, policy)
    flux = 0.5 * (law.flux(v) + law.flux(w) - alpha[:, None] * (w - v))
    return flux, alpha


def rusanov_jacobians(
    v: np.ndarray, w: np.ndarray, law: ConservationLaw, alpha: np.ndarray
):
    """dF/dv and dF/dw with alpha frozen (approximate Newton linearization)."""
    eye = np.eye(law.m)
    a = alpha[:, None, None] * eye[None, :, :]
    return (
        0.5 * (law.flux_jacobian(v) + a),
        0.5 * (law.flux_jacobian(w) - a),
    )


def numerical_entropy_flux(
    v: np.ndarray, w: np.ndarray, law: ConservationLaw, alpha: np.ndarray
) -> np.ndarray:
    """Rusanov-form numerical entropy flux, consistent with psi on v = w."""
    return 0.5 * (
        law.entropy_flux(v) + law.entropy_flux(w) - alpha * (law.entropy(w) - law.entropy(v))
    )
