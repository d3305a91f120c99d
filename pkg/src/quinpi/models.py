"""Conservation laws: scalar advection, Burgers, and gamma-law Euler.

All laws are vectorized over states: u has shape (K, m), fluxes (K, m),
Jacobians (K, m, m), scalar diagnostics (K,). The Euler model carries the
low-Mach rescaling parameter eps; eps = 1 is the standard system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AdmissibilityError(ValueError):
    """A state left the physically admissible set (rho > 0, p > 0)."""


def _as_states(u: np.ndarray, m: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None] if m == 1 else u[None, :]
    if u.shape[-1] != m:
        raise ValueError(f"state vectors must have {m} components")
    return u


class ConservationLaw:
    """Interface shared by all models; subclasses fill in the physics."""

    m: int = 1
    name: str = "law"

    def flux(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flux_jacobian(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def max_abs_eigenvalue(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy_flux(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy_gradient(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def validate(self, u: np.ndarray) -> None:
        if not np.all(np.isfinite(u)):
            raise AdmissibilityError(f"{self.name}: non-finite state")


class LinearAdvection(ConservationLaw):
    """u_t + a u_x = 0 with the square entropy pair."""

    m = 1
    name = "advection"

    def __init__(self, speed: float = 1.0):
        self.speed = speed

    def flux(self, u):
        u = _as_states(u, 1)
        return self.speed * u

    def flux_jacobian(self, u):
        u = _as_states(u, 1)
        return np.full((u.shape[0], 1, 1), self.speed)

    def max_abs_eigenvalue(self, u):
        u = _as_states(u, 1)
        return np.full(u.shape[0], abs(self.speed))

    def entropy(self, u):
        u = _as_states(u, 1)
        return 0.5 * u[:, 0] ** 2

    def entropy_flux(self, u):
        u = _as_states(u, 1)
        return 0.5 * self.speed * u[:, 0] ** 2

    def entropy_gradient(self, u):
        return _as_states(u, 1).copy()


class Burgers(ConservationLaw):
    """u_t + (u^2/2)_x = 0 with eta = u^2/2, psi = u^3/3."""

    m = 1
    name = "burgers"

    def flux(self, u):
        u = _as_states(u, 1)
        return 0.5 * u**2

    def flux_jacobian(self, u):
        u = _as_states(u, 1)
        return u[:, :, None].copy()

    def max_abs_eigenvalue(self, u):
        u = _as_states(u, 1)
        return np.abs(u[:, 0])

    def entropy(self, u):
        u = _as_states(u, 1)
        return 0.5 * u[:, 0] ** 2

    def entropy_flux(self, u):
        u = _as_states(u, 1)
        return u[:, 0] ** 3 / 3.0

    def entropy_gradient(self, u):
        return _as_states(u, 1).copy()


class EulerModel(ConservationLaw):
    """Gamma-law Euler in conserved variables (rho, rho v, E).

    With the rescaling parameter eps the EOS is
    E = p/(gamma - 1) + (eps^2/2) rho v^2 and the flux is
    (rho v, rho v^2 + p/eps^2, v (E + p)); eigenvalues are v, v +/- c/eps
    with c = sqrt(gamma p / rho). eps = 1 recovers the standard system.

    The entropy is eta = -rho log(p / ((gamma - 1) rho^gamma)). Its
    compatible flux is psi = v eta; entropy_flux_sign = -1 selects the
    sign-flipped variant, kept only for comparison (it fails the
    compatibility identity, see the model tests).
    """

    m = 3

    def __init__(
        self,
        gamma: float = 1.4,
        eps: float = 1.0,
        entropy_flux_sign: float = 1.0,
    ):
        if gamma <= 1.0:
            raise ValueError(f"need gamma > 1, got {gamma}")
        if eps <= 0.0:
            raise ValueError(f"need eps > 0, got {eps}")
        self.gamma = gamma
        self.eps = eps
        self.entropy_flux_sign = entropy_flux_sign
        self.name = "euler" if eps == 1.0 else f"euler-rescaled(eps={eps})"

    def pressure(self, u):
        u = _as_states(u, 3)
        rho, q, E = u[:, 0], u[:, 1], u[:, 2]
        return (self.gamma - 1.0) * (E - 0.5 * self.eps**2 * q**2 / rho)

    def velocity(self, u):
        u = _as_states(u, 3)
        return u[:, 1] / u[:, 0]

    def sound_speed(self, u):
        u = _as_states(u, 3)
        return np.sqrt(self.gamma * self.pressure(u) / u[:, 0])

    def validate(self, u):
        super().validate(u)
        u = _as_states(u, 3)
        if np.any(u[:, 0] <= 0.0):
            raise AdmissibilityError(f"{self.name}: non-positive density")
        if np.any(self.pressure(u) <= 0.0):
            raise AdmissibilityError(f"{self.name}: non-positive pressure")

    def flux(self, u):
        u = _as_states(u, 3)
        rho, q, E = u[:, 0], u[:, 1], u[:, 2]
        v = q / rho
        p = self.pressure(u)
        return np.stack([q, q * v + p / self.eps**2, v * (E + p)], axis=1)

    def flux_jacobian(self, u):
        u = _as_states(u, 3)
        g, e2 = self.gamma, self.eps**2
        rho, q, E = u[:, 0], u[:, 1], u[:, 2]
        v = q / rho
        J = np.zeros((u.shape[0], 3, 3))
        J[:, 0, 1] = 1.0
        J[:, 1, 0] = -0.5 * (3.0 - g) * v**2
        J[:, 1, 1] = (3.0 - g) * v
        J[:, 1, 2] = (g - 1.0) / e2
        J[:, 2, 0] = -g * v * E / rho + (g - 1.0) * e2 * v**3
        J[:, 2, 1] = g * E / rho - 1.5 * (g - 1.0) * e2 * v**2
        J[:, 2, 2] = g * v
        return J

    def max_abs_eigenvalue(self, u):
        self.validate(u)
        return np.abs(self.velocity(u)) + self.sound_speed(u) / self.eps

    def entropy(self, u):
        """eta = -rho log(p / ((gamma-1) rho^gamma)); NaN where inadmissible.

        Entropy feeds diagnostics (production indicators), where a NaN must
        flow into the marking logic instead of aborting; hard admissibility
        enforcement stays in validate().
        """
        u = _as_states(u, 3)
        rho = u[:, 0]
        p = self.pressure(u)
        with np.errstate(invalid="ignore", divide="ignore"):
            arg = np.where((rho > 0.0) & (p > 0.0), p / ((self.gamma - 1.0) * rho**self.gamma), np.nan)
            return -rho * np.log(arg)

    def entropy_flux(self, u):
        return self.entropy_flux_sign * self.velocity(u) * self.entropy(u)

    def entropy_gradient(self, u):
        u = _as_states(u, 3)
        g, e2 = self.gamma, self.eps**2
        rho = u[:, 0]
        v = self.velocity(u)
        p = self.pressure(u)
        logs = np.log(p / ((g - 1.0) * rho**g))
        grad = np.empty_like(u)
        grad[:, 0] = -logs + g - 0.5 * (g - 1.0) * e2 * rho * v**2 / p
        grad[:, 1] = (g - 1.0) * e2 * rho * v / p
        grad[:, 2] = -(g - 1.0) * rho / p
        return grad


@dataclass
class EulerState:
    """Primitive triple (rho, v, p) with conversions to and from conserved."""

    rho: float
    v: float
    p: float

    def __post_init__(self):
        if self.rho <= 0 or self.p <= 0:
            raise AdmissibilityError(f"inadmissible primitive state {self}")

    def to_conserved(self, model: EulerModel) -> np.ndarray:
        E = self.p / (model.gamma - 1.0) + 0.5 * model.eps**2 * self.rho * self.v**2
        return np.array([self.rho, self.rho * self.v, E])

    @classmethod
    def from_conserved(cls, u: np.ndarray, model: EulerModel) -> "EulerState":
        u = np.asarray(u, dtype=float).reshape(3)
        p = float(model.pressure(u[None, :])[0])
        return cls(rho=float(u[0]), v=float(u[1] / u[0]), p=p)


def primitive_to_conserved(w: np.ndarray, model: EulerModel) -> np.ndarray:
    """Vectorized (rho, v, p) -> (rho, rho v, E) for (K, 3) arrays."""
    w = np.asarray(w, dtype=float)
    rho, v, p = w[..., 0], w[..., 1], w[..., 2]
    E = p / (model.gamma - 1.0) + 0.5 * model.eps**2 * rho * v**2
    return np.stack([rho, rho * v, E], axis=-1)


def conserved_to_primitive(u: np.ndarray, model: EulerModel) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    v = u[..., 1] / rho
    p = (model.gamma - 1.0) * (u[..., 2] - 0.5 * model.eps**2 * rho * v**2)
    return np.stack([rho, v, p], axis=-1)


def entropy_compatibility_residual(
    law: ConservationLaw, u: np.ndarray, delta: float = 1e-6
) -> float:
    """Max-norm residual of grad(eta)^T f'(u) = grad(psi)^T at given states.

    grad(psi) is taken by central differences, the rest in closed form.
    The identity characterizes a compatible entropy pair.
    """
    u = _as_states(u, law.m)
    lhs = np.einsum("km,kmn->kn", law.entropy_gradient(u), law.flux_jacobian(u))
    rhs = np.empty_like(lhs)
    for c in range(law.m):
        up, um = u.copy(), u.copy()
        scale = delta * max(1.0, float(np.max(np.abs(u[:, c]))))
        up[:, c] += scale
        um[:, c] -= scale
        rhs[:, c] = (law.entropy_flux(up) - law.entropy_flux(um)) / (2 * scale)
    return float(np.max(np.abs(lhs - rhs)))


class RiemannFan:
    """Exact self-similar solution of the Euler Riemann problem.

    Star-region values are solved by Newton iteration on the pressure
    function; sample(xi) evaluates the fan at xi = x/t and returns
    primitive states (K, 3).
    """

    def __init__(self, left: EulerState, right: EulerState, gamma: float = 1.4):
        self.gamma = g = gamma
        self.left, self.right = left, right
        cL = np.sqrt(g * left.p / left.rho)
        cR = np.sqrt(g * right.p / right.rho)
        self.cL, self.cR = cL, cR
        if 2.0 * (cL + cR) / (g - 1.0) <= right.v - left.v:
            raise AdmissibilityError("initial states generate vacuum")
        self.p_star, self.v_star = self._solve_star()
        self.rho_star_l = self._star_density(left, self.p_star)
        self.rho_star_r = self._star_density(right, self.p_star)

    def _pressure_fn(self, p: float, s: EulerState, c: float):
        g = self.gamma
        if p > s.p:
            A = 2.0 / ((g + 1.0) * s.rho)
            B = (g - 1.0) / (g + 1.0) * s.p
            root = np.sqrt(A / (p + B))
            return (p - s.p) * root, root * (1.0 - 0.5 * (p - s.p) / (B + p))
        f = 2.0 * c / (g - 1.0) * ((p / s.p) ** ((g - 1.0) / (2 * g)) - 1.0)
        return f, (p / s.p) ** (-(g + 1.0) / (2 * g)) / (s.rho * c)

    def _solve_star(self):
        g = self.gamma
        L, R = self.left, self.right
        dv = R.v - L.v
        # primitive-variable estimate, floored away from zero
        p = max(
            0.5 * (L.p + R.p)
            - 0.125 * dv * (L.rho + R.rho) * (self.cL + self.cR),
            1e-8 * min(L.p, R.p),
        )
        for _ in range(200):
            fL, dL = self._pressure_fn(p, L, self.cL)
            fR, dR = self._pressure_fn(p, R, self.cR)
            step = (fL + fR + dv) / (dL + dR)
            p_new = p - step
            if p_new <= 0.0:
                p_new = 0.5 * p
            if abs(p_new - p) <= 1e-14 * (p_new + p):
                p = p_new
                break
            p = p_new
        else:
            raise RuntimeError("star-pressure iteration did not converge")
        fL, _ = self._pressure_fn(p, L, self.cL)
        fR, _ = self._pressure_fn(p, R, self.cR)
        return p, 0.5 * (L.v + R.v) + 0.5 * (fR - fL)

    def _star_density(self, s: EulerState, p: float) -> float:
        g = self.gamma
        r = p / s.p
        if p > s.p:
            gr = (g - 1.0) / (g + 1.0)
            return s.rho * (r + gr) / (gr * r + 1.0)
        return s.rho * r ** (1.0 / g)

    def wave_speeds(self) -> dict:
        """Outer wave speeds plus the contact speed, keyed by wave."""
        g = self.gamma
        L, R = self.left, self.right
        out = {"contact": self.v_star}
        if self.p_star > L.p:
            out["left"] = L.v - self.cL * np.sqrt(
                (g + 1.0) / (2 * g) * self.p_star / L.p + (g - 1.0) / (2 * g)
            )
        else:
            c_star = self.cL * (self.p_star / L.p) ** ((g - 1.0) / (2 * g))
            out["left"] = (L.v - self.cL, self.v_star - c_star)
        if self.p_star > R.p:
            out["right"] = R.v + self.cR * np.sqrt(
                (g + 1.0) / (2 * g) * self.p_star / R.p + (g - 1.0) / (2 * g)
            )
        else:
            c_star = self.cR * (self.p_star / R.p) ** ((g - 1.0) / (2 * g))
            out["right"] = (R.v + self.cR, self.v_star + c_star)
        return out

    def _sample_side(self, xi: np.ndarray, s: EulerState, c: float, sign: float):
        """States between the outer wave on one side and the contact."""
        g = self.gamma
        rho_star = self.rho_star_l if sign > 0 else self.rho_star_r
        prim = np.empty((xi.size, 3))
        if self.p_star > s.p:  # shock
            speed = s.v - sign * c * np.sqrt(
                (g + 1.0) / (2 * g) * self.p_star / s.p + (g - 1.0) / (2 * g)
            )
            ahead = sign * (speed - xi) > 0.0
            prim[ahead] = (s.rho, s.v, s.p)
            prim[~ahead] = (rho_star, self.v_star, self.p_star)
            return prim
        c_star = c * (self.p_star / s.p) ** ((g - 1.0) / (2 * g))
        head = s.v - sign * c
        tail = self.v_star - sign * c_star
        ahead = sign * (head - xi) > 0.0
        inside = ~ahead & (sign * (tail - xi) >= 0.0)
        star = ~ahead & ~inside
        prim[ahead] = (s.rho, s.v, s.p)
        prim[star] = (rho_star, self.v_star, self.p_star)
        if np.any(inside):
            x = xi[inside]
            v = (2.0 / (g + 1.0)) * (sign * c + 0.5 * (g - 1.0) * s.v + x)
            cc = sign * (v - x)
            prim[inside, 0] = s.rho * (cc / c) ** (2.0 / (g - 1.0))
            prim[inside, 1] = v
            prim[inside, 2] = s.p * (cc / c) ** (2.0 * g / (g - 1.0))
        return prim

    def sample(self, xi: np.ndarray) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        prim = np.empty((xi.size, 3))
        left_of_contact = xi < self.v_star
        if np.any(left_of_contact):
            prim[left_of_contact] = self._sample_side(
                xi[left_of_contact], self.left, self.cL, +1.0
            )
        if np.any(~left_of_contact):
            prim[~left_of_contact] = self._sample_side(
                xi[~left_of_contact], self.right, self.cR, -1.0
            )
        return prim


def exact_riemann_euler(
    left: EulerState, right: EulerState, gamma: float = 1.4
) -> RiemannFan:
    return RiemannFan(left, right, gamma)


def burgers_characteristic_solution(u0, u0_prime, x: np.ndarray, t: float):
    """Pre-shock Burgers solution by Newton on u = u0(x - u t)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u0(x), dtype=float).copy()
    for _ in range(100):
        res = u - u0(x - u * t)
        if np.max(np.abs(res)) < 1e-13:
            return u
        u -= res / (1.0 + t * u0_prime(x - u * t))
    raise RuntimeError("characteristic solve did not converge (past shock time?)")
