"""Benchmark problem catalog, run orchestration, norms, and configuration.

A ProblemSpec bundles everything a run needs: the conservation law, domain,
boundary treatment, final time, the fixed grid ratio dt/h, the viscosity
policy, and the limiter threshold gamma2. run_problem advances the chosen
scheme to the final time with blow-up detection and collects the per-step
entropy reports that the statistics and event outputs are built from.

Schemes: q3 is the unlimited third-order method, qi1/qi2/qi3 enable the
time limiter with marking strategies I1/I2/I3, and explicit is an SSP
Runge-Kutta baseline run at its stability time-step.
"""

from __future__ import annotations

import enum
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import tomli

from .grid import (
    BoundaryCondition,
    Grid1D,
    project_initial_condition,
    write_field_csv,
)
from .limiter import LimiterConfig, MarkingStrategy
from .models import (
    AdmissibilityError,
    Burgers,
    ConservationLaw,
    EulerModel,
    EulerState,
    LinearAdvection,
    RiemannFan,
    primitive_to_conserved,
)
from .numflux import ViscosityPolicy, rusanov
from .reconstruction import (
    LinearWeights,
    compute_bed,
    periodic_interior_weights,
)
from .timeint import (
    LinearSolver,
    NewtonConfig,
    SolverFailure,
    dirk3,
    predictor_stage,
    quinpi_step,
    theta_coefficients,
)

# A run is declared blown up once any cell average exceeds the initial
# magnitude by this factor (or stops being finite).
BLOWUP_FACTOR = 1e6


class Scheme(enum.Enum):
    Q3 = "q3"
    QI1 = "qi1"
    QI2 = "qi2"
    QI3 = "qi3"
    EXPLICIT = "explicit"

    @property
    def marking(self) -> MarkingStrategy:
        return {
            Scheme.Q3: MarkingStrategy.NONE,
            Scheme.QI1: MarkingStrategy.I1,
            Scheme.QI2: MarkingStrategy.I2,
            Scheme.QI3: MarkingStrategy.I3,
            Scheme.EXPLICIT: MarkingStrategy.NONE,
        }[self]


@dataclass(frozen=True)
class ProblemSpec:
    """One benchmark problem with its catalog defaults.

    ic maps points to pointwise conserved states; exact, when available,
    maps (points, time) to pointwise conserved states. Problems without an
    exact solution are measured by self-convergence against a restricted
    finer-grid run. Discontinuous initial data is assumed to jump on a cell
    interface (even cell counts on the symmetric Riemann domains).
    """

    name: str
    law: ConservationLaw
    domain: tuple
    bc: BoundaryCondition
    final_time: float
    grid_ratio: float
    policy: ViscosityPolicy
    gamma2: float
    cells: int
    ic: Callable
    exact: Callable | None = None
    contact_speed: float | None = None
    params: dict = field(default_factory=dict)
    description: str = ""


def _euler_convergence(kappa: int = 0) -> ProblemSpec:
    law = EulerModel()
    p0 = 10.0**kappa

    def prim(x, t):
        rho = 1.0 + 0.5 * np.sin(2.0 * np.pi * (x - t))
        w = np.stack([rho, np.ones_like(x), np.full_like(x, p0)], axis=-1)
        return primitive_to_conserved(w, law)

    return ProblemSpec(
        name="euler-convergence",
        law=law,
        domain=(0.0, 1.0),
        bc=BoundaryCondition.PERIODIC,
        final_time=1.0,
        grid_ratio=4.0,
        policy=ViscosityPolicy.MATERIAL_SPEED,
        gamma2=0.1,
        cells=160,
        ic=lambda x: prim(x, 0.0),
        exact=prim,
        params={"kappa": int(kappa)},
        description="advected density perturbation, constant velocity and pressure",
    )


def _riemann(name, left, right, domain, final_time, grid_ratio, cells, description):
    law = EulerModel()
    fan = RiemannFan(left, right, law.gamma)
    uL = left.to_conserved(law)
    uR = right.to_conserved(law)

    def ic(x):
        return np.where(x[..., None] < 0.0, uL[None, :], uR[None, :])

    def exact(x, t):
        if t <= 0.0:
            return ic(x)
        return primitive_to_conserved(fan.sample(x / t), law)

    return ProblemSpec(
        name=name,
        law=law,
        domain=domain,
        bc=BoundaryCondition.FREE_FLOW,
        final_time=final_time,
        grid_ratio=grid_ratio,
        policy=ViscosityPolicy.MATERIAL_SPEED,
        gamma2=1.0,
        cells=cells,
        ic=ic,
        exact=exact,
        contact_speed=float(fan.v_star),
        description=description,
    )


def _max_wave_speed(law: EulerModel, ic: Callable, domain) -> float:
    x = np.linspace(domain[0], domain[1], 8193)
    return float(np.max(law.max_abs_eigenvalue(ic(x))))


def _low_mach(eps: float = 0.8) -> ProblemSpec:
    law = EulerModel(eps=eps)
    g = law.gamma

    def ic(x):
        u = np.sin(2.0 * np.pi * x / 5.0)
        rho = (1.0 + eps * (g - 1.0) * u / (2.0 * np.sqrt(g))) ** (2.0 / (g - 1.0))
        w = np.stack([rho, u, rho**g], axis=-1)
        return primitive_to_conserved(w, law)

    domain = (-2.5, 2.5)
    lam = _max_wave_speed(law, ic, domain)
    return ProblemSpec(
        name="low-mach-convergence",
        law=law,
        domain=domain,
        bc=BoundaryCondition.PERIODIC,
        final_time=0.3 if eps >= 0.1 else 0.01,
        grid_ratio=20.0 / lam,
        policy=ViscosityPolicy.MATERIAL_SPEED,
        gamma2=0.1,
        cells=160,
        ic=ic,
        params={"eps": float(eps)},
        description="smooth isentropic flow in the rescaled low-Mach variables",
    )


def _acoustic_pulses(eps: float = 1.0 / 11.0) -> ProblemSpec:
    law = EulerModel(eps=eps)
    g = law.gamma
    L = 2.0 / eps

    def ic(x):
        bump = 1.0 - np.cos(2.0 * np.pi * x / L)
        rho = 0.955 + 0.5 * eps * 2.0 * bump
        u = -0.5 * 2.0 * np.sqrt(g) * np.sign(x) * bump
        p = 1.0 + 0.5 * eps * 2.0 * g * bump
        return primitive_to_conserved(np.stack([rho, u, p], axis=-1), law)

    domain = (-L, L)
    lam = _max_wave_speed(law, ic, domain)
    return ProblemSpec(
        name="acoustic-pulses",
        law=law,
        domain=domain,
        bc=BoundaryCondition.PERIODIC,
        final_time=0.815,
        grid_ratio=6.78 / lam,
        policy=ViscosityPolicy.MATERIAL_SPEED,
        gamma2=0.1,
        cells=440,
        ic=ic,
        params={"eps": float(eps)},
        description="two colliding acoustic pulses in the rescaled variables",
    )


def _advection(name, profile, description) -> ProblemSpec:
    law = LinearAdvection(1.0)

    def exact(x, t):
        xm = -1.0 + np.mod(x - t + 1.0, 2.0)
        return profile(xm)

    return ProblemSpec(
        name=name,
        law=law,
        domain=(-1.0, 1.0),
        bc=BoundaryCondition.PERIODIC,
        final_time=2.0,
        grid_ratio=5.0,
        policy=ViscosityPolicy.SPECTRAL,
        gamma2=0.1,
        cells=400,
        ic=profile,
        exact=exact,
        description=description,
    )


def _burgers_shock_interaction() -> ProblemSpec:
    return ProblemSpec(
        name="burgers-shock-interaction",
        law=Burgers(),
        domain=(-1.0, 1.0),
        bc=BoundaryCondition.PERIODIC,
        final_time=1.0,
        grid_ratio=3.0,
        policy=ViscosityPolicy.SPECTRAL,
        gamma2=0.1,
        cells=400,
        ic=lambda x: 0.2 - np.sin(np.pi * x) + np.sin(2.0 * np.pi * x),
        description="two shocks form and merge into one",
    )


_CATALOG = {
    "euler-convergence": _euler_convergence,
    "nonsym-expansion": lambda: _riemann(
        "nonsym-expansion",
        EulerState(1.0, -0.15, 1.0),
        EulerState(0.5, 0.15, 1.0),
        (-2.0, 2.0),
        1.0,
        6.66,
        800,
        "non-symmetric double expansion with a slow contact",
    ),
    "colliding-flows": lambda: _riemann(
        "colliding-flows",
        EulerState(1.5, 0.5, 10.0),
        EulerState(0.5, -0.5, 10.0),
        (-5.0, 5.0),
        1.0,
        2.0,
        2000,
        "two colliding streams producing twin shocks",
    ),
    "stiff-lax": lambda: _riemann(
        "stiff-lax",
        EulerState(0.445, 0.0, 3.528),
        EulerState(0.5, 0.0, 2.528),
        (-1.0, 1.0),
        0.15,
        2.83,
        800,
        "Lax-type tube with zero velocities and a pressure jump",
    ),
    "low-mach-convergence": _low_mach,
    "acoustic-pulses": _acoustic_pulses,
    "advection-sine-box": lambda: _advection(
        "advection-sine-box",
        lambda x: np.sin(np.pi * x) + np.where(np.abs(x) <= 0.4, 3.0, 0.0),
        "sine profile with a superposed box",
    ),
    "advection-double-step": lambda: _advection(
        "advection-double-step",
        lambda x: np.where(np.abs(x) <= 0.25, 1.0, 0.0),
        "unit box profile",
    ),
    "burgers-shock-interaction": _burgers_shock_interaction,
}

# Parameters each problem family accepts.
_CATALOG_PARAMS = {
    "euler-convergence": ("kappa",),
    "low-mach-convergence": ("eps",),
    "acoustic-pulses": ("eps",),
}


def available_problems() -> list:
    return sorted(_CATALOG)


def make_problem(name: str, **params) -> ProblemSpec:
    """Build a catalog problem; params are family-specific (kappa, eps)."""
    if name not in _CATALOG:
        raise ValueError(
            f"unknown problem {name!r}; available: {', '.join(available_problems())}"
        )
    allowed = _CATALOG_PARAMS.get(name, ())
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"problem {name!r} does not take {sorted(extra)}")
    return _CATALOG[name](**params)


def exact_cell_averages(spec: ProblemSpec, grid: Grid1D, t: float) -> np.ndarray:
    if spec.exact is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    return project_initial_condition(lambda x: spec.exact(x, t), grid, spec.law.m)


def contact_window(spec: ProblemSpec, grid: Grid1D, t: float, width: int = 10):
    """x-range of +/- width cells around the exact contact location."""
    if spec.contact_speed is None:
        raise ValueError(f"problem {spec.name!r} has no contact wave")
    xc = spec.contact_speed * t
    return (xc - width * grid.h, xc + width * grid.h)


def error_norms(
    numerical: np.ndarray,
    reference: np.ndarray,
    grid: Grid1D,
    component: int = 0,
    window: tuple | None = None,
):
    """(L1, Linf) of one component; L1 = h * sum |e|, optionally windowed."""
    numerical = np.atleast_2d(numerical.T).T
    reference = np.atleast_2d(reference.T).T
    if numerical.shape != reference.shape or numerical.shape[0] != grid.N:
        raise ValueError("field shapes do not match the grid")
    e = np.abs(numerical[:, component] - reference[:, component])
    if window is not None:
        lo, hi = window
        mask = (grid.cell_centers >= lo) & (grid.cell_centers <= hi)
        e = e[mask]
    return float(grid.h * np.sum(e)), float(np.max(e))


def convergence_rates(errors: list) -> list:
    """Dyadic rates log2(err_N / err_2N) from (N, err) pairs."""
    rates = []
    for (n1, e1), (n2, e2) in zip(errors[:-1], errors[1:]):
        if n2 != 2 * n1:
            raise ValueError(f"refinement {n1} -> {n2} is not dyadic")
        with np.errstate(divide="ignore", invalid="ignore"):
            rates.append(float(np.log2(e1 / e2)))
    return rates


def restrict_pairwise(field: np.ndarray) -> np.ndarray:
    """Exact cell averages on the coarser grid of a dyadically finer field."""
    if field.shape[0] % 2:
        raise ValueError("pairwise restriction needs an even cell count")
    return 0.5 * (field[0::2] + field[1::2])


@dataclass
class RunReport:
    problem: str
    scheme: Scheme
    cells: int
    grid: Grid1D
    field: np.ndarray
    time: float
    steps: int
    aborted: bool = False
    abort_reason: str | None = None
    abort_time: float | None = None
    wall_time: float = 0.0
    newton_predictor: int = 0
    newton_corrector: int = 0
    newton_stalled: int = 0
    entropy_reports: list = field(default_factory=list)
    events: list = field(default_factory=list)  # (step, time, interface, loop)
    max_limited_fluxes: int = 0
    limited_steps: int = 0
    loop_cap_steps: int = 0
    initial_mass: np.ndarray | None = None
    final_mass: np.ndarray | None = None

    @property
    def pct_limited_steps(self) -> float:
        return 100.0 * self.limited_steps / self.steps if self.steps else 0.0


def limiter_statistics(reports: list) -> tuple:
    """(max limited fluxes in one step, percent of steps with limiting)."""
    if not reports:
        return 0, 0.0
    counts = [r.n_limited for r in reports]
    pct = 100.0 * sum(1 for c in counts if c) / len(reports)
    return int(max(counts)), float(pct)


def ssprk3_step(
    U: np.ndarray,
    dt: float,
    h: float,
    law: ConservationLaw,
    bc: BoundaryCondition,
    lw: LinearWeights = LinearWeights(),
) -> np.ndarray:
    """Third-order SSP Runge-Kutta step with spectral-radius viscosity."""

    def L(V):
        bed = compute_bed(V, h, bc, lw)
        flux, _ = rusanov(bed.minus, bed.plus, law, ViscosityPolicy.SPECTRAL)
        return -(flux[1:] - flux[:-1]) / h

    U1 = U + dt * L(U)
    U2 = 0.75 * U + 0.25 * (U1 + dt * L(U1))
    return U / 3.0 + (2.0 / 3.0) * (U2 + dt * L(U2))


def run_problem(
    spec: ProblemSpec,
    cells: int | None = None,
    scheme: Scheme = Scheme.QI3,
    newton: NewtonConfig | None = None,
    lw: LinearWeights = LinearWeights(),
    keep_reports: bool = True,
    explicit_cfl: float = 0.4,
) -> RunReport:
    """Integrate a catalog problem to its final time with fixed dt.

    dt = grid_ratio * h throughout, with the last step truncated to land on
    the final time; the explicit scheme instead tracks its stability step.
    Newton failures, inadmissible states and magnitude blow-ups abort the
    run and record the time of the failed step's target level.
    """
    N = int(cells or spec.cells)
    grid = Grid1D(spec.domain[0], spec.domain[1], N)
    U = project_initial_condition(spec.ic, grid, spec.law.m)
    newton = newton or NewtonConfig()
    tableau = dirk3()
    limiter_cfg = LimiterConfig(strategy=scheme.marking, gamma2=spec.gamma2)
    dt_fixed = spec.grid_ratio * grid.h
    scale = max(1.0, float(np.max(np.abs(U))))
    rep = RunReport(
        problem=spec.name,
        scheme=scheme,
        cells=N,
        grid=grid,
        field=U,
        time=0.0,
        steps=0,
        initial_mass=grid.h * U.sum(axis=0),
    )
    t = 0.0
    t0 = time.perf_counter()
    while spec.final_time - t > 1e-9 * dt_fixed:
        dt = min(dt_fixed, spec.final_time - t)
        try:
            if scheme is Scheme.EXPLICIT:
                lam = float(np.max(spec.law.max_abs_eigenvalue(U)))
                dt = min(explicit_cfl * grid.h / lam, spec.final_time - t)
                U_next, report = ssprk3_step(U, dt, grid.h, spec.law, spec.bc, lw), None
            else:
                U_next, report, stages = quinpi_step(
                    U, dt, grid.h, spec.law, spec.bc, spec.policy,
                    tableau, newton, limiter_cfg, lw,
                )
                rep.newton_predictor += stages.newton_iters_predictor
                rep.newton_corrector += stages.newton_iters_corrector
                rep.newton_stalled += stages.newton_stalled
        except (SolverFailure, AdmissibilityError) as exc:
            rep.aborted = True
            rep.abort_reason = getattr(exc, "kind", "inadmissible-state")
            rep.abort_time = t + dt
            break
        if not np.all(np.isfinite(U_next)) or np.max(np.abs(U_next)) > BLOWUP_FACTOR * scale:
            rep.aborted = True
            rep.abort_reason = "blow-up"
            rep.abort_time = t + dt
            break
        U = U_next
        t += dt
        rep.steps += 1
        if report is not None:
            if keep_reports:
                rep.entropy_reports.append(report)
            n_lim = report.n_limited
            rep.max_limited_fluxes = max(rep.max_limited_fluxes, n_lim)
            rep.limited_steps += 1 if n_lim else 0
            rep.loop_cap_steps += 1 if report.loop_cap_exceeded else 0
            for iface, loop in report.limited_interfaces:
                rep.events.append((rep.steps, t, int(iface), int(loop)))
    rep.field = U
    rep.time = t
    rep.wall_time = time.perf_counter() - t0
    rep.final_mass = grid.h * U.sum(axis=0)
    return rep


def _sweep_threads() -> int:
    try:
        return max(1, int(os.environ.get("QUINPI_THREADS", "1")))
    except ValueError:
        return 1


def run_levels(
    spec: ProblemSpec,
    levels: list,
    scheme: Scheme = Scheme.QI3,
    newton: NewtonConfig | None = None,
    keep_reports: bool = False,
) -> list:
    """run_problem over grid levels; QUINPI_THREADS > 1 runs them in parallel.

    Results are returned in level order either way, so output is identical.
    """
    threads = _sweep_threads()

    def one(N):
        return run_problem(spec, N, scheme, newton, keep_reports=keep_reports)

    if threads == 1 or len(levels) == 1:
        return [one(N) for N in levels]
    with ThreadPoolExecutor(max_workers=min(threads, len(levels))) as pool:
        return list(pool.map(one, levels))


def convergence_table(
    spec: ProblemSpec,
    levels: list,
    scheme: Scheme = Scheme.QI3,
    newton: NewtonConfig | None = None,
    window_cells: int | None = None,
) -> list:
    """Rows (N, L1, Linf) of density-component errors over dyadic levels.

    With an exact solution the reference is its Gauss cell averages at the
    reached time. Otherwise one extra run at twice the finest level serves
    as reference, restricted by pairwise averaging (self-convergence).
    window_cells restricts the norms to that many cells around the contact.
    """
    levels = [int(N) for N in levels]
    for n1, n2 in zip(levels[:-1], levels[1:]):
        if n2 != 2 * n1:
            raise ValueError(f"levels must be dyadic, got {n1} -> {n2}")
    run_list = list(levels)
    if spec.exact is None:
        run_list.append(2 * levels[-1])
    reports = run_levels(spec, run_list, scheme, newton)
    for rep in reports:
        if rep.aborted:
            raise SolverFailure(
                f"{spec.name} aborted at t={rep.abort_time:.6g} on N={rep.cells}"
                f" ({rep.abort_reason})",
                kind=rep.abort_reason or "blow-up",
            )
    rows = []
    for k, N in enumerate(levels):
        rep = reports[k]
        if spec.exact is not None:
            ref = exact_cell_averages(spec, rep.grid, rep.time)
        else:
            ref = restrict_pairwise(reports[k + 1].field)
        window = None
        if window_cells is not None:
            window = contact_window(spec, rep.grid, rep.time, window_cells)
        l1, linf = error_norms(rep.field, ref, rep.grid, component=0, window=window)
        rows.append((N, l1, linf))
    return rows


@dataclass(frozen=True)
class WeightStudyRow:
    cells: int
    err_first_order: float
    err_third_order: float


def weight_convergence_study(
    levels: list, lw: LinearWeights = LinearWeights()
) -> list:
    """Mean distance of nonlinear from linear weights under refinement.

    The probe u(x) = sin(pi x) + sin(15 pi x) exp(-20 x^2) on [-1, 1] is
    projected to exact cell averages (third-order data column) and, for the
    first-order column, advected for one composite-backward-Euler predictor
    step at dt = h. err(N) = mean_j max_k |d_k - w_jk| with periodic wrap.
    """
    law = LinearAdvection(1.0)
    newton = NewtonConfig()
    theta = theta_coefficients(dirk3().c)
    d = np.array([lw.d0, lw.dl, lw.dr])

    def probe(x):
        return np.sin(np.pi * x) + np.sin(15.0 * np.pi * x) * np.exp(-20.0 * x**2)

    def err(f, h):
        w = periodic_interior_weights(f, h, lw)
        return float(np.mean(np.max(np.abs(w[:, :, 0] - d[None, :]), axis=1)))

    rows = []
    for N in levels:
        grid = Grid1D(-1.0, 1.0, int(N))
        f = project_initial_condition(lambda x: probe(x)[:, None], grid, 1)
        fp = f
        for k in range(theta.size):
            fp = predictor_stage(
                fp, theta[k] * grid.h, grid.h, law,
                BoundaryCondition.PERIODIC, ViscosityPolicy.SPECTRAL, newton, stage=k,
            ).field
        rows.append(WeightStudyRow(int(N), err(fp, grid.h), err(f, grid.h)))
    return rows


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_PROBLEM_KEYS = {
    "name", "kappa", "eps", "cells", "final_time", "grid_ratio", "gamma2",
}
_SCHEME_KEYS = {"name"}
_NEWTON_KEYS = {
    "abs_tol", "rel_tol", "max_iters", "linear_solver", "gmres_restart", "gmres_tol",
}
_OUTPUT_KEYS = {"directory", "prefix"}


def parse_config(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML: {exc}") from exc


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ConfigError("non-finite floats are not writable")
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value of type {type(v).__name__}")


def serialize_config(cfg: dict) -> str:
    """Flat two-level TOML writer; parse(serialize(parse(s))) == parse(s)."""
    lines = []
    for key, val in cfg.items():
        if not isinstance(val, dict):
            lines.append(f"{key} = {_toml_value(val)}")
    for key, val in cfg.items():
        if isinstance(val, dict):
            if lines:
                lines.append("")
            lines.append(f"[{key}]")
            for k, v in val.items():
                if isinstance(v, dict):
                    raise ConfigError("tables nested beyond one level")
                lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


@dataclass
class ResolvedRun:
    spec: ProblemSpec
    scheme: Scheme
    newton: NewtonConfig
    directory: str
    prefix: str


def resolve_run(cfg: dict) -> ResolvedRun:
    """Validate a config mapping and build the run it describes."""
    unknown = set(cfg) - {"problem", "scheme", "newton", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    prob = dict(cfg.get("problem", {}))
    if set(prob) - _PROBLEM_KEYS:
        raise ConfigError(f"unknown problem keys: {sorted(set(prob) - _PROBLEM_KEYS)}")
    name = prob.pop("name", None)
    if not name:
        raise ConfigError("problem.name is required")
    params = {k: prob.pop(k) for k in ("kappa", "eps") if k in prob}
    try:
        spec = make_problem(name, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    overrides = {}
    for key in ("cells", "final_time", "grid_ratio", "gamma2"):
        if key in prob:
            val = prob[key]
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"problem.{key} must be a positive number")
            overrides[key] = int(val) if key == "cells" else float(val)
    if overrides:
        spec = replace(spec, **overrides)

    sch = dict(cfg.get("scheme", {}))
    if set(sch) - _SCHEME_KEYS:
        raise ConfigError(f"unknown scheme keys: {sorted(set(sch) - _SCHEME_KEYS)}")
    try:
        scheme = Scheme(sch.get("name", "qi3"))
    except ValueError as exc:
        raise ConfigError(
            f"unknown scheme {sch.get('name')!r}; use one of "
            f"{', '.join(s.value for s in Scheme)}"
        ) from exc

    newt = dict(cfg.get("newton", {}))
    if set(newt) - _NEWTON_KEYS:
        raise ConfigError(f"unknown newton keys: {sorted(set(newt) - _NEWTON_KEYS)}")
    kwargs = {}
    for key, attr in (
        ("abs_tol", "abs_tol"), ("rel_tol", "rel_tol"), ("max_iters", "max_iters"),
        ("gmres_restart", "gmres_restart"), ("gmres_tol", "gmres_tol"),
    ):
        if key in newt:
            kwargs[attr] = newt[key]
    if "linear_solver" in newt:
        try:
            kwargs["linear_solver"] = LinearSolver(newt["linear_solver"])
        except ValueError as exc:
            raise ConfigError(f"unknown linear_solver {newt['linear_solver']!r}") from exc
    try:
        newton = NewtonConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    out = dict(cfg.get("output", {}))
    if set(out) - _OUTPUT_KEYS:
        raise ConfigError(f"unknown output keys: {sorted(set(out) - _OUTPUT_KEYS)}")
    return ResolvedRun(
        spec=spec,
        scheme=scheme,
        newton=newton,
        directory=str(out.get("directory", ".")),
        prefix=str(out.get("prefix", spec.name)),
    )


def config_for(resolved: ResolvedRun) -> dict:
    """Config mapping that resolves back to the given run (round-trip aid)."""
    spec = resolved.spec
    prob = {"name": spec.name, "cells": spec.cells,
            "final_time": spec.final_time, "grid_ratio": spec.grid_ratio,
            "gamma2": spec.gamma2}
    prob.update(spec.params)
    return {
        "problem": prob,
        "scheme": {"name": resolved.scheme.value},
        "newton": {
            "abs_tol": resolved.newton.abs_tol,
            "rel_tol": resolved.newton.rel_tol,
            "max_iters": resolved.newton.max_iters,
            "linear_solver": resolved.newton.linear_solver.value,
            "gmres_restart": resolved.newton.gmres_restart,
            "gmres_tol": resolved.newton.gmres_tol,
        },
        "output": {"directory": resolved.directory, "prefix": resolved.prefix},
    }


def write_solution_csv(path: str, report: RunReport) -> None:
    write_field_csv(path, report.grid, report.field)


def write_error_table_csv(path: str, rows: list) -> None:
    """rows of (N, l1, linf); rate columns are blank on the first row."""
    r1 = convergence_rates([(n, e) for n, e, _ in rows]) if len(rows) > 1 else []
    ri = convergence_rates([(n, e) for n, _, e in rows]) if len(rows) > 1 else []
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N,l1,rate_l1,linf,rate_linf\n")
        for k, (N, l1, linf) in enumerate(rows):
            a = f"{r1[k - 1]:.17g}" if k else ""
            b = f"{ri[k - 1]:.17g}" if k else ""
            fh.write(f"{N},{l1:.17g},{a},{linf:.17g},{b}\n")


def write_events_csv(path: str, report: RunReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,time,interface_index,loop\n")
        for step, t, iface, loop in report.events:
            fh.write(f"{step},{t:.17g},{iface},{loop}\n")


def write_statistics_csv(path: str, rows: list) -> None:
    """rows of (N, max_limited_fluxes, pct_limited_steps)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N,max_limited_fluxes,pct_limited_steps\n")
        for N, mx, pct in rows:
            fh.write(f"{N},{mx},{pct:.17g}\n")


def write_weight_study_csv(path: str, rows: list) -> None:
    ns = [(r.cells, r.err_first_order) for r in rows]
    n3 = [(r.cells, r.err_third_order) for r in rows]
    r1 = convergence_rates(ns) if len(rows) > 1 else []
    r3 = convergence_rates(n3) if len(rows) > 1 else []
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N,err_hat,rate_hat,err,rate\n")
        for k, row in enumerate(rows):
            a = f"{r1[k - 1]:.17g}" if k else ""
            b = f"{r3[k - 1]:.17g}" if k else ""
            fh.write(
                f"{row.cells},{row.err_first_order:.17g},{a},"
                f"{row.err_third_order:.17g},{b}\n"
            )
