"""Implicit third-order time integration with a first-order predictor.

One step runs, per DIRK stage k:

  predictor   solve U + (theta_k dt/h) dF(U) = U_prev with piecewise-constant
              interface data (composite backward Euler, unconditionally TVD);
  freeze      CWENOZ weights of the predictor stage become affine trace
              operators, removing the nonlinearity of the reconstruction;
  corrector   solve U + (a_kk dt/h) dF(U) = U^n - (dt/h) sum_{i<k} a_ki dF_i
              with the linearized traces (block-pentadiagonal Newton).

Newton systems are solved by a scalar-banded LAPACK factorization with a
Woodbury correction for periodic corner blocks, or by preconditioned GMRES.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .grid import BoundaryCondition
from .models import AdmissibilityError, ConservationLaw
from .numflux import (
    ViscosityPolicy,
    local_viscosity,
    numerical_entropy_flux,
    rusanov,
    rusanov_jacobians,
)
from .reconstruction import (
    FrozenWeights,
    LinearWeights,
    freeze_weights,
    linearized_bed,
)

# Root of x^3 - 3 x^2 + (3/2) x - 1/6, the diagonal of the 3-stage
# stiffly accurate L-stable DIRK of classical order 3.
_LAMBDA = 0.4358665215084589994160194


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        s = self.b.size
        if self.A.shape != (s, s) or self.c.shape != (s,):
            raise ValueError("inconsistent tableau shapes")
        if np.any(np.abs(np.triu(self.A, 1)) > 0):
            raise ValueError("tableau must be diagonally implicit")
        if np.max(np.abs(self.A.sum(axis=1) - self.c)) > 1e-13:
            raise ValueError("row sums of A must equal c")

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.max(np.abs(self.b - self.A[-1])) < 1e-14)


def dirk3() -> ButcherTableau:
    """Three-stage, stiffly accurate, L-stable DIRK of order 3."""
    lam = _LAMBDA
    b1 = -1.5 * lam**2 + 4.0 * lam - 0.25
    b2 = 1.5 * lam**2 - 5.0 * lam + 1.25
    A = np.array(
        [
            [lam, 0.0, 0.0],
            [0.5 * (1.0 - lam), lam, 0.0],
            [b1, b2, lam],
        ]
    )
    b = np.array([b1, b2, lam])
    c = np.array([lam, 0.5 * (1.0 + lam), 1.0])
    return ButcherTableau(A=A, b=b, c=c)


def theta_coefficients(c: np.ndarray) -> np.ndarray:
    """Sub-step sizes theta_k = c_k - c_{k-1} of the composite predictor."""
    theta = np.diff(c, prepend=0.0)
    if np.any(theta <= 0.0):
        raise ValueError(f"abscissae must be strictly increasing, got c={c}")
    return theta


def composite_be(c: np.ndarray) -> ButcherTableau:
    """First-order composite backward Euler sharing the abscissae c."""
    theta = theta_coefficients(c)
    s = c.size
    A = np.tril(np.tile(theta, (s, 1)))
    return ButcherTableau(A=A, b=theta.copy(), c=np.asarray(c, dtype=float))


class LinearSolver(enum.Enum):
    BANDED_DIRECT = "banded-direct"
    KRYLOV_ILU0 = "krylov-ilu0"


@dataclass(frozen=True)
class NewtonConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    step_tol: float = 1e-11
    max_iters: int = 50
    max_backtracks: int = 4
    linear_solver: LinearSolver = LinearSolver.BANDED_DIRECT
    gmres_restart: int = 30
    gmres_tol: float = 1e-12


class SolverFailure(RuntimeError):
    """Newton breakdown, linear-solve failure, or inadmissible state."""

    def __init__(self, msg, *, kind, stage=None, iteration=None, residual=None):
        super().__init__(msg)
        self.kind = kind
        self.stage = stage
        self.iteration = iteration
        self.residual = residual


@dataclass
class BlockBandedMatrix:
    """Scalar-banded storage of a block-banded matrix plus corner blocks.

    ab follows the LAPACK convention ab[W + i - j, j] = M[i, j] with equal
    lower/upper scalar bandwidth W; corners holds (row, col, value) scalar
    entries outside the band (periodic coupling).
    """

    ab: np.ndarray
    W: int
    n: int
    corners: list

    def to_dense(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        for d in range(-self.W, self.W + 1):
            j = np.arange(max(0, -d), min(self.n, self.n - d))
            M[j + d, j] = self.ab[self.W + d, j]
        for i, j, v in self.corners:
            M[i, j] += v
        return M

    def to_sparse(self) -> scipy.sparse.csc_matrix:
        diags, offsets = [], []
        for d in range(-self.W, self.W + 1):
            offsets.append(-d)
            if d >= 0:
                diags.append(self.ab[self.W + d, : self.n - d])
            else:
                diags.append(self.ab[self.W + d, -d :])
        M = scipy.sparse.diags(diags, offsets, shape=(self.n, self.n), format="lil")
        for i, j, v in self.corners:
            M[i, j] += v
        return M.tocsc()


def _assemble_system(
    stencil,
    dFdv: np.ndarray,
    dFdw: np.ndarray,
    coef: float,
    N: int,
    m: int,
    bw: int,
) -> BlockBandedMatrix:
    """I + coef * d(dF)/dU as a block-banded matrix.

    stencil = (minus_cols, minus_coeffs, plus_cols, plus_coeffs) gives, per
    interface, the cells and per-component weights feeding each trace.
    Interface i adds +dF[i] to row i-1 and -dF[i] to row i.
    """
    W = (bw + 1) * m - 1
    ab = np.zeros((2 * W + 1, N * m))
    corners: list = []
    minus_cols, minus_coeffs, plus_cols, plus_coeffs = stencil
    rows_hi = np.arange(N)  # rows receiving +dF[i], i = 1..N
    rows_lo = np.arange(N)  # rows receiving -dF[i], i = 0..N-1

    def scatter(rows, cols, blocks):
        d_all = cols - rows
        for d in np.unique(d_all):
            mask = d_all == d
            cbl = blocks[mask]
            if abs(d) <= bw:
                # ab[W + i - j, j] with i - j = -d*m + (a - b) for d = col - row
                cc = cols[mask]
                for a in range(m):
                    for bcomp in range(m):
                        ab[W - d * m + a - bcomp, cc * m + bcomp] += cbl[:, a, bcomp]
            else:
                for rr, ccol, blk in zip(rows[mask], cols[mask], blocks[mask]):
                    for a in range(m):
                        for bcomp in range(m):
                            corners.append(
                                (rr * m + a, ccol * m + bcomp, blk[a, bcomp])
                            )

    for cols, coeffs, J in (
        (minus_cols, minus_coeffs, dFdv),
        (plus_cols, plus_coeffs, dFdw),
    ):
        S = cols.shape[1]
        for al in range(S):
            blocks = coef * J * coeffs[:, al][:, None, :]
            scatter(rows_hi, cols[1:, al], blocks[1:])
            scatter(rows_lo, cols[:N, al], -blocks[:N])
    ab[W, :] += 1.0
    return BlockBandedMatrix(ab=ab, W=W, n=N * m, corners=corners)


def solve_block_banded(
    mat: BlockBandedMatrix, rhs: np.ndarray, cfg: NewtonConfig
) -> np.ndarray:
    """Solve mat x = rhs with one step of iterative refinement if needed.

    An imperfect but finite solution is returned even when the system is
    ill-conditioned: the direction feeds a Newton iteration whose own
    residual test decides convergence, so hard-failing here would abort
    runs that the outer iteration can still save.
    """
    if cfg.linear_solver is LinearSolver.KRYLOV_ILU0:
        x = _solve_krylov(mat, rhs, cfg)
    else:
        x = _solve_direct(mat, rhs)
    with np.errstate(all="ignore"):
        res = _apply(mat, x) - rhs
    tol = 1e-12 * (1.0 + np.max(np.abs(rhs)))
    finite = np.all(np.isfinite(res))
    if not finite or np.max(np.abs(res)) > tol:
        if finite:
            x = x - (
                _solve_krylov(mat, res, cfg)
                if cfg.linear_solver is LinearSolver.KRYLOV_ILU0
                else _solve_direct(mat, res)
            )
        if not np.all(np.isfinite(x)):
            raise SolverFailure(
                "linear solve produced a non-finite solution",
                kind="linear-solve",
            )
    return x


def _apply(mat: BlockBandedMatrix, x: np.ndarray) -> np.ndarray:
    y = np.zeros_like(x)
    n, W = mat.n, mat.W
    for d in range(-W, W + 1):
        j = np.arange(max(0, -d), min(n, n - d))
        y[j + d] += mat.ab[W + d, j] * x[j]
    for i, j, v in mat.corners:
        y[i] += v * x[j]
    return y


def _solve_direct(mat: BlockBandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Banded LAPACK solve with a Woodbury update for corner entries."""
    W = mat.W
    try:
        if not mat.corners:
            return scipy.linalg.solve_banded((W, W), mat.ab, rhs)
        rows = sorted({i for i, _, _ in mat.corners})
        t = len(rows)
        row_pos = {r: k for k, r in enumerate(rows)}
        U = np.zeros((mat.n, t))
        V = np.zeros((t, mat.n))
        for i, j, v in mat.corners:
            U[i, row_pos[i]] = 1.0
            V[row_pos[i], j] += v
        B = np.column_stack([rhs, U])
        Y = scipy.linalg.solve_banded((W, W), mat.ab, B)
        yb, YU = Y[:, 0], Y[:, 1:]
        S = np.eye(t) + V @ YU
        return yb - YU @ np.linalg.solve(S, V @ yb)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverFailure(str(exc), kind="linear-solve") from exc


def _solve_krylov(mat: BlockBandedMatrix, rhs: np.ndarray, cfg: NewtonConfig):
    A = mat.to_sparse()
    try:
        ilu = scipy.sparse.linalg.spilu(A, drop_tol=0.0, fill_factor=1.0)
    except RuntimeError as exc:
        raise SolverFailure(str(exc), kind="linear-solve") from exc
    M = scipy.sparse.linalg.LinearOperator(A.shape, ilu.solve)
    x, info = scipy.sparse.linalg.gmres(
        A,
        rhs,
        rtol=cfg.gmres_tol,
        atol=0.0,
        restart=cfg.gmres_restart,
        maxiter=200,
        M=M,
    )
    if info != 0:
        raise SolverFailure(f"GMRES did not converge (info={info})", kind="linear-solve")
    return x


class PiecewiseConstantTraces:
    """Interface data of the predictor: plain cell averages, bandwidth 1."""

    bw = 1

    def __init__(self, N: int, m: int, bc: BoundaryCondition):
        self.N, self.m, self.bc = N, m, bc
        periodic = bc is BoundaryCondition.PERIODIC
        minus_idx = np.concatenate([[N - 1 if periodic else 0], np.arange(N)])
        plus_idx = np.concatenate([np.arange(N), [0 if periodic else N - 1]])
        self._minus_idx, self._plus_idx = minus_idx, plus_idx
        ones = np.ones((N + 1, 1, m))
        self.stencil = (minus_idx[:, None], ones, plus_idx[:, None], ones)

    def values(self, U: np.ndarray):
        return U[self._minus_idx], U[self._plus_idx]


class FrozenTraces:
    """Interface data through frozen affine reconstructions, bandwidth 2."""

    bw = 2

    def __init__(self, fw: FrozenWeights, bc: BoundaryCondition):
        self.fw, self.bc = fw, bc
        N, _, m = fw.left.shape
        self.N, self.m = N, m
        periodic = bc is BoundaryCondition.PERIODIC
        cells = fw.stencil_cells()  # (N, 3)
        minus_cols = np.empty((N + 1, 3), dtype=int)
        minus_coeffs = np.empty((N + 1, 3, m))
        minus_cols[1:] = cells
        minus_coeffs[1:] = fw.right
        if periodic:
            minus_cols[0], minus_coeffs[0] = cells[-1], fw.right[-1]
        else:
            minus_cols[0], minus_coeffs[0] = cells[0], fw.left[0]
        plus_cols = np.empty((N + 1, 3), dtype=int)
        plus_coeffs = np.empty((N + 1, 3, m))
        plus_cols[:N] = cells
        plus_coeffs[:N] = fw.left
        if periodic:
            plus_cols[N], plus_coeffs[N] = cells[0], fw.left[0]
        else:
            plus_cols[N], plus_coeffs[N] = cells[-1], fw.right[-1]
        self.stencil = (minus_cols, minus_coeffs, plus_cols, plus_coeffs)

    def values(self, U: np.ndarray):
        bed = linearized_bed(U, self.fw, self.bc)
        return bed.minus, bed.plus


class StageSolve(NamedTuple):
    """Result of one implicit stage solve."""

    field: np.ndarray
    flux: np.ndarray
    entropy_flux: np.ndarray
    iterations: int
    stalled: bool


def _solve_stage(
    traces,
    coef_over_h: float,
    rhs: np.ndarray,
    guess: np.ndarray,
    law: ConservationLaw,
    policy: ViscosityPolicy,
    cfg: NewtonConfig,
    stage: int,
) -> StageSolve:
    """Newton-solve U + coef_over_h * dF(U) = rhs.

    A solve that exhausts the iteration cap with a finite residual is
    accepted and flagged as stalled rather than raised: the integrator runs
    at a fixed accuracy-driven time-step, so the only alternatives at a hard
    stage are giving up or marching on, and marching on lets the magnitude
    and finiteness monitors locate where the scheme itself breaks down.
    Non-finite residuals, iterates and linear solves still fail hard.
    """
    N, m = rhs.shape

    def evaluate(U):
        # Traces may transiently leave the admissible set while Newton moves;
        # the flux and material-speed viscosity stay finite arithmetic there,
        # so iterate through and let the finiteness checks catch real trouble.
        minus, plus = traces.values(U)
        with np.errstate(all="ignore"):
            flux, alpha = rusanov(minus, plus, law, policy)
            G = U + coef_over_h * (flux[1:] - flux[:-1]) - rhs
        return G, (minus, plus, flux, alpha)

    def resmax(G):
        r = np.max(np.abs(G))
        return float(r) if np.isfinite(r) else np.inf

    U = guess.copy()
    try:
        G, aux = evaluate(U)
    except AdmissibilityError as exc:
        raise SolverFailure(
            str(exc), kind="inadmissible-state", stage=stage, iteration=0
        ) from exc
    resid = resmax(G)
    if not np.isfinite(resid):
        raise SolverFailure(
            "non-finite residual at the initial guess", kind="non-finite",
            stage=stage, iteration=0,
        )
    target = cfg.abs_tol + cfg.rel_tol * resid
    iters = 0
    stalled = False
    while resid > target:
        if iters >= cfg.max_iters:
            stalled = True
            break
        minus, plus, _, alpha = aux
        with np.errstate(all="ignore"):
            dFdv, dFdw = rusanov_jacobians(minus, plus, law, alpha)
        mat = _assemble_system(
            traces.stencil, dFdv, dFdw, coef_over_h, N, m, traces.bw
        )
        delta = solve_block_banded(mat, G.ravel(), cfg).reshape(N, m)
        # Backtracking on the residual: the full step is taken whenever it
        # gives sufficient decrease, so smooth solves are plain Newton; near
        # breakdown the damped trial with the best residual is kept and the
        # iteration cap judges divergence.
        best = None
        scale = 1.0
        for _ in range(cfg.max_backtracks + 1):
            U_try = U - scale * delta
            if np.all(np.isfinite(U_try)):
                try:
                    G_try, aux_try = evaluate(U_try)
                except AdmissibilityError as exc:
                    raise SolverFailure(
                        str(exc), kind="inadmissible-state", stage=stage,
                        iteration=iters,
                    ) from exc
                r_try = resmax(G_try)
                if best is None or r_try < best[0]:
                    best = (r_try, U_try, G_try, aux_try)
                if r_try <= (1.0 - 1e-4 * scale) * resid:
                    break
            scale *= 0.5
        if best is None or not np.isfinite(best[0]):
            raise SolverFailure(
                "non-finite Newton iterate",
                kind="non-finite",
                stage=stage,
                iteration=iters,
            )
        step_size = np.max(np.abs(best[1] - U))
        resid, U, G, aux = best
        iters += 1
        # Step stagnation: the iterate stopped moving at the precision the
        # Jacobian conditioning allows, so the residual floor is attained
        # even if it sits above the nominal target.
        if step_size <= cfg.step_tol * (1.0 + np.max(np.abs(U))):
            break
    minus, plus, flux, alpha = aux
    with np.errstate(all="ignore"):
        psi = numerical_entropy_flux(minus, plus, law, alpha)
    return StageSolve(U, flux, psi, iters, stalled)


def predictor_stage(
    U_prev: np.ndarray,
    theta_dt: float,
    h: float,
    law: ConservationLaw,
    bc: BoundaryCondition,
    policy: ViscosityPolicy,
    cfg: NewtonConfig,
    stage: int = 0,
):
    """One composite-backward-Euler sub-step from the previous stage value."""
    if theta_dt <= 0:
        raise ValueError("stage step must be positive")
    N, m = U_prev.shape
    traces = PiecewiseConstantTraces(N, m, bc)
    return _solve_stage(
        traces, theta_dt / h, U_prev, U_prev, law, policy, cfg, stage
    )


def corrector_stage(
    rhs: np.ndarray,
    a_kk_dt: float,
    h: float,
    fw: FrozenWeights,
    guess: np.ndarray,
    law: ConservationLaw,
    bc: BoundaryCondition,
    policy: ViscosityPolicy,
    cfg: NewtonConfig,
    stage: int = 0,
):
    """One high-order DIRK stage with frozen-weight linearized traces."""
    traces = FrozenTraces(fw, bc)
    return _solve_stage(traces, a_kk_dt / h, rhs, guess, law, policy, cfg, stage)


@dataclass
class StageRecord:
    """Everything the entropy indicators and the limiter need from a step."""

    predictor_fields: list = field(default_factory=list)
    predictor_fluxes: list = field(default_factory=list)
    predictor_entropy_fluxes: list = field(default_factory=list)
    corrector_fields: list = field(default_factory=list)
    corrector_fluxes: list = field(default_factory=list)
    corrector_entropy_fluxes: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    newton_iters_predictor: int = 0
    newton_iters_corrector: int = 0
    newton_stalled: int = 0


def run_stages(
    U_n: np.ndarray,
    dt: float,
    h: float,
    law: ConservationLaw,
    bc: BoundaryCondition,
    policy: ViscosityPolicy,
    tableau: ButcherTableau,
    cfg: NewtonConfig,
    lw: LinearWeights = LinearWeights(),
) -> StageRecord:
    """Advance all predictor and corrector stages of one time step."""
    theta = theta_coefficients(tableau.c)
    rec = StageRecord()
    U_prev = U_n
    for k in range(tableau.stages):
        sol = predictor_stage(
            U_prev, theta[k] * dt, h, law, bc, policy, cfg, stage=k
        )
        U_prev = sol.field
        rec.predictor_fields.append(sol.field)
        rec.predictor_fluxes.append(sol.flux)
        rec.predictor_entropy_fluxes.append(sol.entropy_flux)
        rec.newton_iters_predictor += sol.iterations
        rec.newton_stalled += sol.stalled
    flux_diffs: list[np.ndarray] = []
    for k in range(tableau.stages):
        rhs = U_n.copy()
        for i in range(k):
            rhs -= (dt / h) * tableau.A[k, i] * flux_diffs[i]
        fw = freeze_weights(
            rec.predictor_fields[k],
            h,
            lw,
            periodic=bc is BoundaryCondition.PERIODIC,
        )
        sol = corrector_stage(
            rhs,
            tableau.A[k, k] * dt,
            h,
            fw,
            rec.predictor_fields[k],
            law,
            bc,
            policy,
            cfg,
            stage=k,
        )
        rec.corrector_fields.append(sol.field)
        rec.corrector_fluxes.append(sol.flux)
        rec.corrector_entropy_fluxes.append(sol.entropy_flux)
        rec.frozen.append(fw)
        rec.newton_iters_corrector += sol.iterations
        rec.newton_stalled += sol.stalled
        flux_diffs.append(sol.flux[1:] - sol.flux[:-1])
    return rec


def quinpi_step(
    U_n: np.ndarray,
    dt: float,
    h: float,
    law: ConservationLaw,
    bc: BoundaryCondition,
    policy: ViscosityPolicy,
    tableau: ButcherTableau,
    newton_cfg: NewtonConfig,
    limiter_cfg,
    lw: LinearWeights = LinearWeights(),
):
    """One full time step: stages, entropy indicators, a-posteriori limiting.

    Returns (field, EntropyReport, StageRecord). The returned field is the
    high-order update when nothing is marked, otherwise the flux-limited one.
    """
    from .limiter import (
        _weighted_psi_total,
        flux_limited_update,
        gauss_entropy_average,
        mark_cells,
        s1_production,
        s3_production,
        time_limit,
    )

    rec = run_stages(U_n, dt, h, law, bc, policy, tableau, newton_cfg, lw)
    theta = theta_coefficients(tableau.c)
    s1 = s1_production(
        U_n, rec.predictor_fields[-1], rec.predictor_entropy_fluxes, theta, dt, h, law
    )
    no_lim = np.zeros(U_n.shape[0] + 1, dtype=bool)
    U_unl = flux_limited_update(
        U_n, dt, h, rec.predictor_fluxes, rec.corrector_fluxes, theta, tableau.b, no_lim
    )
    psi_total = _weighted_psi_total(
        rec.predictor_entropy_fluxes,
        rec.corrector_entropy_fluxes,
        theta,
        tableau.b,
        no_lim,
    )
    periodic = bc is BoundaryCondition.PERIODIC
    qbar_n = gauss_entropy_average(law.entropy, U_n, h, lw, periodic=periodic)
    with np.errstate(invalid="ignore", over="ignore"):
        qbar_unl = gauss_entropy_average(law.entropy, U_unl, h, lw, periodic=periodic)
        s3 = s3_production(qbar_n, qbar_unl, psi_total, dt, h)
    marks = mark_cells(s1, s3, limiter_cfg, h)
    U, report = time_limit(
        U_n,
        dt,
        h,
        law,
        bc,
        s1,
        s3,
        marks,
        rec.predictor_fluxes,
        rec.corrector_fluxes,
        rec.predictor_entropy_fluxes,
        rec.corrector_entropy_fluxes,
        theta,
        tableau.b,
        limiter_cfg,
        lw,
        qbar_n=qbar_n,
    )
    return U, report, rec
