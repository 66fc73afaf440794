"""Linearized Alikhanov time stepping for the reduced sine-Gordon system.

With ``ubar = u - t phi`` and ``p = D^beta ubar`` the problem becomes the pair

    D^beta p - nu Lap ubar + f(ubar + t phi) = nu t Lap phi + g
    D^beta ubar = p

discretized at the offset points ``t_n^*``.  The second equation is affine in
``P^n`` and is eliminated, leaving one symmetric positive definite system in
``Ubar^n`` per step:

    (g_nn^2/sigma) W - nu sigma Lap_h W + sigma kappa^2 cos(U^{n-1}) W = rhs

which is solved by Jacobi-preconditioned conjugate gradients.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from fracsg.coefficients import CoeffRow, coeff_rows
from fracsg.grid import GridFunction, SpatialGrid, lap_array, lap_full_array
from fracsg.mesh import FractionalOrder, TemporalMesh

log = logging.getLogger(__name__)

Sampler = Callable[..., np.ndarray]


class SolverError(RuntimeError):
    """Failure while advancing the scheme; ``level`` is the failing step."""

    def __init__(self, msg: str, level: int | None = None):
        super().__init__(msg if level is None else f"level {level}: {msg}")
        self.level = level


class IndefiniteOperator(SolverError):
    pass


class NoConvergence(SolverError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Data for ``D^alpha u - nu Lap u + kappa^2 sin(u) = forcing`` on ``(0, L)^2``.

    ``psi``/``phi``/``laplacian_phi`` take ``(x, y)``; ``forcing`` takes
    ``(x, y, t)``.  Missing ``phi`` means zero velocity, missing forcing means
    zero forcing, and a missing ``laplacian_phi`` falls back to the discrete
    Laplacian of the ``phi`` samples.

    ``psi_on_boundary`` keeps the boundary samples of ``psi`` in the initial
    level: the Laplacian of ``Ubar^0`` then sees them, while every later level
    has a zero boundary.  It only matters when ``psi`` does not vanish on the
    boundary.
    """

    order: FractionalOrder
    nu: float
    kappa: float
    psi: Sampler
    L: float
    T: float
    phi: Sampler | None = None
    laplacian_phi: Sampler | None = None
    forcing: Sampler | None = None
    psi_on_boundary: bool = False

    def __post_init__(self) -> None:
        if self.nu <= 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.T <= 0.0 or self.L <= 0.0:
            raise ValueError("T and L must be positive")


@dataclass
class StepOperator:
    """``W -> diag * W - nu_sigma * Lap_h W`` on interior arrays."""

    diag: np.ndarray
    nu_sigma: float
    h: float

    def __call__(self, w: np.ndarray) -> np.ndarray:
        return self.diag * w - self.nu_sigma * lap_array(w, self.h)

    def jacobi(self) -> np.ndarray:
        return self.diag + 4.0 * self.nu_sigma / self.h**2


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    energy: list[float] = field(default_factory=list)

    @property
    def energy_monotone(self) -> bool:
        e = np.asarray(self.energy)
        if e.size < 2:
            return True
        slack = 1e-12 * max(1.0, float(np.max(np.abs(e))))
        return bool(np.all(np.diff(e) <= slack))


@dataclass
class SolverState:
    """Trajectory of ``(Ubar^n, P^n)`` through level ``n``."""

    mesh: TemporalMesh
    grid: SpatialGrid
    sigma: float
    phi: np.ndarray
    ubar: np.ndarray
    p: np.ndarray
    lap0: np.ndarray | None = None
    n: int = 0
    residuals: list[tuple[float, float]] = field(default_factory=list)
    solves: list[SolveInfo] = field(default_factory=list)

    @classmethod
    def initial(cls, spec: ProblemSpec, mesh: TemporalMesh, grid: SpatialGrid) -> SolverState:
        X, Y = grid.interior_coords()
        shape = (mesh.N + 1,) + grid.shape
        ubar = np.zeros(shape)
        ubar[0] = np.broadcast_to(spec.psi(X, Y), grid.shape)
        phi = np.zeros(grid.shape) if spec.phi is None else np.broadcast_to(spec.phi(X, Y), grid.shape).astype(float)
        if spec.psi_on_boundary:
            lap0 = lap_full_array(np.asarray(spec.psi(*grid.full_coords()), dtype=float), grid.h)
        else:
            lap0 = lap_array(ubar[0], grid.h)
        return cls(
            mesh=mesh, grid=grid, sigma=spec.order.sigma, phi=phi, ubar=ubar, p=np.zeros(shape), lap0=lap0
        )

    def lap_ubar(self, k: int) -> np.ndarray:
        """Five-point Laplacian of ``Ubar^k``."""
        return self.lap0 if k == 0 else lap_array(self.ubar[k], self.grid.h)

    def ubar_at(self, k: int) -> GridFunction:
        self._check(k)
        return GridFunction(self.grid, self.ubar[k])

    def p_at(self, k: int) -> GridFunction:
        self._check(k)
        return GridFunction(self.grid, self.p[k])

    def u_array(self, k: int) -> np.ndarray:
        return self.ubar[k] + self.mesh.t[k] * self.phi

    def u_at(self, k: int) -> GridFunction:
        self._check(k)
        return GridFunction(self.grid, self.u_array(k))

    def _check(self, k: int) -> None:
        if not 0 <= k <= self.n:
            raise IndexError(f"level {k} not computed (current level {self.n})")


def _history_sum(g: np.ndarray, hist: np.ndarray, n: int) -> np.ndarray:
    """``sum_{k=1}^{n-1} g[k] (v^k - v^{k-1})`` from raw levels ``hist[0..n-1]``."""
    if n == 1:
        return np.zeros(hist.shape[1:])
    flat = hist[:n].reshape(n, -1)
    return (g[: n - 1] @ np.diff(flat, axis=0)).reshape(hist.shape[1:])


@dataclass
class PRelation:
    """``P^n = coef * Ubar^n + B = coef * (Ubar^n - Ubar^{n-1}) + offset``."""

    coef: float
    offset: np.ndarray
    ubar_prev: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return self.offset - self.coef * self.ubar_prev

    def __call__(self, ubar_n: np.ndarray) -> np.ndarray:
        return self.coef * (ubar_n - self.ubar_prev) + self.offset


def eliminate_p(n: int, row: CoeffRow, state: SolverState) -> PRelation:
    """Affine relation for ``P^n`` implied by ``delta Ubar^n = P^{n,*}``."""
    if row.n != n:
        raise ValueError(f"coefficient row is for level {row.n}, not {n}")
    if state.n != n - 1:
        raise ValueError(f"state is at level {state.n}, cannot eliminate level {n}")
    s = state.sigma
    hu = _history_sum(row.g, state.ubar, n)
    offset = (hu - (1.0 - s) * state.p[n - 1]) / s
    return PRelation(coef=row.last / s, offset=offset, ubar_prev=state.ubar[n - 1])


def assemble_step(
    n: int,
    row: CoeffRow,
    state: SolverState,
    spec: ProblemSpec,
    lap_phi: np.ndarray,
    forcing_star: np.ndarray | None = None,
) -> tuple[StepOperator, np.ndarray, PRelation]:
    """Operator and right-hand side for the increment ``W = Ubar^n - Ubar^{n-1}``.

    The operator is the one acting on ``Ubar^n``; posing the system for the
    increment keeps the right-hand side free of ``O(g_nn^2 |Ubar|)`` terms
    that would otherwise cancel.
    """
    s = state.sigma
    h = state.grid.h
    kap2 = spec.kappa**2
    gnn = row.last
    tau_n = state.mesh.tau[n]
    t_star = state.mesh.star[n]

    rel = eliminate_p(n, row, state)
    u_prev = state.u_array(n - 1)
    fp = kap2 * np.cos(u_prev)

    op = StepOperator(diag=gnn * rel.coef + s * fp, nu_sigma=spec.nu * s, h=h)

    rhs = spec.nu * t_star * lap_phi
    if forcing_star is not None:
        rhs = rhs + forcing_star
    rhs = (
        rhs
        - _history_sum(row.g, state.p, n)
        - gnn * (rel.offset - state.p[n - 1])
        + spec.nu * (s * lap_array(state.ubar[n - 1], h) + (1.0 - s) * state.lap_ubar(n - 1))
        - kap2 * np.sin(u_prev)
        - s * fp * tau_n * state.phi
    )
    return op, rhs, rel


def linear_solve(
    op: StepOperator,
    rhs: np.ndarray,
    tol: float = 1e-14,
    x0: np.ndarray | None = None,
    maxiter: int | None = None,
) -> tuple[np.ndarray, SolveInfo]:
    """Jacobi-preconditioned CG; stops once ``||r||_2 <= tol ||rhs||_2``.

    The quadratic energy ``x.Ax/2 - b.x`` is recorded at every iterate.
    """
    bnorm = float(np.sqrt(np.sum(rhs * rhs)))
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveInfo(0, 0.0, [0.0])
    if maxiter is None:
        maxiter = 10 * rhs.size
    minv = 1.0 / op.jacobi()

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - op(x)
    z = minv * r
    d = z.copy()
    rz = float(np.sum(r * z))
    energy = [-0.5 * float(np.sum(x * (rhs + r)))]
    rnorm = float(np.sqrt(np.sum(r * r)))
    it = 0
    while rnorm > tol * bnorm:
        if it >= maxiter:
            raise NoConvergence(f"CG stalled at relative residual {rnorm / bnorm:.3e} after {it} iterations")
        Ad = op(d)
        dAd = float(np.sum(d * Ad))
        if dAd <= 0.0:
            raise IndefiniteOperator("non-positive curvature encountered in CG")
        step = rz / dAd
        x += step * d
        r -= step * Ad
        z = minv * r
        rz_new = float(np.sum(r * z))
        d = z + (rz_new / rz) * d
        rz = rz_new
        rnorm = float(np.sqrt(np.sum(r * r)))
        energy.append(-0.5 * float(np.sum(x * (rhs + r))))
        it += 1
    return x, SolveInfo(it, rnorm / bnorm, energy)


def step_residuals(
    n: int,
    rows: list[CoeffRow],
    state: SolverState,
    spec: ProblemSpec,
    lap_phi: np.ndarray,
    forcing_star: np.ndarray | None = None,
) -> tuple[float, float]:
    """Max-norm residuals of both discrete equations at level ``n``.

    Everything is recomputed from the stored histories.
    """
    g = rows[n - 1].g
    s = state.sigma
    h = state.grid.h
    kap2 = spec.kappa**2

    d_ubar = np.tensordot(g, np.diff(state.ubar[: n + 1], axis=0), axes=(0, 0))
    d_p = np.tensordot(g, np.diff(state.p[: n + 1], axis=0), axes=(0, 0))
    p_star = s * state.p[n] + (1.0 - s) * state.p[n - 1]
    lap_star = s * lap_array(state.ubar[n], h) + (1.0 - s) * state.lap_ubar(n - 1)
    u_n, u_prev = state.u_array(n), state.u_array(n - 1)
    F = kap2 * np.sin(u_prev) + s * kap2 * np.cos(u_prev) * (u_n - u_prev)
    src = spec.nu * state.mesh.star[n] * lap_phi
    if forcing_star is not None:
        src = src + forcing_star

    res_a = d_p - spec.nu * lap_star + F - src
    res_b = d_ubar - p_star
    return float(np.max(np.abs(res_a))), float(np.max(np.abs(res_b)))


def _lap_phi(spec: ProblemSpec, grid: SpatialGrid, phi: np.ndarray) -> np.ndarray:
    X, Y = grid.interior_coords()
    if spec.laplacian_phi is not None:
        return np.broadcast_to(spec.laplacian_phi(X, Y), grid.shape).astype(float)
    if spec.phi is not None:
        log.warning("no analytic Laplacian of phi given; using the five-point stencil on samples")
    return lap_array(phi, grid.h)


def run(
    spec: ProblemSpec,
    mesh: TemporalMesh,
    grid: SpatialGrid,
    tol: float = 1e-14,
    check_residuals: bool = True,
    residual_tol: float = 1e-9,
) -> SolverState:
    """Advance the scheme to ``t_N``."""
    order = spec.order
    if abs(mesh.sigma - order.sigma) > 1e-14:
        raise ValueError("mesh offset points were built for a different order")
    if grid.L != spec.L:
        raise ValueError(f"grid edge {grid.L} does not match problem edge {spec.L}")
    if np.isfinite(mesh.r) and mesh.r >= 4.0 / order.beta:
        log.warning("grading r=%g is outside the range r < 4/beta covered by the analysis", mesh.r)

    rows = coeff_rows(mesh, order.beta)
    state = SolverState.initial(spec, mesh, grid)
    lap_phi = _lap_phi(spec, grid, state.phi)
    X, Y = grid.interior_coords()
    s = order.sigma
    kap2 = spec.kappa**2

    for n in range(1, mesh.N + 1):
        row = rows[n - 1]
        if row.last**2 / s <= s * kap2:
            raise IndefiniteOperator(
                f"g_nn^2/sigma={row.last**2 / s:.3e} does not dominate sigma*kappa^2={s * kap2:.3e}", n
            )
        forcing_star = None
        if spec.forcing is not None:
            forcing_star = np.broadcast_to(spec.forcing(X, Y, mesh.star[n]), grid.shape)
        op, rhs, rel = assemble_step(n, row, state, spec, lap_phi, forcing_star)
        try:
            w, info = linear_solve(op, rhs, tol=tol)
        except SolverError as exc:
            raise type(exc)(str(exc), n) from exc
        state.ubar[n] = state.ubar[n - 1] + w
        state.p[n] = rel.coef * w + rel.offset
        state.n = n
        state.solves.append(info)
        if check_residuals:
            ra, rb = step_residuals(n, rows, state, spec, lap_phi, forcing_star)
            state.residuals.append((ra, rb))
            if max(ra, rb) > residual_tol:
                raise SolverError(f"scheme residuals ({ra:.2e}, {rb:.2e}) exceed {residual_tol:.0e}", n)
    return state


def dump_trajectory(state: SolverState, path, levels=None) -> None:
    """Write ``n, t_n, Ubar^n..., P^n...`` records (row-major interior order)."""
    levels = range(state.n + 1) if levels is None else levels
    M = state.grid.M
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# M={M} L={state.grid.L!r} N={state.mesh.N} values={(M - 1) ** 2}\n")
        for k in levels:
            fields = np.concatenate([state.ubar[k].ravel(), state.p[k].ravel()])
            fh.write(f"{k},{float(state.mesh.t[k])!r}," + ",".join(repr(float(v)) for v in fields) + "\n")
