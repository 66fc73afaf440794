"""Fractional orders and graded temporal meshes with offset (star) points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FractionalOrder:
    """Order ``alpha`` in (1, 2) of the time derivative.

    ``beta = alpha / 2`` is the order of each reduced equation and
    ``sigma = 1 - beta / 2`` the offset weight of the Alikhanov formula.
    """

    alpha: float

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")

    @property
    def beta(self) -> float:
        return self.alpha / 2.0

    @property
    def sigma(self) -> float:
        return 1.0 - self.beta / 2.0


def sigma_for(beta_prime: float) -> float:
    if not 0.0 < beta_prime < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {beta_prime}")
    return 1.0 - beta_prime / 2.0


@dataclass(frozen=True, eq=False)
class TemporalMesh:
    """Time nodes ``t[0..N]`` together with steps and offset points.

    ``tau`` and ``star`` are padded so that ``tau[n]`` and ``star[n]`` refer to
    step ``n`` directly; entry 0 of both is unused and set to 0.
    """

    T: float
    N: int
    r: float
    sigma: float
    t: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    star: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        t = self.t
        if t.shape != (self.N + 1,):
            raise ValueError("node array has the wrong length")
        if t[0] != 0.0 or t[-1] != self.T:
            raise ValueError("mesh must start at 0 and end at T")
        if np.any(self.tau[1:] <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if not 0.5 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [1/2, 1], got {self.sigma}")
        for arr in (self.t, self.tau, self.star):
            arr.setflags(write=False)

    @property
    def max_step(self) -> float:
        return float(self.tau[1:].max())


def _finish(T: float, N: int, r: float, sigma: float, t: np.ndarray) -> TemporalMesh:
    tau = np.zeros_like(t)
    tau[1:] = np.diff(t)
    star = np.zeros_like(t)
    star[1:] = t[1:] - (1.0 - sigma) * tau[1:]
    return TemporalMesh(T=T, N=N, r=r, sigma=sigma, t=t, tau=tau, star=star)


def _resolve_sigma(order: FractionalOrder | None, sigma: float | None) -> float:
    if order is not None and sigma is not None:
        raise ValueError("pass either order or sigma, not both")
    if order is not None:
        return order.sigma
    if sigma is None:
        raise ValueError("an order or an explicit sigma is required")
    return float(sigma)


def build_graded_mesh(
    T: float,
    N: int,
    r: float,
    order: FractionalOrder | None = None,
    *,
    sigma: float | None = None,
) -> TemporalMesh:
    """Standard graded mesh ``t_n = T (n/N)^r``.

    Each node is evaluated from the power law directly and ``t_N`` is pinned
    to ``T`` so the final time is bit-exact.
    """
    if N < 2:
        raise ValueError(f"need N >= 2 steps, got {N}")
    if r < 1.0:
        raise ValueError(f"grading exponent must be >= 1, got {r}")
    if T <= 0.0:
        raise ValueError(f"final time must be positive, got {T}")
    s = _resolve_sigma(order, sigma)
    t = T * (np.arange(N + 1, dtype=float) / N) ** r
    t[0] = 0.0
    t[-1] = T
    return _finish(float(T), int(N), float(r), s, t)


def mesh_from_nodes(
    nodes, order: FractionalOrder | None = None, *, sigma: float | None = None, r: float = float("nan")
) -> TemporalMesh:
    """Mesh from arbitrary nodes; all invariants are re-checked."""
    t = np.array(nodes, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need at least two nodes")
    s = _resolve_sigma(order, sigma)
    return _finish(float(t[-1]), t.size - 1, r, s, t)


def mesh_ratio_rho(mesh: TemporalMesh) -> float:
    """``max_k tau_k / tau_{k+1}`` over consecutive steps; 0 for a single step."""
    tau = mesh.tau[1:]
    if tau.size < 2:
        return 0.0
    return float(np.max(tau[:-1] / tau[1:]))


def quasi_graded_constant(mesh: TemporalMesh) -> float:
    """Measured ``max_n tau_n / (tau_1^{1/r} t_n^{1-1/r})``."""
    r = mesh.r
    t = mesh.t[1:]
    tau = mesh.tau[1:]
    return float(np.max(tau / (tau[0] ** (1.0 / r) * t ** (1.0 - 1.0 / r))))
