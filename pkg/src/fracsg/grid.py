"""Uniform square grids, discrete inner products and the five-point Laplacian.

Grid functions hold interior values only, shape ``(M-1, M-1)`` indexed
``[i-1, j-1]`` for node ``(x_i, y_j)``; boundary values are zero implicitly.
Reductions go through ``np.sum`` (pairwise summation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    L: float
    M: int

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError(f"need M >= 2 intervals, got {self.M}")
        if self.L <= 0.0:
            raise ValueError(f"edge length must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M - 1, self.M - 1)

    def interior_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (``ij`` indexing) of interior node coordinates."""
        x = np.arange(1, self.M) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def full_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of all nodes, boundary included."""
        x = np.arange(self.M + 1) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def sample(self, fn, *args) -> GridFunction:
        X, Y = self.interior_coords()
        return GridFunction(self, np.broadcast_to(np.asarray(fn(X, Y, *args), dtype=float), self.shape))

    def zeros(self) -> GridFunction:
        return GridFunction(self, np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"expected interior shape {self.grid.shape}, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: GridFunction) -> GridFunction:
        _same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        _same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> GridFunction:
        return GridFunction(self.grid, c * self.values)

    __rmul__ = __mul__


def _same_grid(U: GridFunction, V: GridFunction) -> None:
    if U.grid != V.grid:
        raise ValueError(f"grid mismatch: {U.grid} vs {V.grid}")


# {{{ array kernels


def lap_array(u: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian of interior values with zero ghosts."""
    out = -4.0 * u
    out[1:, :] += u[:-1, :]
    out[:-1, :] += u[1:, :]
    out[:, 1:] += u[:, :-1]
    out[:, :-1] += u[:, 1:]
    return out / (h * h)


def lap_full_array(full: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian at interior nodes of a full ``(M+1, M+1)`` array."""
    return (
        full[:-2, 1:-1] + full[2:, 1:-1] + full[1:-1, :-2] + full[1:-1, 2:] - 4.0 * full[1:-1, 1:-1]
    ) / (h * h)


def _pad(u: np.ndarray) -> np.ndarray:
    return np.pad(u, 1)


def grad_inner_array(u: np.ndarray, v: np.ndarray, h: float) -> float:
    up, vp = _pad(u), _pad(v)
    # x-fluxes: i = 1..M, j = 1..M-1; y-fluxes: i = 1..M-1, j = 1..M
    dxu = np.diff(up[:, 1:-1], axis=0)
    dxv = np.diff(vp[:, 1:-1], axis=0)
    dyu = np.diff(up[1:-1, :], axis=1)
    dyv = np.diff(vp[1:-1, :], axis=1)
    # h^2 * (1/h)^2 cancels
    return float(np.sum(dxu * dxv) + np.sum(dyu * dyv))


# }}}


def inner(U: GridFunction, V: GridFunction) -> float:
    _same_grid(U, V)
    return U.grid.h ** 2 * float(np.sum(U.values * V.values))


def laplacian_5pt(U: GridFunction) -> GridFunction:
    return GridFunction(U.grid, lap_array(U.values, U.grid.h))


def grad_inner(U: GridFunction, V: GridFunction) -> float:
    _same_grid(U, V)
    return grad_inner_array(U.values, V.values, U.grid.h)


def seminorm_h1(U: GridFunction) -> float:
    return float(np.sqrt(grad_inner(U, U)))


def norm_l2(U: GridFunction) -> float:
    return float(np.sqrt(inner(U, U)))


def norm_max(U: GridFunction) -> float:
    return float(np.max(np.abs(U.values))) if U.values.size else 0.0
