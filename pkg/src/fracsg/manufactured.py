"""Problem data for the two benchmark problems and scalar power-law test functions."""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np

from fracsg.mesh import FractionalOrder
from fracsg.stepper import ProblemSpec


def _S(x, y):
    return np.sin(pi * x) * np.sin(pi * y)


@dataclass(frozen=True)
class Example1Spec:
    """Manufactured solution ``u = (t + t^alpha) sin(pi x) sin(pi y)`` on the unit square."""

    alpha: float
    nu: float = 0.1
    kappa: float = 1.0
    T: float = 0.5
    L: float = 1.0

    def amplitude(self, t):
        return t + t**self.alpha

    def exact(self, x, y, t):
        return self.amplitude(t) * _S(x, y)

    def laplacian(self, x, y, t):
        return -2.0 * pi**2 * self.exact(x, y, t)

    def forcing(self, x, y, t):
        # D^alpha t = 0 and D^alpha t^alpha = Gamma(alpha + 1)
        S = _S(x, y)
        a = self.amplitude(t)
        return gamma(self.alpha + 1.0) * S + 2.0 * self.nu * pi**2 * a * S + self.kappa**2 * np.sin(a * S)

    def problem(self) -> ProblemSpec:
        return ProblemSpec(
            order=FractionalOrder(self.alpha),
            nu=self.nu,
            kappa=self.kappa,
            psi=lambda x, y: np.zeros_like(x),
            phi=_S,
            laplacian_phi=lambda x, y: -2.0 * pi**2 * _S(x, y),
            forcing=self.forcing,
            L=self.L,
            T=self.T,
        )


def exact_u1(x, y, t, alpha: float):
    return Example1Spec(alpha).exact(x, y, t)


def forcing1(x, y, t, alpha: float, nu: float = 0.1):
    return Example1Spec(alpha, nu=nu).forcing(x, y, t)


@dataclass(frozen=True)
class Example2Spec:
    """``psi = exp(cos x cos y)``, ``phi = 0`` on ``(0, pi)^2``; no closed-form solution.

    ``psi`` does not vanish on the boundary.  The unknowns live on interior
    nodes with a zero boundary for ``t > 0``; with ``psi_on_boundary`` (the
    default) the initial level keeps the boundary samples of ``psi`` in its
    Laplacian, which is the construction that reproduces the two-mesh reference values.
    """

    alpha: float
    nu: float = 1.0
    kappa: float = 1.0
    T: float = 0.5
    L: float = pi
    psi_on_boundary: bool = True

    @staticmethod
    def psi(x, y):
        return np.exp(np.cos(x) * np.cos(y))

    def problem(self) -> ProblemSpec:
        return ProblemSpec(
            order=FractionalOrder(self.alpha),
            nu=self.nu,
            kappa=self.kappa,
            psi=self.psi,
            phi=None,
            laplacian_phi=lambda x, y: np.zeros_like(x),
            forcing=None,
            L=self.L,
            T=self.T,
            psi_on_boundary=self.psi_on_boundary,
        )


def example2_data(alpha: float = 1.5) -> ProblemSpec:
    return Example2Spec(alpha).problem()


@dataclass(frozen=True)
class PowerFunction:
    """``v(t) = t^mu`` with its first three derivatives."""

    mu: float

    def __post_init__(self) -> None:
        if not (0.0 < self.mu < 1.0 or 1.0 < self.mu < 2.0):
            raise ValueError(f"mu must lie in (0,1) or (1,2), got {self.mu}")

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** self.mu

    def derivative(self, t, order: int = 1):
        t = np.asarray(t, dtype=float)
        c = 1.0
        for j in range(order):
            c *= self.mu - j
        return c * t ** (self.mu - order)


def scalar_test_fn(mu: float) -> PowerFunction:
    return PowerFunction(mu)
