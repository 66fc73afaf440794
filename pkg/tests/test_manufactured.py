from dataclasses import dataclass
from math import e, gamma, pi

import numpy as np
import pytest

from fracsg.manufactured import (
    Example1Spec,
    Example2Spec,
    PowerFunction,
    example2_data,
    exact_u1,
    forcing1,
    scalar_test_fn,
)
from oracles import forcing_residual, numerical_caputo, sample_points


@pytest.mark.parametrize("alpha", [1.1, 1.5, 1.9])
def test_forcing_matches_numerical_residual(alpha):
    ex = Example1Spec(alpha)
    for x, y, t in sample_points(20, ex.T, seed=int(alpha * 10)):
        assert forcing_residual(ex, x, y, t) <= 1e-5


def test_oracle_rejects_wrong_forcing():
    @dataclass(frozen=True)
    class Broken(Example1Spec):
        def forcing(self, x, y, t):
            # drops the fractional-derivative term
            return super().forcing(x, y, t) - gamma(self.alpha + 1) * np.sin(pi * x) * np.sin(pi * y)

    assert forcing_residual(Broken(1.5), 0.3, 0.6, 0.2) > 0.1


def test_helpers_agree_with_spec_objects():
    x, y, t = 0.2, 0.7, 0.35
    assert exact_u1(x, y, t, 1.5) == Example1Spec(1.5).exact(x, y, t)
    assert forcing1(x, y, t, 1.5) == Example1Spec(1.5).forcing(x, y, t)


def test_initial_data_of_manufactured_solution():
    ex = Example1Spec(1.7)
    X, Y = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 7))
    np.testing.assert_array_equal(ex.exact(X, Y, 0.0), 0.0)
    # u_t(., 0) = phi: one-sided difference quotient tends to sin(pi x) sin(pi y)
    spec = ex.problem()
    dt = 1e-7
    np.testing.assert_allclose(ex.exact(X, Y, dt) / dt, spec.phi(X, Y), atol=1e-4)
    np.testing.assert_allclose(spec.laplacian_phi(X, Y), -2 * pi**2 * spec.phi(X, Y))


def test_manufactured_problem_fields():
    spec = Example1Spec(1.5).problem()
    assert (spec.nu, spec.kappa, spec.T, spec.L) == (0.1, 1.0, 0.5, 1.0)
    assert spec.order.alpha == 1.5


def test_example2_data():
    spec = example2_data(1.9)
    assert spec.L == pi and spec.nu == 1.0 and spec.T == 0.5
    assert spec.psi(np.array(0.0), np.array(0.0)) == pytest.approx(e)
    assert spec.psi(np.array(pi / 2), np.array(1.3)) == pytest.approx(1.0)
    assert spec.psi(np.array(pi), np.array(0.0)) == pytest.approx(1 / e)
    assert spec.phi is None and spec.forcing is None
    assert spec.psi_on_boundary
    assert not Example2Spec(1.5, psi_on_boundary=False).problem().psi_on_boundary


@pytest.mark.parametrize("mu", [0.4, 1.3, 1.8])
def test_power_function_derivatives(mu):
    v = PowerFunction(mu)
    t = 0.37
    assert v(t) == pytest.approx(t**mu)
    assert v.derivative(t, 1) == pytest.approx(mu * t ** (mu - 1))
    assert v.derivative(t, 3) == pytest.approx(mu * (mu - 1) * (mu - 2) * t ** (mu - 3))
    h = 1e-5
    assert v.derivative(t, 1) == pytest.approx((v(t + h) - v(t - h)) / (2 * h), rel=1e-8)


@pytest.mark.parametrize("mu", [0.0, 1.0, 2.0, -0.5])
def test_power_function_rejects_excluded_exponents(mu):
    with pytest.raises(ValueError):
        scalar_test_fn(mu)


def test_numerical_caputo_oracle_on_power():
    assert numerical_caputo(lambda s: s**1.5, 1.5, 0.7) == pytest.approx(gamma(2.5), rel=1e-10)
    assert numerical_caputo(lambda s: s, 1.3, 0.7) == pytest.approx(0.0, abs=1e-10)
