import logging

import numpy as np
import pytest

from fracsg.coefficients import apply_caputo, coeff_rows
from fracsg.grid import GridFunction, SpatialGrid, inner, lap_array
from fracsg.manufactured import Example1Spec
from fracsg.mesh import FractionalOrder, build_graded_mesh
from fracsg.stepper import (
    IndefiniteOperator,
    NoConvergence,
    ProblemSpec,
    SolverState,
    StepOperator,
    assemble_step,
    dump_trajectory,
    eliminate_p,
    linear_solve,
    run,
    step_residuals,
)


def zero_problem(alpha=1.5, kappa=0.0, **kw):
    return ProblemSpec(
        order=FractionalOrder(alpha), nu=1.0, kappa=kappa, psi=lambda x, y: np.zeros_like(x), L=1.0, T=1.0, **kw
    )


def random_state(spec, N=6, M=5, level=3, seed=0):
    mesh = build_graded_mesh(spec.T, N, 2.0, spec.order)
    grid = SpatialGrid(spec.L, M)
    state = SolverState.initial(spec, mesh, grid)
    rng = np.random.default_rng(seed)
    state.ubar[: level + 1] = rng.standard_normal((level + 1,) + grid.shape)
    state.p[1 : level + 1] = rng.standard_normal((level,) + grid.shape)
    state.lap0 = lap_array(state.ubar[0], grid.h)
    state.n = level
    return state, coeff_rows(mesh, spec.order.beta)


def test_problem_validation():
    with pytest.raises(ValueError):
        zero_problem().__class__(FractionalOrder(1.5), 0.0, 1.0, lambda x, y: x, 1.0, 1.0)
    with pytest.raises(ValueError):
        ProblemSpec(FractionalOrder(1.5), 1.0, 1.0, lambda x, y: x, L=1.0, T=-1.0)


# {{{ elimination of P


def test_stationary_first_step_gives_zero():
    spec = zero_problem()
    state, rows = random_state(spec, level=0)
    rel = eliminate_p(1, rows[0], state)
    np.testing.assert_array_equal(rel(state.ubar[0]), 0.0)


def test_scalar_hand_evaluation():
    spec = zero_problem()
    mesh = build_graded_mesh(1.0, 4, 2.0, spec.order)
    state = SolverState.initial(spec, mesh, SpatialGrid(1.0, 2))
    state.ubar[0] = 0.3
    state.ubar[1] = 0.5
    state.p[1] = -0.2
    state.n = 1
    row = coeff_rows(mesh, spec.order.beta)[1]
    g1, g2 = row.g
    s = spec.order.sigma
    B = (-g2 * 0.5 + g1 * (0.5 - 0.3) - (1 - s) * (-0.2)) / s
    rel = eliminate_p(2, row, state)
    assert rel.coef == pytest.approx(g2 / s, rel=1e-15)
    assert rel.B[0, 0] == pytest.approx(B, rel=1e-13)


@pytest.mark.parametrize("level", [0, 1, 4])
def test_relation_reproduces_scheme_equation(level):
    spec = zero_problem()
    state, rows = random_state(spec, level=level, seed=level)
    n = level + 1
    rel = eliminate_p(n, rows[n - 1], state)
    cand = np.random.default_rng(9).standard_normal(state.grid.shape)
    pn = rel(cand)
    hist = np.concatenate([state.ubar[:n], cand[None]])
    s = state.sigma
    lhs = apply_caputo(rows[n - 1], hist)
    np.testing.assert_allclose(lhs, s * pn + (1 - s) * state.p[n - 1], rtol=1e-13, atol=1e-13 * np.max(np.abs(lhs)))


def test_level_mismatch_raises():
    spec = zero_problem()
    state, rows = random_state(spec, level=2)
    with pytest.raises(ValueError):
        eliminate_p(3, rows[1], state)
    with pytest.raises(ValueError):
        eliminate_p(2, rows[1], state)


# }}}


# {{{ operator and linear solve


def test_operator_symmetric():
    rng = np.random.default_rng(3)
    g = SpatialGrid(1.0, 9)
    op = StepOperator(diag=2.0 + rng.random(g.shape), nu_sigma=0.3, h=g.h)
    for _ in range(10):
        U = rng.standard_normal(g.shape)
        V = rng.standard_normal(g.shape)
        a = inner(GridFunction(g, op(U)), GridFunction(g, V))
        b = inner(GridFunction(g, U), GridFunction(g, op(V)))
        assert a == pytest.approx(b, rel=1e-11)


def test_assembled_operator_symmetric_positive():
    spec = Example1Spec(1.5).problem()
    mesh = build_graded_mesh(spec.T, 8, 2.0, spec.order)
    grid = SpatialGrid(1.0, 8)
    state = SolverState.initial(spec, mesh, grid)
    row = coeff_rows(mesh, spec.order.beta)[0]
    X, Y = grid.interior_coords()
    op, rhs, _ = assemble_step(1, row, state, spec, -2 * np.pi**2 * state.phi, spec.forcing(X, Y, mesh.star[1]))
    rng = np.random.default_rng(4)
    for _ in range(5):
        U = rng.standard_normal(grid.shape)
        V = rng.standard_normal(grid.shape)
        assert np.sum(op(U) * V) == pytest.approx(np.sum(U * op(V)), rel=1e-11)
        assert np.sum(op(U) * U) > 0


def test_diagonal_limit():
    g = SpatialGrid(1.0, 6)
    rhs = np.random.default_rng(5).standard_normal(g.shape)
    op = StepOperator(diag=np.full(g.shape, 1e12), nu_sigma=1.0, h=g.h)
    x, info = linear_solve(op, rhs)
    # the stencil part perturbs the diagonal limit by about 8 nu / (h^2 diag) ~ 3e-10
    np.testing.assert_allclose(x, rhs / 1e12, rtol=1e-8)


def test_zero_rhs():
    g = SpatialGrid(1.0, 6)
    op = StepOperator(diag=np.ones(g.shape), nu_sigma=1.0, h=g.h)
    x, info = linear_solve(op, np.zeros(g.shape))
    assert np.all(x == 0) and info.iterations == 0


def test_poisson_eigenpair():
    g = SpatialGrid(1.0, 16)
    X, Y = g.interior_coords()
    e = np.sin(2 * np.pi * X) * np.sin(np.pi * Y)
    lam = (4 / g.h**2) * (np.sin(2 * np.pi * g.h / 2) ** 2 + np.sin(np.pi * g.h / 2) ** 2)
    op = StepOperator(diag=np.zeros(g.shape), nu_sigma=1.0, h=g.h)
    x, info = linear_solve(op, e)
    np.testing.assert_allclose(x, e / lam, rtol=1e-10, atol=1e-13)
    assert info.energy_monotone


def test_energy_monotone_on_random_system():
    g = SpatialGrid(1.0, 20)
    rng = np.random.default_rng(6)
    op = StepOperator(diag=0.1 + rng.random(g.shape), nu_sigma=0.7, h=g.h)
    x, info = linear_solve(op, rng.standard_normal(g.shape))
    assert info.iterations > 5
    assert info.energy_monotone


def test_indefinite_detected():
    g = SpatialGrid(1.0, 6)
    op = StepOperator(diag=np.full(g.shape, -1e6), nu_sigma=1.0, h=g.h)
    with pytest.raises(IndefiniteOperator):
        linear_solve(op, np.ones(g.shape))


def test_iteration_cap():
    g = SpatialGrid(1.0, 32)
    op = StepOperator(diag=np.zeros(g.shape), nu_sigma=1.0, h=g.h)
    rhs = np.random.default_rng(7).standard_normal(g.shape)
    with pytest.raises(NoConvergence):
        linear_solve(op, rhs, maxiter=3)


# }}}


# {{{ full runs


def test_zero_data_stays_zero():
    spec = zero_problem(kappa=1.0)
    mesh = build_graded_mesh(1.0, 8, 2.0, spec.order)
    state = run(spec, mesh, SpatialGrid(1.0, 6))
    assert state.n == 8
    assert np.all(state.ubar == 0) and np.all(state.p == 0)


def test_residuals_first_step_example1():
    ex = Example1Spec(1.5)
    spec = ex.problem()
    mesh = build_graded_mesh(spec.T, 4, 1.5, spec.order)
    state = run(spec, mesh, SpatialGrid(1.0, 4))
    assert max(state.residuals[0]) <= 1e-10
    assert len(state.residuals) == 4


def test_residual_evaluator_detects_corruption():
    ex = Example1Spec(1.5)
    spec = ex.problem()
    mesh = build_graded_mesh(spec.T, 4, 1.5, spec.order)
    grid = SpatialGrid(1.0, 4)
    state = run(spec, mesh, grid)
    rows = coeff_rows(mesh, spec.order.beta)
    X, Y = grid.interior_coords()
    lap_phi = -2 * np.pi**2 * state.phi
    f = spec.forcing(X, Y, mesh.star[4])
    state.ubar[4, 1, 1] += 1e-6
    ra, rb = step_residuals(4, rows, state, spec, lap_phi, f)
    assert rb > 1e-8


@pytest.mark.parametrize("alpha,r,want", [(1.5, 1.5, 1.6334e-3), (1.1, 2.0, 5.1921e-4)])
def test_manufactured_final_error(alpha, r, want):
    from fracsg.experiments import error_h1_exact

    ex = Example1Spec(alpha)
    spec = ex.problem()
    state = run(spec, build_graded_mesh(spec.T, 16, r, spec.order), SpatialGrid(1.0, 16))
    assert error_h1_exact(state, ex.exact) == pytest.approx(want, rel=0.02)
    assert all(info.energy_monotone for info in state.solves)


def test_linearized_nonlinearity_is_second_order():
    # F(U^{n,*}) - f(U^{n,*}) shrinks like the square of the step increment
    ex = Example1Spec(1.5)
    spec = ex.problem()
    s = spec.order.sigma
    ratios = []
    for N in (8, 16, 32):
        st = run(spec, build_graded_mesh(spec.T, N, 1.0, spec.order), SpatialGrid(1.0, 8))
        u1, u0 = st.u_array(N), st.u_array(N - 1)
        F = np.sin(u0) + s * np.cos(u0) * (u1 - u0)
        gap = np.max(np.abs(F - np.sin(s * u1 + (1 - s) * u0)))
        ratios.append(gap / np.max(np.abs(u1 - u0)) ** 2)
    assert max(ratios) < 1.0 and max(ratios) / min(ratios) < 2.0


def test_mismatched_inputs():
    spec = zero_problem()
    with pytest.raises(ValueError):
        run(spec, build_graded_mesh(1.0, 4, 1.0, FractionalOrder(1.3)), SpatialGrid(1.0, 4))
    with pytest.raises(ValueError):
        run(spec, build_graded_mesh(1.0, 4, 1.0, spec.order), SpatialGrid(2.0, 4))


def test_indefinite_step_reports_level():
    spec = zero_problem(alpha=1.1, kappa=200.0)
    mesh = build_graded_mesh(1.0, 4, 1.0, spec.order)
    with pytest.raises(IndefiniteOperator) as exc:
        run(spec, mesh, SpatialGrid(1.0, 4))
    assert exc.value.level == 1


def test_strong_grading_warns(caplog):
    spec = zero_problem(alpha=1.5)
    mesh = build_graded_mesh(1.0, 4, 6.0, spec.order)
    with caplog.at_level(logging.WARNING):
        run(spec, mesh, SpatialGrid(1.0, 3))
    assert any("4/beta" in rec.message for rec in caplog.records)


def test_missing_laplacian_falls_back(caplog):
    spec = zero_problem(phi=lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    mesh = build_graded_mesh(1.0, 4, 1.0, spec.order)
    with caplog.at_level(logging.WARNING):
        state = run(spec, mesh, SpatialGrid(1.0, 6))
    assert any("Laplacian" in rec.message for rec in caplog.records)
    assert state.n == 4


def test_level_accessors():
    spec = zero_problem()
    state = run(spec, build_graded_mesh(1.0, 3, 1.0, spec.order), SpatialGrid(1.0, 3))
    assert state.u_at(3).values.shape == (2, 2)
    with pytest.raises(IndexError):
        state.ubar_at(4)


def test_trajectory_dump(tmp_path):
    ex = Example1Spec(1.5)
    spec = ex.problem()
    state = run(spec, build_graded_mesh(spec.T, 4, 1.5, spec.order), SpatialGrid(1.0, 4))
    path = tmp_path / "traj.csv"
    dump_trajectory(state, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# M=4")
    assert len(lines) == 1 + 5
    rec = [float(v) for v in lines[-1].split(",")]
    assert rec[0] == 4 and rec[1] == 0.5
    np.testing.assert_array_equal(rec[2:11], state.ubar[4].ravel())
    np.testing.assert_array_equal(rec[11:], state.p[4].ravel())


# }}}
