"""Convergence sweeps, two-mesh error estimates, truncation scans and property checks."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fracsg.coefficients import apply_caputo, caputo_exact_power, coeff_row_g, coeff_rows, verify_properties
from fracsg.grid import GridFunction, SpatialGrid, grad_inner_array, seminorm_h1
from fracsg.manufactured import Example1Spec, Example2Spec
from fracsg.mesh import FractionalOrder, build_graded_mesh, mesh_from_nodes
from fracsg.stepper import ProblemSpec, SolverError, SolverState, run

log = logging.getLogger(__name__)

EXAMPLES = ("ex1", "ex2")
CSV_HEADER = ("example", "alpha", "r", "N", "M", "error", "rate", "expected")


def example_spec(example: str, alpha: float):
    if example == "ex1":
        return Example1Spec(alpha)
    if example == "ex2":
        return Example2Spec(alpha)
    raise ValueError(f"unknown example {example!r}")


# {{{ errors and rates


def error_h1_exact(state: SolverState, exact) -> float:
    """H1-seminorm of ``U^N - exact(., t_N)``; ``exact`` takes ``(x, y, t)``."""
    X, Y = state.grid.interior_coords()
    n = state.n
    diff = state.u_array(n) - exact(X, Y, state.mesh.t[n])
    return seminorm_h1(GridFunction(state.grid, diff))


def max_residual(state: SolverState) -> float:
    """Largest recomputed residual of either discrete equation over all levels."""
    return max((max(ra, rb) for ra, rb in state.residuals), default=0.0)


def _final_run(spec: ProblemSpec, r: float, N: int, grid: SpatialGrid, tol: float) -> tuple[np.ndarray, float]:
    mesh = build_graded_mesh(spec.T, N, r, spec.order)
    state = run(spec, mesh, grid, tol=tol)
    return state.u_array(N), max_residual(state)


def _final_field(spec: ProblemSpec, r: float, N: int, grid: SpatialGrid, tol: float) -> np.ndarray:
    return _final_run(spec, r, N, grid, tol)[0]


def two_mesh_error(
    spec: ProblemSpec, r: float, N: int, M: int, tol: float = 1e-14, N_fine: int | None = None
) -> float:
    """``|| grad_h (U^N - V^{2N}) ||`` with both runs on the same grading.

    ``N_fine`` overrides the fine step count (``2N`` by default).
    """
    grid = SpatialGrid(spec.L, M)
    N_fine = 2 * N if N_fine is None else N_fine
    try:
        coarse = _final_field(spec, r, N, grid, tol)
    except SolverError as exc:
        raise SolverError(f"coarse run (N={N}) failed: {exc}") from exc
    try:
        fine = coarse if N_fine == N else _final_field(spec, r, N_fine, grid, tol)
    except SolverError as exc:
        raise SolverError(f"fine run (N={N_fine}) failed: {exc}") from exc
    d = coarse - fine
    return math.sqrt(grad_inner_array(d, d, grid.h))


def rates(errors) -> list[float]:
    """``log2(E_k / E_{k+1})`` for successive doublings."""
    e = np.asarray(errors, dtype=float)
    if e.size < 2:
        raise ValueError("need at least two errors")
    if np.any(~(e > 0.0)):
        raise ValueError("errors must be positive")
    return [float(x) for x in np.log2(e[:-1] / e[1:])]


def expected_order(r: float, beta: float) -> float | None:
    """``min(2, r)``; ``None`` at the logarithmic case ``r = 3 - beta``."""
    if abs(r - (3.0 - beta)) < 1e-12:
        return None
    return min(2.0, r)


# }}}


# {{{ sweeps


@dataclass
class SweepConfig:
    """One table: every ``(alpha, r)`` series over the resolution list.

    ``pairing`` is ``"M=N"`` (``M`` follows ``N``), ``"fixed_M"`` (single
    ``M``, varying ``N``) or ``"fixed_N"`` (single ``N``, varying ``M``).
    """

    example: str
    alphas: list[float]
    rs: list[float]
    Ns: list[int]
    Ms: list[int] = field(default_factory=list)
    pairing: str = "M=N"
    tol: float = 1e-14
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.example not in EXAMPLES:
            raise ValueError(f"unknown example {self.example!r}")
        if not self.alphas or not self.rs or not self.Ns:
            raise ValueError("alpha, r and N lists must be non-empty")
        if self.pairing not in ("M=N", "fixed_M", "fixed_N"):
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if self.pairing == "fixed_M" and len(self.Ms) != 1:
            raise ValueError("fixed_M pairing needs exactly one M")
        if self.pairing == "fixed_N":
            if len(self.Ns) != 1 or not self.Ms:
                raise ValueError("fixed_N pairing needs one N and a list of M")
        for a in self.alphas:
            FractionalOrder(a)
        if any(r < 1.0 for r in self.rs):
            raise ValueError("grading exponents must be >= 1")
        if any(n < 2 for n in self.Ns) or any(m < 2 for m in self.Ms):
            raise ValueError("N and M must be >= 2")
        self.Ns = [int(n) for n in self.Ns]
        self.Ms = [int(m) for m in self.Ms]

    def resolutions(self) -> list[tuple[int, int]]:
        if self.pairing == "M=N":
            return [(n, n) for n in self.Ns]
        if self.pairing == "fixed_M":
            return [(n, self.Ms[0]) for n in self.Ns]
        return [(self.Ns[0], m) for m in self.Ms]


@dataclass
class RateRow:
    example: str
    alpha: float
    r: float
    N: int
    M: int
    error: float
    rate: float | None = None
    expected: float | None = None
    failure: str | None = None
    residual: float = math.nan

    def csv_fields(self) -> list[str]:
        exp = "log" if self.expected is None else f"{self.expected:g}"
        return [
            self.example,
            f"{self.alpha:g}",
            f"{self.r:g}",
            str(self.N),
            str(self.M),
            f"{self.error:.4e}",
            "" if self.rate is None else f"{self.rate:.4f}",
            exp,
        ]


@dataclass
class RateTable:
    rows: list[RateRow] = field(default_factory=list)

    def series(self, alpha: float, r: float) -> list[RateRow]:
        return [row for row in self.rows if row.alpha == alpha and row.r == r]

    def errors(self, alpha: float, r: float) -> list[float]:
        return [row.error for row in self.series(alpha, r)]

    def rates(self, alpha: float, r: float) -> list[float]:
        return [row.rate for row in self.series(alpha, r) if row.rate is not None]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in self.rows:
                w.writerow(row.csv_fields())

    def write_plot_data(self, out_dir, varying: str = "N") -> list[Path]:
        out = []
        keys = dict.fromkeys((row.example, row.alpha, row.r) for row in self.rows)
        for example, alpha, r in keys:
            path = Path(out_dir) / f"{example}_a{alpha:g}_r{r:g}.dat"
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(f"# {varying} error\n")
                for row in self.series(alpha, r):
                    if row.example == example:
                        x = row.N if varying == "N" else row.M
                        fh.write(f"{x} {row.error:.4e}\n")
            out.append(path)
        return out

    def format(self) -> str:
        lines = [" ".join(f"{h:>10}" for h in CSV_HEADER)]
        for row in self.rows:
            lines.append(" ".join(f"{x:>10}" for x in row.csv_fields()))
        return "\n".join(lines)


def _series_errors(example: str, alpha: float, r: float, res: list[tuple[int, int]], tol: float):
    """``(error, failure, max residual)`` per cell; a failed cell has ``error = nan``."""
    ex = example_spec(example, alpha)
    spec = ex.problem()
    out: list[tuple[float, str | None, float]] = []
    if example == "ex1":
        for N, M in res:
            try:
                mesh = build_graded_mesh(spec.T, N, r, spec.order)
                state = run(spec, mesh, SpatialGrid(spec.L, M), tol=tol)
                out.append((error_h1_exact(state, ex.exact), None, max_residual(state)))
            except (SolverError, ValueError) as exc:
                log.error("ex1 alpha=%g r=%g N=%d M=%d failed: %s", alpha, r, N, M, exc)
                out.append((math.nan, str(exc), math.nan))
        return out

    # two-mesh: the fine run for N is the coarse run for 2N, so cache finals
    finals: dict[tuple[int, int], tuple[np.ndarray, float] | str] = {}

    def final(N: int, M: int):
        if (N, M) not in finals:
            try:
                finals[N, M] = _final_run(spec, r, N, SpatialGrid(spec.L, M), tol)
            except (SolverError, ValueError) as exc:
                finals[N, M] = f"N={N}: {exc}"
        return finals[N, M]

    for N, M in res:
        a, b = final(N, M), final(2 * N, M)
        if isinstance(a, str) or isinstance(b, str):
            msg = a if isinstance(a, str) else b
            log.error("ex2 alpha=%g r=%g N=%d M=%d failed: %s", alpha, r, N, M, msg)
            out.append((math.nan, msg, math.nan))
            continue
        d = a[0] - b[0]
        h = spec.L / M
        out.append((math.sqrt(grad_inner_array(d, d, h)), None, max(a[1], b[1])))
    return out


def _series_task(args):
    return _series_errors(*args)


def run_sweep(config: SweepConfig, jobs: int = 1) -> RateTable:
    """Run every series of the config and assemble the rate table.

    Rows are ordered by the config (alpha outer, r inner), independent of
    completion order.  Outputs are written when ``out_dir`` is set.
    """
    res = config.resolutions()
    tasks = [(config.example, a, r, res, config.tol) for a in config.alphas for r in config.rs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_series_task, tasks))
    else:
        results = [_series_task(t) for t in tasks]

    spatial = config.pairing == "fixed_N"
    table = RateTable()
    for (example, alpha, r, _, _), errs in zip(tasks, results):
        beta = alpha / 2.0
        exp = 2.0 if spatial else expected_order(r, beta)
        prev, prev_x = None, None
        for (N, M), (err, failure, resid) in zip(res, errs):
            x = M if spatial else N
            rate = None
            # rates only between doubled resolutions
            if prev is not None and x == 2 * prev_x and prev > 0.0 and err > 0.0:
                rate = math.log2(prev / err)
            table.rows.append(RateRow(example, alpha, r, N, M, err, rate, exp, failure, resid))
            prev, prev_x = err, x
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.write_csv(out / f"{config.example}_{'spatial' if spatial else 'temporal'}.csv")
        table.write_plot_data(out, varying="M" if spatial else "N")
    return table


# }}}


# {{{ truncation scan


@dataclass
class TruncationScan:
    mu: float
    alpha: float
    r: float
    Ns: list[int]
    final_errors: list[float]
    max_errors: list[float]
    predicted: float

    @property
    def rates(self) -> list[float]:
        return rates(self.final_errors)

    @property
    def fitted_order(self) -> float:
        """Least-squares slope of ``-log(error)`` against ``log(N)``."""
        slope = np.polyfit(np.log(self.Ns), np.log(self.final_errors), 1)[0]
        return float(-slope)

    def table(self) -> RateTable:
        t = RateTable()
        prev = None
        for N, e in zip(self.Ns, self.final_errors):
            rate = None if prev is None else math.log2(prev / e)
            t.rows.append(RateRow("trunc", self.alpha, self.r, N, 0, e, rate, self.predicted))
            prev = e
        return t


def predicted_truncation_order(mu: float, beta_prime: float, r: float) -> float:
    """Decay order in ``N`` at a fixed final time.

    The bound ``tau_1^{mu-b} (tau_1/t_n)^{min(1+b, (3-b)/r - mu + b)}`` with
    ``tau_1 ~ N^{-r}`` and ``t_n`` fixed gives ``min(r (1 + mu), 3 - b)``.
    """
    return r * (mu - beta_prime) + r * min(1.0 + beta_prime, (3.0 - beta_prime) / r - mu + beta_prime)


def truncation_scan(mu: float, alpha: float, r: float, Ns, T: float = 1.0) -> TruncationScan:
    """Error of the discrete Caputo operator of order ``alpha/2`` applied to ``t^mu``.

    ``mu = 1`` is the exactness case (errors at rounding level).
    """
    beta = alpha / 2.0
    final, worst = [], []
    for N in Ns:
        mesh = build_graded_mesh(T, N, r, FractionalOrder(alpha))
        v = mesh.t**mu
        errs = []
        for n in range(1, N + 1):
            row = coeff_row_g(n, mesh, beta)
            approx = apply_caputo(row, v[: n + 1])
            errs.append(abs(approx - caputo_exact_power(mu, beta, mesh.star[n])))
        final.append(errs[-1])
        worst.append(max(errs))
    return TruncationScan(mu, alpha, r, list(Ns), final, worst, predicted_truncation_order(mu, beta, r))


# }}}


# {{{ property suite


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


@dataclass
class SuiteReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, name: str, ok: bool, detail: str) -> None:
        self.checks.append(CheckResult(name, bool(ok), detail))

    def format(self) -> str:
        return "\n".join(f"{'PASS' if c.ok else 'FAIL'} {c.name}: {c.detail}" for c in self.checks)


def key_inequality_gap(rows, sigma: float, v1: np.ndarray, v2: np.ndarray, h: float) -> float:
    """LHS minus RHS of the two-field energy inequality at the last level.

    ``v1``, ``v2`` are histories of shape ``(n+1, ...)`` and ``rows[n-1]``
    is the level-``n`` coefficient row.
    """
    n = v1.shape[0] - 1
    row = rows[n - 1]

    def ip(a, b):
        return h * h * float(np.sum(a * b))

    lhs = 0.0
    for v in (v1, v2):
        d = apply_caputo(row, v)
        lhs += ip(d, sigma * v[n] + (1.0 - sigma) * v[n - 1])
    xi = np.sqrt([ip(v1[k], v1[k]) + ip(v2[k], v2[k]) for k in range(n + 1)])
    rhs = (sigma * xi[n] + (1.0 - sigma) * xi[n - 1]) * apply_caputo(row, xi)
    return lhs - rhs


def summation_by_parts_defect(M: int, rng: np.random.Generator, L: float = 1.0) -> float:
    from fracsg.grid import grad_inner, inner, laplacian_5pt

    grid = SpatialGrid(L, M)
    U = GridFunction(grid, rng.standard_normal(grid.shape))
    V = GridFunction(grid, rng.standard_normal(grid.shape))
    a = -inner(U, laplacian_5pt(V))
    b = grad_inner(U, V)
    return abs(a - b) / max(1.0, abs(b))


def linear_exactness_defect(mesh, beta: float) -> float:
    """Max relative defect of the discrete operator on ``v = 1 + 2 t`` over all levels."""
    v = 1.0 + 2.0 * mesh.t
    worst = 0.0
    for row in coeff_rows(mesh, beta):
        exact = 2.0 * caputo_exact_power(1.0, beta, mesh.star[row.n])
        approx = apply_caputo(row, v[: row.n + 1])
        worst = max(worst, abs(approx - exact) / (1.0 + abs(exact)))
    return worst


def property_suite(
    alphas=(1.1, 1.3, 1.5, 1.7, 1.9),
    rs=(1.0, 1.5, 2.0, 3.0),
    Ns=(16, 64, 256),
    *,
    seed: int = 20240601,
    quad_N: int = 16,
    sbp_sizes=(8, 16, 32),
    sbp_pairs: int = 100,
    key_trials: int = 100,
    key_levels=(1, 2, 5, 16),
    measure_p3: bool = False,
) -> SuiteReport:
    """P1/P2/P4 on graded meshes, coefficient cross-check, discrete identities."""
    from fracsg.coefficients import _a_vec, _b_vec, quad_a, quad_b

    report = SuiteReport()
    rng = np.random.default_rng(seed)

    for alpha in alphas:
        order = FractionalOrder(alpha)
        for r in rs:
            for N in Ns:
                mesh = _suite_mesh(N, r, order)
                rows = coeff_rows(mesh, order.beta)
                rep = verify_properties(rows, mesh, measure_p3=measure_p3)
                detail = f"alpha={alpha:g} r={r:g} N={N} rho={rep.rho:.4f}"
                if rep.m_c is not None:
                    detail += f" m_c={rep.m_c:.4f}"
                if not rep.ok:
                    detail += f" P1 fails at {rep.p1_failures[:5]} P2 fails at {rep.p2_failures[:5]}"
                report.add("P1/P2", rep.ok, detail)
                report.add("P4", rep.p4, detail)

            # closed form against adaptive Gauss-Kronrod
            mesh = build_graded_mesh(1.0, quad_N, r, order)
            worst = 0.0
            for n in range(quad_N):
                a = _a_vec(n, mesh, order.beta)
                for k in range(n + 1):
                    q = quad_a(n, k, mesh, order.beta)
                    worst = max(worst, abs(a[k] - q) / abs(q))
                b = _b_vec(n, mesh, order.beta)
                for k in range(n):
                    q = quad_b(n, k, mesh, order.beta)
                    worst = max(worst, abs(b[k] - q) / abs(q))
            report.add(
                "coefficients vs quadrature", worst <= 1e-10, f"alpha={alpha:g} r={r:g} N={quad_N} max rel {worst:.2e}"
            )

            mesh = build_graded_mesh(1.0, 64, r, order)
            d = linear_exactness_defect(mesh, order.beta)
            report.add("exact on linears", d <= 1e-10, f"alpha={alpha:g} r={r:g} N=64 max rel {d:.2e}")

    for M in sbp_sizes:
        worst = max(summation_by_parts_defect(M, rng) for _ in range(sbp_pairs))
        report.add("summation by parts", worst <= 1e-12, f"M={M} {sbp_pairs} pairs max rel {worst:.2e}")

    kshape = (7, 7)
    for alpha in (alphas[0], alphas[len(alphas) // 2], alphas[-1]):
        order = FractionalOrder(alpha)
        for r in (rs[0], rs[-1]):
            mesh = build_graded_mesh(1.0, max(key_levels), r, order)
            rows = coeff_rows(mesh, order.beta)
            worst = tight = math.inf
            for n in key_levels:
                for _ in range(key_trials):
                    v1 = rng.standard_normal((n + 1,) + kshape)
                    v2 = rng.standard_normal((n + 1,) + kshape)
                    worst = min(worst, key_inequality_gap(rows, order.sigma, v1, v2, 1.0 / 8))
                    # collinear fields with non-negative amplitudes attain equality
                    w = rng.standard_normal(kshape)
                    w /= np.sqrt(np.sum(w * w)) / 8.0
                    amp = rng.random(n + 1)[:, None, None]
                    v1 = amp * w
                    tight = min(tight, key_inequality_gap(rows, order.sigma, v1, 0.0 * v1, 1.0 / 8))
            report.add(
                "key inequality",
                worst >= -1e-10 and tight >= -1e-10,
                f"alpha={alpha:g} r={r:g} levels={list(key_levels)} min gap {worst:.3e}, "
                f"near-equality min gap {tight:.3e}",
            )
    return report


def _suite_mesh(N: int, r: float, order: FractionalOrder):
    # a single step has no grading; build it from its two nodes
    if N == 1:
        return mesh_from_nodes([0.0, 1.0], order, r=r)
    return build_graded_mesh(1.0, N, r, order)


def nonmonotone_mesh_report(alpha: float = 1.5, N: int = 16):
    """Properties on a mesh with alternating steps; failures are reported, not raised."""
    order = FractionalOrder(alpha)
    steps = np.where(np.arange(N) % 2 == 0, 1.0, 8.0)
    nodes = np.concatenate([[0.0], np.cumsum(steps)])
    mesh = mesh_from_nodes(nodes / nodes[-1], order)
    return verify_properties(coeff_rows(mesh, order.beta), mesh)


# }}}


def output_dir(default: str = "results") -> str:
    return os.environ.get("FRACSG_OUTPUT_DIR", default)


# {{{ comparison with reference tables


def band_misses(table: RateTable, family: str) -> list[str]:
    """Entries of ``table`` outside the reference bands.

    ``family`` is ``"spatial"``, ``"local"`` or ``"two_mesh"``.  Cells
    without a reference value are skipped; failed cells always count.
    """
    from fracsg import reference as ref

    if family == "spatial":
        vals, rts, ladder, band, rband = ref.SPATIAL, ref.SPATIAL_RATES, ref.SPATIAL_MS, ref.BAND_EXACT, ref.RATE_BAND_EXACT
    elif family == "local":
        vals, rts, ladder, band, rband = ref.LOCAL, ref.LOCAL_RATES, ref.LOCAL_NS, ref.BAND_EXACT, ref.RATE_BAND_EXACT
    elif family == "two_mesh":
        vals, rts, ladder, band, rband = (
            ref.TWO_MESH, ref.TWO_MESH_RATES, ref.TWO_MESH_NS, ref.BAND_TWO_MESH, ref.RATE_BAND_TWO_MESH,
        )
    else:
        raise ValueError(f"unknown table family {family!r}")

    misses = []
    keys = dict.fromkeys((row.alpha, row.r) for row in table.rows)
    for alpha, r in keys:
        series = table.series(alpha, r)
        key = (float(alpha), float(r))
        for row in series:
            x = row.M if family == "spatial" else row.N
            tag = f"alpha={alpha:g} r={r:g} {'M' if family == 'spatial' else 'N'}={x}"
            if row.failure:
                misses.append(f"{tag}: run failed ({row.failure})")
                continue
            want = vals.get(key, {}).get(x)
            if want is not None and not abs(row.error - want) <= band * want:
                misses.append(f"{tag}: error {row.error:.4e} vs {want:.4e}")
        xs = [row.M if family == "spatial" else row.N for row in series]
        for i, row in enumerate(series[1:], start=1):
            if row.rate is None or xs[i - 1] not in ladder or xs[i] not in ladder:
                continue
            j = ladder.index(xs[i - 1])
            if ladder.index(xs[i]) != j + 1 or key not in rts:
                continue
            want = rts[key][j]
            if not abs(row.rate - want) <= rband:
                misses.append(f"alpha={alpha:g} r={r:g} rate {xs[i-1]}->{xs[i]}: {row.rate:.4f} vs {want:.4f}")
        if family == "local" and series and series[-1].rate is not None and xs[-1] == ladder[-1]:
            exp = min(2.0, r)
            if not abs(series[-1].rate - exp) <= ref.TERMINAL_RATE_BAND:
                misses.append(f"alpha={alpha:g} r={r:g} terminal rate {series[-1].rate:.4f} vs order {exp:g}")
    return misses


# }}}
