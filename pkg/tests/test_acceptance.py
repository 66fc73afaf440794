"""End-to-end acceptance checks; each test prints one ``CRITERION k: PASS|FAIL`` line.

Run on its own with ``pytest tests/test_acceptance.py -v``.  The whole file
takes about a minute on one core.
"""

import math

import pytest

from fracsg import reference as ref
from fracsg.experiments import SweepConfig, band_misses, property_suite, run_sweep, truncation_scan
from fracsg.manufactured import Example1Spec
from oracles import forcing_residual, sample_points

ALPHAS = [1.1, 1.5, 1.9]
RS = [1.0, 1.5, 2.0]


@pytest.fixture
def report(capsys):
    def emit(k: int, ok: bool, detail: str, misses=()):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
            for m in list(misses)[:20]:
                print(f"    {m}")

    return emit


@pytest.fixture(scope="module")
def spatial_table():
    cfg = SweepConfig("ex1", [1.5], [1.5], [ref.SPATIAL_N], Ms=ref.SPATIAL_MS, pairing="fixed_N")
    return run_sweep(cfg)


@pytest.fixture(scope="module")
def local_table():
    return run_sweep(SweepConfig("ex1", ALPHAS, RS, ref.LOCAL_NS, pairing="M=N"))


@pytest.fixture(scope="module")
def two_mesh_table():
    cfg = SweepConfig("ex2", ALPHAS, RS, ref.TWO_MESH_NS, Ms=[ref.TWO_MESH_M], pairing="fixed_M")
    return run_sweep(cfg)


def _reference_count(table, values, key_of):
    return sum(1 for row in table.rows if key_of(row) in values.get((row.alpha, row.r), {}))


def test_criterion_1_spatial_table(spatial_table, report):
    misses = band_misses(spatial_table, "spatial")
    n = _reference_count(spatial_table, ref.SPATIAL, lambda r: r.M)
    ok = not misses and n == 4
    errs = ", ".join(f"{row.error:.4e}" for row in spatial_table.rows)
    report(1, ok, f"spatial errors [{errs}] within 2%, rates within 0.1 ({n} reference cells)", misses)
    assert ok, misses


def test_criterion_2_local_tables(local_table, report):
    misses = band_misses(local_table, "local")
    n = _reference_count(local_table, ref.LOCAL, lambda r: r.N)
    ok = not misses and n == 36
    report(2, ok, f"{n} local errors within 2%, rates within 0.1, terminal rates within 0.15 of min(2,r)", misses)
    assert ok, misses


def test_criterion_3_two_mesh_tables(two_mesh_table, report):
    misses = band_misses(two_mesh_table, "two_mesh")
    n = _reference_count(two_mesh_table, ref.TWO_MESH, lambda r: r.N)
    # 45 cells less the illegible alpha=1.5, r=2, N=256 entry
    ok = not misses and n == 44
    skipped = next(r for r in two_mesh_table.rows if (r.alpha, r.r, r.N) == (1.5, 2.0, 256))
    report(
        3,
        ok,
        f"{n} two-mesh errors within 5%, rates within 0.15 (unverifiable cell computed as {skipped.error:.4e})",
        misses,
    )
    assert ok, misses


def test_criterion_4_property_suite(report):
    suite = property_suite(
        alphas=(1.1, 1.3, 1.5, 1.7, 1.9),
        rs=(1.0, 1.5, 2.0, 3.0),
        Ns=(16, 64, 256),
        sbp_sizes=(8, 16, 32),
        sbp_pairs=100,
        key_trials=100,
    )
    failed = [f"{c.name}: {c.detail}" for c in suite.checks if not c.ok]
    report(4, suite.ok, f"{len(suite.checks)} property checks", failed)
    assert suite.ok, failed


def test_criterion_5_truncation_scan(report):
    misses, worst = [], 0.0
    for alpha in ALPHAS:
        for mu in (alpha / 2, alpha):
            for r in (1.0, 2.0):
                scan = truncation_scan(mu, alpha, r, [32, 64, 128, 256, 512])
                gap = abs(scan.fitted_order - scan.predicted)
                worst = max(worst, gap)
                if not gap <= 0.15:
                    misses.append(
                        f"alpha={alpha} mu={mu} r={r}: fitted {scan.fitted_order:.4f} vs {scan.predicted:.4f}"
                    )
    report(5, not misses, f"12 scans, largest |fitted - predicted| = {worst:.3f} (band 0.15)", misses)
    assert not misses, misses


def test_criterion_6_residuals(spatial_table, local_table, two_mesh_table, report):
    rows = spatial_table.rows + local_table.rows + two_mesh_table.rows
    failed = [f"{r.example} alpha={r.alpha} r={r.r} N={r.N} M={r.M}: {r.failure}" for r in rows if r.failure]
    worst = max((r.residual for r in rows if not math.isnan(r.residual)), default=math.nan)
    ok = not failed and worst <= 1e-9
    report(6, ok, f"largest step residual over {len(rows)} acceptance cells = {worst:.2e} (limit 1e-9)", failed)
    assert ok, failed


def test_criterion_7_forcing_oracle(report):
    worst = 0.0
    for alpha in ALPHAS:
        ex = Example1Spec(alpha)
        for x, y, t in sample_points(20, ex.T, seed=7 + int(100 * alpha)):
            worst = max(worst, forcing_residual(ex, x, y, t))
    ok = worst <= 1e-5
    report(7, ok, f"largest PDE residual of the manufactured forcing over 60 samples = {worst:.2e} (limit 1e-5)")
    assert ok
