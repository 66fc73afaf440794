"""Alikhanov L2-1sigma weights on nonuniform meshes.

For a Caputo order ``beta'`` in (0, 1) the discrete operator at level ``n`` is

    delta v^n = sum_{k=1}^{n} g[n, k] (v^k - v^{k-1})

evaluated at the offset point ``t_n^* = t_n - (1 - sigma) tau_n``. The weights
are assembled from the interval integrals ``a[n, k]`` (piecewise-linear part)
and ``b[n, k]`` (quadratic correction), both taken against the kernel
``(t_{n+1}^* - s)^{-beta'} / Gamma(1 - beta')``.

The integrals are evaluated from closed-form antiderivatives.  Both closed forms
suffer cancellation when the interval is short compared with its distance to
the evaluation point, so differences of powers go through ``expm1``/``log1p``
and the first moment uses an odd-power series in that regime.  An adaptive
Gauss-Kronrod path (QUADPACK) is kept as an alternative backend and as the
reference for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma

import numpy as np
from scipy import integrate

from fracsg.mesh import TemporalMesh, mesh_ratio_rho

# Series for the first moment is used when half-width/distance <= this.
_SERIES_SWITCH = 0.2
_SERIES_TERMS = 16


def _check_order(mesh: TemporalMesh, beta_prime: float) -> None:
    if not 0.0 < beta_prime < 1.0:
        raise ValueError(f"beta' must lie in (0, 1), got {beta_prime}")
    if abs(mesh.sigma - (1.0 - beta_prime / 2.0)) > 1e-14:
        raise ValueError(
            f"mesh offset sigma={mesh.sigma} does not match 1 - beta'/2 for beta'={beta_prime}"
        )


def _power_diff(y: np.ndarray, h: np.ndarray, p: float) -> np.ndarray:
    """``(y + h)^p - y^p`` for ``y > 0``, ``h > 0`` without cancellation."""
    return y**p * np.expm1(p * np.log1p(h / y))


def _first_moment(d: np.ndarray, h: np.ndarray, beta: float) -> np.ndarray:
    """``int_{-h/2}^{h/2} (d - u)^{-beta} u du`` for ``d > h/2``."""
    d = np.asarray(d, dtype=float)
    h = np.asarray(h, dtype=float)
    q = 0.5 * h / d
    out = np.empty(np.broadcast(d, h).shape)

    near = q > _SERIES_SWITCH
    if np.any(near):
        dn, hn = d[near], h[near]
        lo = dn - 0.5 * hn
        i0 = _power_diff(lo, hn, 1.0 - beta) / (1.0 - beta)
        i1 = _power_diff(lo, hn, 2.0 - beta) / (2.0 - beta)
        out[near] = dn * i0 - i1

    far = ~near
    if np.any(far):
        df, qf = d[far], q[far]
        # odd terms j of the binomial series of (1 - u/d)^{-beta}
        q2 = qf * qf
        term_c = beta  # (beta)_j / j! at j = 1
        qpow = q2 * qf  # q^{j+2}
        acc = term_c * qpow / 3.0
        for i in range(1, _SERIES_TERMS):
            j = 2 * i + 1
            term_c *= (beta + j - 2) * (beta + j - 1) / ((j - 1) * j)
            qpow = qpow * q2
            acc = acc + term_c * qpow / (j + 2)
        out[far] = 2.0 * df ** (2.0 - beta) * acc
    return out


def _a_vec(n: int, mesh: TemporalMesh, beta: float) -> np.ndarray:
    """``a[n, 0..n]`` against the kernel centred at ``t_{n+1}^*``."""
    t, tau = mesh.t, mesh.tau
    c = mesh.star[n + 1]
    g2 = gamma(2.0 - beta)
    out = np.empty(n + 1)
    y = c - t[1 : n + 1]
    out[:n] = _power_diff(y, tau[1 : n + 1], 1.0 - beta) / g2
    out[n] = (mesh.sigma * tau[n + 1]) ** (1.0 - beta) / g2
    return out


def _b_vec(n: int, mesh: TemporalMesh, beta: float) -> np.ndarray:
    """``b[n, 0..n-1]`` against the kernel centred at ``t_{n+1}^*``."""
    t, tau = mesh.t, mesh.tau
    c = mesh.star[n + 1]
    k = np.arange(n)
    mid = 0.5 * (t[k] + t[k + 1])
    J = _first_moment(c - mid, tau[k + 1], beta)
    return J * 2.0 / ((t[k + 2] - t[k]) * gamma(1.0 - beta))


# {{{ quadrature reference


def _kernel(c: float, beta: float):
    return lambda s: (c - s) ** (-beta)


def quad_a(n: int, k: int, mesh: TemporalMesh, beta_prime: float) -> float:
    """``a[n, k]`` by adaptive Gauss-Kronrod on the defining integral."""
    c = mesh.star[n + 1]
    if k == n:
        # endpoint singularity at c: QAWS weight (c - s)^{-beta'}
        val, _ = integrate.quad(lambda s: 1.0, mesh.t[n], c, weight="alg", wvar=(0.0, -beta_prime))
    else:
        val, _ = integrate.quad(
            _kernel(c, beta_prime), mesh.t[k], mesh.t[k + 1], epsabs=0.0, epsrel=1e-13, limit=200
        )
    return val / gamma(1.0 - beta_prime)


def quad_b(n: int, k: int, mesh: TemporalMesh, beta_prime: float) -> float:
    """``b[n, k]`` by adaptive Gauss-Kronrod on the defining integral."""
    t = mesh.t
    c = mesh.star[n + 1]
    mid = 0.5 * (t[k] + t[k + 1])
    d = c - mid
    # subtracting the kernel at the midpoint leaves the integral unchanged
    # (odd factor) and removes the cancellation between the two halves
    val, _ = integrate.quad(
        lambda s: d ** (-beta_prime) * np.expm1(-beta_prime * np.log1p(-(s - mid) / d)) * (s - mid),
        t[k],
        t[k + 1],
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return val * 2.0 / ((t[k + 2] - t[k]) * gamma(1.0 - beta_prime))


# }}}


def coeff_a(n: int, k: int, mesh: TemporalMesh, beta_prime: float, backend: str = "closed") -> float:
    _check_order(mesh, beta_prime)
    if not 0 <= k <= n or n + 1 > mesh.N:
        raise ValueError(f"invalid index pair (n={n}, k={k}) for N={mesh.N}")
    if backend == "quad":
        return quad_a(n, k, mesh, beta_prime)
    return float(_a_vec(n, mesh, beta_prime)[k])


def coeff_b(n: int, k: int, mesh: TemporalMesh, beta_prime: float, backend: str = "closed") -> float:
    _check_order(mesh, beta_prime)
    if n < 1 or not 0 <= k < n or n + 1 > mesh.N:
        raise ValueError(f"invalid index pair (n={n}, k={k}) for N={mesh.N}")
    if backend == "quad":
        return quad_b(n, k, mesh, beta_prime)
    return float(_b_vec(n, mesh, beta_prime)[k])


@dataclass(frozen=True, eq=False)
class CoeffRow:
    """Weights ``g[n, 1..n]`` of one time level (stored 0-based in ``g``)."""

    n: int
    g: np.ndarray = field(repr=False)
    beta_prime: float
    sigma: float
    p1: bool
    p2: bool

    @property
    def last(self) -> float:
        return float(self.g[-1])


def _assemble_g(n: int, a: np.ndarray, b: np.ndarray, tau: np.ndarray) -> np.ndarray:
    # a = a[n-1, 0..n-1], b = b[n-1, 0..n-2]
    if n == 1:
        return np.array([a[0] / tau[1]])
    num = a.copy()
    num[: n - 1] -= b
    num[1:] += b
    return num / tau[1 : n + 1]


def _flags(g: np.ndarray, sigma: float) -> tuple[bool, bool]:
    p1 = bool(g[0] > 0.0 and np.all(np.diff(g) > 0.0))
    p2 = True if g.size < 2 else bool((2.0 * sigma - 1.0) * g[-1] > sigma * g[-2])
    return p1, p2


def coeff_row_g(n: int, mesh: TemporalMesh, beta_prime: float, backend: str = "closed") -> CoeffRow:
    _check_order(mesh, beta_prime)
    if not 1 <= n <= mesh.N:
        raise ValueError(f"level n={n} outside 1..{mesh.N}")
    if backend == "closed":
        a = _a_vec(n - 1, mesh, beta_prime)
        b = _b_vec(n - 1, mesh, beta_prime) if n >= 2 else np.empty(0)
    elif backend == "quad":
        a = np.array([quad_a(n - 1, k, mesh, beta_prime) for k in range(n)])
        b = np.array([quad_b(n - 1, k, mesh, beta_prime) for k in range(n - 1)])
    else:
        raise ValueError(f"unknown backend {backend!r}")
    g = _assemble_g(n, a, b, mesh.tau)
    g.setflags(write=False)
    p1, p2 = _flags(g, mesh.sigma)
    return CoeffRow(n=n, g=g, beta_prime=beta_prime, sigma=mesh.sigma, p1=p1, p2=p2)


def coeff_rows(mesh: TemporalMesh, beta_prime: float, backend: str = "closed") -> list[CoeffRow]:
    """Rows for every level ``n = 1..N``."""
    return [coeff_row_g(n, mesh, beta_prime, backend) for n in range(1, mesh.N + 1)]


def apply_caputo(row: CoeffRow, hist) -> np.ndarray | float:
    """``sum_k g[n,k] (v^k - v^{k-1})`` for a history ``v^0..v^n``.

    ``hist`` is a sequence (or array with leading time axis) of scalars or
    arrays; the result has the shape of a single entry.
    """
    v = np.asarray(hist, dtype=float)
    if v.shape[0] != row.n + 1:
        raise ValueError(f"history has {v.shape[0]} entries, level {row.n} needs {row.n + 1}")
    dv = np.diff(v, axis=0)
    out = np.tensordot(row.g, dv, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def caputo_exact_power(mu: float, order: float, t):
    """Caputo derivative of ``t^mu`` of the given order, evaluated at ``t``.

    Orders in (0, 1) accept any ``mu > 0``; orders in (1, 2) accept ``mu == 1``
    (the derivative vanishes) or ``mu > 1``.
    """
    t = np.asarray(t, dtype=float)
    if 0.0 < order < 1.0:
        if mu <= 0.0:
            raise ValueError("need mu > 0 for an order in (0, 1)")
    elif 1.0 < order < 2.0:
        if mu == 1.0:
            return np.zeros_like(t) if t.ndim else 0.0
        if mu < 1.0:
            raise ValueError("need mu >= 1 for an order in (1, 2)")
    else:
        raise ValueError(f"unsupported order {order}")
    out = gamma(mu + 1.0) / gamma(mu + 1.0 - order) * t ** (mu - order)
    return float(out) if np.ndim(out) == 0 else out


# {{{ property verification


@dataclass
class PropertyReport:
    p1_failures: list[int]
    p2_failures: list[int]
    rho: float
    m_c: float | None
    n_rows: int

    @property
    def p1(self) -> bool:
        return not self.p1_failures

    @property
    def p2(self) -> bool:
        return not self.p2_failures

    @property
    def p4(self) -> bool:
        return self.rho <= 7.0 / 4.0

    @property
    def ok(self) -> bool:
        return self.p1 and self.p2


def _p3_ratios(row: CoeffRow, mesh: TemporalMesh) -> np.ndarray:
    """``int_{t_{k-1}}^{t_k} (t_n - s)^{-beta'} ds / Gamma(1-beta')`` over ``tau_k g[n,k]``.

    The substitution ``1 - u = w^{1/(1-beta')}`` on each interval removes the
    endpoint singularity at ``k = n``; the vector of integrals is then
    computed by adaptive Gauss-Kronrod.
    """
    n, beta = row.n, row.beta_prime
    t, tau = mesh.t, mesh.tau
    k = np.arange(1, n + 1)
    gap = t[n] - t[k]
    p = 1.0 / (1.0 - beta)

    def integrand(w: float) -> np.ndarray:
        dist = gap + tau[k] * w**p
        return tau[k] * p * w ** (p - 1.0) * dist ** (-beta)

    vals, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsrel=1e-10, epsabs=0.0)
    kernel = vals / gamma(1.0 - beta)
    return kernel / (tau[k] * row.g)


def verify_properties(rows: list[CoeffRow], mesh: TemporalMesh, measure_p3: bool = True) -> PropertyReport:
    """Check P1/P2 per row, P4 on the mesh and measure the P3 constant."""
    p1_fail = [row.n for row in rows if not row.p1]
    p2_fail = [row.n for row in rows if not row.p2]
    m_c = None
    if measure_p3 and rows:
        m_c = max(float(np.max(_p3_ratios(row, mesh))) for row in rows)
    return PropertyReport(
        p1_failures=p1_fail,
        p2_failures=p2_fail,
        rho=mesh_ratio_rho(mesh),
        m_c=m_c,
        n_rows=len(rows),
    )


# }}}
