"""Numerical kernels: normal pdf/cdf, bivariate normal cdf, adaptive quadrature,
correlation repair and Cholesky, Monte-Carlo tail of the max of correlated normals.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc

from . import _kernels

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
RHO_CLAMP = 0.999
EIG_FLOOR = 1e-10
MC_CHUNK = 1 << 16


class NonConvergence(RuntimeError):
    pass


class NotPSD(np.linalg.LinAlgError):
    pass


def _scalar_or_array(out, u):
    return float(out) if np.ndim(u) == 0 else out


def phi(u):
    u = np.asarray(u, dtype=np.float64)
    return _scalar_or_array(INV_SQRT_2PI * np.exp(-0.5 * u * u), u)


def Phi(u):
    u = np.asarray(u, dtype=np.float64)
    return _scalar_or_array(0.5 * erfc(-u / SQRT2), u)


# ---------------------------------------------------------------------------
# bivariate normal cdf
# ---------------------------------------------------------------------------

_GL = {n: leggauss(n) for n in (6, 12, 20)}


def _bvnu(h: float, k: float, r: float) -> float:
    """P(X > h, Y > k) for standard bivariate normal with correlation r.

    Drezner-Wesolowsky reduction to a one-dimensional integral over the
    correlation, evaluated by Gauss-Legendre (after Genz, 2004).
    """
    if h == math.inf or k == math.inf:
        return 0.0
    if h == -math.inf:
        return 1.0 if k == -math.inf else Phi(-k)
    if k == -math.inf:
        return Phi(-h)

    ar = abs(r)
    x, w = _GL[6 if ar < 0.3 else 12 if ar < 0.75 else 20]
    hk = h * k
    bvn = 0.0
    if ar < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        sn = np.sin(asr * (1.0 - x) / 2.0)
        bvn = float(np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        bvn = bvn * asr / (4.0 * math.pi) + Phi(-h) * Phi(-k)
    else:
        if r < 0:
            k = -k
            hk = -hk
        if ar < 1.0:
            as_ = (1.0 - r) * (1.0 + r)
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 16.0
            asr = -(bs / as_ + hk) / 2.0
            if asr > -100:
                bvn = a * math.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0)
            if hk > -100:
                b = math.sqrt(bs)
                sp = math.sqrt(2.0 * math.pi) * Phi(-b / a)
                bvn -= math.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            a /= 2.0
            xs = (a * (x + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            asr = -(bs / xs + hk) / 2.0
            keep = asr > -100
            sp = 1.0 + c * xs * (1.0 + d * xs)
            ep = np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
            bvn += float(np.sum((a * w * np.exp(asr) * (ep - sp))[keep]))
            bvn = -bvn / (2.0 * math.pi)
        if r > 0:
            bvn += Phi(-max(h, k))
        elif h >= k:
            bvn = -bvn
        else:
            L = Phi(k) - Phi(h) if h < 0 else Phi(-h) - Phi(-k)
            bvn = L - bvn
    return min(1.0, max(0.0, bvn))


def bvn_cdf(h: float, k: float, rho: float) -> float:
    """P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation ``rho``."""
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie strictly inside (-1, 1)")
    return _bvnu(-float(h), -float(k), float(rho))


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7/15) quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[9, 11, 13]] = _WG[2::-1]


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    fx = np.asarray(f(0.5 * (a + b) + half * _NODES), dtype=np.float64)
    kron = half * float(_WK @ fx)
    gauss = half * float(_WG15 @ fx)
    return kron, abs(kron - gauss)


def quad(f, a: float, b: float, tol: float = 1e-10, max_subdivisions: int = 2000, breakpoints=()) -> float:
    """Adaptive Gauss-Kronrod integral of a vectorized ``f`` over ``[a, b]``.

    Bisects the interval with the largest error estimate until the summed
    estimate is below ``tol``. Raises :class:`NonConvergence` otherwise.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    edges = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    heap, total, err = [], 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = _gk15(f, lo, hi)
        total += val
        err += e
        heapq.heappush(heap, (-e, lo, hi, val))
    n = len(heap)
    while err > tol:
        if n >= max_subdivisions:
            raise NonConvergence(f"quad: error {err:.3g} > tol {tol:.3g} after {n} subintervals")
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n += 1
    return sign * total


# ---------------------------------------------------------------------------
# max of two correlated standard normals
# ---------------------------------------------------------------------------


def max2_density(u, rho: float):
    """Density of max(Z1, Z2) for standard normals with correlation ``rho``."""
    u = np.asarray(u, dtype=np.float64)
    s = math.sqrt((1.0 - rho) / (1.0 + rho))
    return _scalar_or_array(2.0 * INV_SQRT_2PI * np.exp(-0.5 * u * u) * 0.5 * erfc(-u * s / SQRT2), u)


def max2_pvalue_quad(v: float, rho: float, tol: float = 1e-11) -> float:
    """P(max(Z1, Z2) > v) by integrating the density."""
    f = lambda u: max2_density(u, rho)  # noqa: E731
    # density is below 2*phi(u); 13 sd of slack leaves < 1e-37 outside
    if v >= 0:
        return quad(f, v, v + 13.0, tol=tol)
    return 1.0 - quad(f, v - 13.0, v, tol=tol, breakpoints=(0.0,))


def max2_pvalue(v: float, rho: float, method: str = "bvn") -> float:
    """One-sided p-value of the max of two correlated standard normal components."""
    rho = float(np.clip(rho, -RHO_CLAMP, RHO_CLAMP))
    if method == "bvn":
        return min(1.0, max(0.0, 1.0 - bvn_cdf(v, v, rho)))
    if method == "quad":
        return min(1.0, max(0.0, max2_pvalue_quad(v, rho)))
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# correlation matrices and Monte Carlo
# ---------------------------------------------------------------------------


def clamp_correlation(C, limit: float = RHO_CLAMP) -> np.ndarray:
    C = np.array(C, dtype=np.float64)
    C = 0.5 * (C + C.T)
    C = np.clip(C, -limit, limit)
    np.fill_diagonal(C, 1.0)
    return C


def repair_correlation(C, floor: float = EIG_FLOOR) -> tuple[np.ndarray, bool]:
    """Floor eigenvalues at ``floor`` and rescale to unit diagonal.

    Returns the (possibly unchanged) matrix and whether a repair was applied.
    """
    C = np.array(C, dtype=np.float64)
    C = 0.5 * (C + C.T)
    vals, vecs = np.linalg.eigh(C)
    if vals.min() >= floor:
        return C, False
    R = (vecs * np.maximum(vals, floor)) @ vecs.T
    s = 1.0 / np.sqrt(np.diag(R))
    R = R * s[:, None] * s[None, :]
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return R, True


def factorize(C) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == C``. Raises :class:`NotPSD`."""
    try:
        return np.linalg.cholesky(np.asarray(C, dtype=np.float64))
    except np.linalg.LinAlgError as exc:
        raise NotPSD(str(exc)) from None


def repaired_factor(C, floor: float = EIG_FLOOR) -> tuple[np.ndarray, bool]:
    R, repaired = repair_correlation(C, floor)
    try:
        return factorize(R), repaired
    except NotPSD:
        # rounding may leave a pivot marginally negative; lift the floor until it factors
        f = floor
        while f < 1e-3:
            f *= 10.0
            R, _ = repair_correlation(C, f)
            try:
                return factorize(R), True
            except NotPSD:
                continue
        raise


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by an int or a tuple of ints."""
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def mvn_max_tail(C, v: float, draws: int = 1_000_000, seed=0, chunk: int = MC_CHUNK) -> tuple[float, float]:
    """Monte-Carlo estimate of P(max_i Z_i > v) for Z ~ N(0, C).

    Returns ``(p, se)`` with ``se = sqrt(p (1 - p) / draws)``. Draws are
    generated in fixed-size chunks, so the result depends only on ``seed``
    and ``draws``.
    """
    if draws < 1000:
        raise ValueError("draws must be at least 1000")
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    L, _ = repaired_factor(C)
    rng = make_rng(seed)
    d = C.shape[0]
    count, left = 0, int(draws)
    while left > 0:
        m = min(chunk, left)
        count += _kernels.count_max_exceed(rng.standard_normal((m, d)), L, v)
        left -= m
    p = count / draws
    return p, math.sqrt(p * (1.0 - p) / draws)
