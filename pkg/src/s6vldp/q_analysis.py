"""q-series, the two discrete shift laws and the q-Laplace transform of the height.

The shifts are ``chi``, supported on the non-negative integers with
``P(chi <= k) = (q^{k+1}; q)_inf``, and ``S``, supported on all integers with
mass proportional to ``q^{k(k-1)/2}``. Their sum has the CDF
``P(chi + S <= n) = prod_{i>=0} 1 / (1 + q^{n+i})``, which turns the
q-Laplace transform of the height into a shifted tail probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .s6v_model import ModelParams, height_distribution

_EPS = 1e-17


def eta(q: float) -> float:
    return math.log(1.0 / q)


def _check_q(q: float) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def _terms_needed(q: float, start_mag: float = 1.0) -> int:
    """Number of factors after which ``start_mag * q^j`` drops below machine epsilon."""
    return int(math.ceil((math.log(_EPS) - math.log(max(start_mag, 1e-300))) / math.log(q))) + 2


def q_pochhammer(x: float, q: float, n: int | None = None) -> float:
    """``(x; q)_n = prod_{j<n} (1 - x q^j)``; ``n=None`` gives the infinite product."""
    _check_q(q)
    if n is None:
        n = max(_terms_needed(q, abs(x)), 1)
    if n <= 0:
        return 1.0
    j = np.arange(n)
    f = 1.0 - x * q ** j
    if (f <= 0).any():
        return float(np.prod(f))
    return float(np.exp(np.sum(np.log(f))))


def log_inv_product(n: float, q: float, zeta: float = 1.0) -> float:
    """``log prod_{i>=0} 1/(1 + zeta q^{n+i})``, stable for negative ``n``."""
    _check_q(q)
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    if zeta == 0:
        return 0.0
    lz = math.log(zeta)
    lq = math.log(q)
    # exponent of each term: log(zeta) + (n+i) log q, decreasing in i
    first = lz + n * lq
    m = int(max(0, math.ceil(-first / -lq))) + _terms_needed(q) + 1
    e = first + lq * np.arange(m)
    return float(-np.sum(np.logaddexp(0.0, e)))


def inv_product(n: float, q: float, zeta: float = 1.0) -> float:
    return math.exp(log_inv_product(n, q, zeta))


def cdf_shift_closed(n: float, q: float) -> float:
    """Closed form of ``P(chi + S <= n)``."""
    return inv_product(n, q)


@dataclass(frozen=True)
class ShiftDistributions:
    """Truncated probability tables for ``chi`` and ``S``.

    ``chi_pmf[k]`` is ``P(chi = k)`` for ``0 <= k < len``; ``s_pmf`` holds
    ``P(S = k)`` for ``k`` in ``s_support``.
    """

    q: float
    chi_pmf: np.ndarray
    s_support: np.ndarray
    s_pmf: np.ndarray


def log_partition_S(q: float, half_width: int | None = None) -> float:
    """``log sum_k q^{k(k-1)/2}``, summed symmetrically about ``k = 1/2``."""
    _check_q(q)
    if half_width is None:
        half_width = _s_half_width(q)
    k = np.arange(-half_width + 1, half_width + 1)
    e = k * (k - 1) / 2 * math.log(q)
    return float(np.logaddexp.reduce(e))


def partition_S(q: float, half_width: int | None = None) -> float:
    return math.exp(log_partition_S(q, half_width))


def _s_half_width(q: float) -> int:
    # q^{k(k-1)/2} < eps once k(k-1)/2 > log(eps)/log(q)
    t = math.log(_EPS) / math.log(q)
    return int(math.ceil((1 + math.sqrt(1 + 8 * t)) / 2)) + 2


def pmf_S(k, q: float):
    """``P(S = k) = q^{k(k-1)/2} / Z``; accepts arrays."""
    return np.exp(log_pmf_S(k, q))


def log_pmf_S(k, q: float):
    _check_q(q)
    k = np.asarray(k, dtype=float)
    return k * (k - 1) / 2 * math.log(q) - log_partition_S(q)


def pmf_chi(k, q: float):
    """``P(chi = k) = (q^{k+1}; q)_inf - (q^k; q)_inf`` for ``k >= 0``."""
    _check_q(q)
    k = np.atleast_1d(np.asarray(k, dtype=int))
    out = np.zeros(k.shape)
    for idx, kk in np.ndenumerate(k):
        if kk < 0:
            continue
        upper = q_pochhammer(q ** (kk + 1), q)
        lower = q_pochhammer(q ** kk, q) if kk > 0 else 0.0
        out[idx] = upper - lower
    return out if out.size > 1 else float(out[0])


def shift_distributions(q: float, chi_terms: int | None = None, s_half_width: int | None = None) -> ShiftDistributions:
    _check_q(q)
    if chi_terms is None:
        chi_terms = _terms_needed(q) + 5
    if s_half_width is None:
        s_half_width = _s_half_width(q)
    chi = np.atleast_1d(pmf_chi(np.arange(chi_terms), q))
    ks = np.arange(-s_half_width + 1, s_half_width + 1)
    return ShiftDistributions(q, chi, ks, pmf_S(ks, q))


def cdf_shift_convolution(n: int, dists: ShiftDistributions) -> float:
    """``P(chi + S <= n)`` by direct convolution of the truncated tables."""
    total = 0.0
    chi_cdf_rev = np.cumsum(dists.chi_pmf)
    for k, ps in zip(dists.s_support, dists.s_pmf):
        m = n - k
        if m < 0:
            continue
        total += ps * (chi_cdf_rev[min(m, len(chi_cdf_rev) - 1)])
    return float(total)


def sample_S(q: float, size: int, rng: np.random.Generator) -> np.ndarray:
    d = shift_distributions(q)
    return rng.choice(d.s_support, size=size, p=d.s_pmf / d.s_pmf.sum())


def sample_chi(q: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw using ``P(chi <= k) = (q^{k+1}; q)_inf``."""
    d = shift_distributions(q)
    cdf = np.cumsum(d.chi_pmf)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.random(size), side="right")


def q_laplace_of_height(params: ModelParams, M: int, N: int, zeta: float) -> float:
    """``E[prod_{i>=0} 1 / (1 + zeta q^{h(M,N)+i})]`` from the exact height law."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    q = float(params.q)
    dist = height_distribution(params.as_float(), M, N)
    return float(sum(float(p) * inv_product(r, q, zeta) for r, p in enumerate(dist) if p))


def shifted_tail(params: ModelParams, M: int, N: int, s: float, dists: ShiftDistributions | None = None) -> float:
    """``P(h(M,N) - chi - S >= sN)`` by convolving the exact height law with the shifts.

    Integer ``sN`` is needed for the identity with the q-Laplace transform at
    ``zeta = q^{-sN}``; otherwise the level is rounded down to an integer.
    """
    q = float(params.q)
    if dists is None:
        dists = shift_distributions(q)
    dist = height_distribution(params.as_float(), M, N)
    level = s * N
    total = 0.0
    for r, p in enumerate(dist):
        if p:
            total += float(p) * cdf_shift_convolution(math.floor(r - level + 1e-12), dists)
    return total


def qlaplace_product(zeta: float, q: float, offset: float = 0) -> float:
    """``prod_{i>=0} 1 / (1 + zeta q^{offset+i})``."""
    return inv_product(offset, q, zeta)


def cdf_shift(n: int, q: float, dists: ShiftDistributions | None = None) -> tuple[float, float]:
    """``P(chi + S <= n)`` from the product formula and from the convolution."""
    return cdf_shift_closed(n, q), cdf_shift_convolution(n, dists or shift_distributions(q))
