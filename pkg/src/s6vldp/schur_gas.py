"""Schur specializations, the z-measure, and its discrete log-gas form.

Under ``z = N`` and ``z' = M - 1`` the z-measure matches the height through
the multiplicative functional ``prod_j (1 + zeta q^{lambda_{N-j} + j})``.
In shifted coordinates ``l_i = lambda_i + N - i`` the same weights become a
discrete log-gas whose energy splits into a normalising constant and a
logarithmic energy of the empirical measure of ``l / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .potential_theory import cell_kernel_column, gauss_cell_average
from .q_analysis import log_inv_product


@dataclass(frozen=True)
class Partition:
    parts: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(v) for v in self.parts)
        while p and p[-1] == 0:
            p = p[:-1]
        if any(v < 0 for v in p) or any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValueError(f"not a partition: {self.parts}")
        object.__setattr__(self, "parts", p)

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def size(self) -> int:
        return sum(self.parts)

    def padded(self, n: int) -> tuple[int, ...]:
        if len(self.parts) > n:
            raise ValueError(f"partition {self.parts} has more than {n} parts")
        return self.parts + (0,) * (n - len(self.parts))

    def shifted(self, N: int) -> np.ndarray:
        """``l_i = lambda_i + N - i`` for ``i = 1..N``; strictly decreasing."""
        lam = np.array(self.padded(N), dtype=np.int64)
        return lam + N - np.arange(1, N + 1)

    @classmethod
    def from_shifted(cls, ell: Sequence[int]) -> "Partition":
        ell = np.asarray(ell, dtype=np.int64)
        N = ell.size
        return cls(tuple(int(v) for v in ell - N + np.arange(1, N + 1)))


def partitions(max_parts: int, max_part: int) -> Iterator[Partition]:
    """All partitions with at most ``max_parts`` parts, each at most ``max_part``."""

    def rec(prefix: list[int], cap: int, left: int):
        yield Partition(tuple(prefix))
        if left == 0:
            return
        for v in range(1, cap + 1):
            prefix.append(v)
            yield from rec(prefix, v, left - 1)
            prefix.pop()

    yield from rec([], max_part, max_parts)


def schur_dim(lam: Partition, K: int) -> int:
    """``s_lambda(1^K) = prod_{i<j<=K} (lambda_i - i - lambda_j + j) / (j - i)``."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if len(lam) > K:
        return 0
    p = lam.padded(K)
    out = Fraction(1)
    for i in range(K):
        for j in range(i + 1, K):
            out *= Fraction(p[i] - i - p[j] + j, j - i)
    assert out.denominator == 1
    return int(out)


def zmeasure_log_weight(a: float, z: int, zp: int, lam: Partition) -> float:
    """``log[(1-a)^{z z'} a^{|lambda|} s_lambda(1^z) s_lambda(1^{z'})]``; ``-inf`` off the support."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    d1, d2 = schur_dim(lam, z), schur_dim(lam, zp)
    if d1 == 0 or d2 == 0:
        return -math.inf
    return z * zp * math.log1p(-a) + lam.size * math.log(a) + math.log(d1) + math.log(d2)


def zmeasure_weight(a, z: int, zp: int, lam: Partition):
    """Exact weight when ``a`` is a ``Fraction``, float otherwise."""
    d = schur_dim(lam, z) * schur_dim(lam, zp)
    if isinstance(a, Fraction):
        return (1 - a) ** (z * zp) * a ** lam.size * d
    return math.exp(zmeasure_log_weight(a, z, zp, lam)) if d else 0.0


def size_law(a: float, z: int, zp: int, n: int) -> float:
    """Negative binomial law of ``|lambda|`` with ``z z'`` trials."""
    m = z * zp
    if m == 0:
        return 1.0 if n == 0 else 0.0
    return math.comb(n + m - 1, n) * (1 - a) ** m * a ** n


@dataclass(frozen=True)
class MomentMatch:
    M: int
    N: int
    zeta: float
    lhs: float
    rhs: float
    trunc_bound: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)

    def as_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "zeta": self.zeta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "trunc_bound": self.trunc_bound,
        }


def multiplicative_expectation(a: float, q: float, N: int, M: int, zeta: float, max_part: int = 60) -> tuple[float, float]:
    """Partition side of the matching identity and a bound on the truncation error.

    Returns ``prod_{j>=0} (1 + zeta q^j)^{-1} * E[prod_{j<N} (1 + zeta q^{lambda_{N-j}+j})]``
    under the z-measure with ``z = N``, ``z' = M - 1``, summed over ``lambda_1 <= max_part``.
    The integrand lies in ``[0, 1]``, so the missing probability mass bounds the error.
    """
    if N < 1 or M < 1:
        raise ValueError("need M, N >= 1")
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    z, zp = N, M - 1
    pref = log_inv_product(0, q, zeta)
    j = np.arange(N)
    total = 0.0
    mass = 0.0
    for lam in partitions(min(z, zp), max_part):
        lw = zmeasure_log_weight(a, z, zp, lam)
        w = math.exp(lw)
        ell = np.array(lam.padded(N))[::-1] + j  # lambda_{N-j} + j
        f = float(np.exp(pref + np.sum(np.log1p(zeta * q ** ell))))
        total += w * f
        mass += w
    return total, max(0.0, 1.0 - mass)


def moment_match(a: float, q: float, M: int, N: int, zeta: float, max_part: int = 60) -> MomentMatch:
    from .q_analysis import q_laplace_of_height
    from .s6v_model import ModelParams

    lhs = q_laplace_of_height(ModelParams(a, q), M, N, zeta)
    rhs, bound = multiplicative_expectation(a, q, N, M, zeta, max_part)
    return MomentMatch(M, N, zeta, lhs, rhs, bound)


# -- log-gas form -------------------------------------------------------------

@dataclass(frozen=True)
class GasParams:
    a: float
    q: float
    alpha: float
    s: float

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.q < 1):
            raise ValueError("a and q must lie in (0, 1)")
        if self.alpha < 1:
            raise ValueError("the finite-N gas needs alpha >= 1")

    def extra(self, N: int) -> int:
        """``alpha N - N``; must be a non-negative integer."""
        m = self.alpha * N - N
        if abs(m - round(m)) > 1e-9:
            raise ValueError(f"alpha*N = {self.alpha * N} is not an integer")
        return int(round(m))


def potential_VN(x, g: GasParams, N: int):
    """Finite-N external field for the rescaled particles ``x = l / N``."""
    x = np.asarray(x, dtype=float)
    eta = math.log(1 / g.q)
    m = g.extra(N)
    out = x * math.log(1 / g.a) + eta * g.s
    if m:
        jj = np.arange(1, m + 1) / N
        out = out - np.log(np.add.outer(x, jj)).sum(axis=-1) / N
    out = out - np.logaddexp(0.0, N * (x - g.s) * math.log(g.q)) / N
    return out


def R_N(g: GasParams, N: int) -> float:
    """Normalising constant of the log-gas decomposition."""
    eta = math.log(1 / g.q)
    m = g.extra(N)
    k = np.arange(1, N)
    pair = 2.0 / N ** 2 * float(np.sum((N - k) * np.log(k / N)))
    cross = 0.0
    if m:
        jj = np.arange(1, m + 1)[:, None]
        ii = np.arange(N)[None, :]
        cross = float(np.log((jj + ii) / N).sum()) / N ** 2
    tail = -log_inv_product(-g.s * N, g.q) / N ** 2
    return (
        -g.alpha * math.log1p(-g.a)
        + math.log(g.a) / 2 * (1 - 1 / N)
        + pair
        + cross
        + tail
        - eta * g.s
    )


def _log_factorials(n: int) -> float:
    return float(sum(math.lgamma(j + 1) for j in range(1, n)))


def _check_shifted(ell) -> np.ndarray:
    ell = np.asarray(ell)
    if ell.ndim != 1 or (np.diff(ell) >= 0).any() or (ell.size and ell[-1] < 0):
        raise ValueError("shifted coordinates must be strictly decreasing and non-negative")
    return ell


def log_weight_product(ell: Sequence[int], g: GasParams, N: int) -> float:
    """Log of the z-measure weight times the q-functional, written as a product.

    Equals ``log[M(a; N, alpha N)(lambda) prod_j (1 + q^{l_j - sN}) prod_{j>=0} (1 + q^{j - sN})^{-1}]``.
    """
    ell = _check_shifted(ell).astype(float)
    if ell.size != N:
        raise ValueError("need exactly N shifted coordinates")
    m = g.extra(N)
    lq = math.log(g.q)
    out = g.alpha * N ** 2 * math.log1p(-g.a)
    out += (ell.sum() - N * (N - 1) / 2) * math.log(g.a)
    diff = np.subtract.outer(ell, ell)[np.triu_indices(N, 1)]
    out += 2 * float(np.log(np.abs(diff)).sum()) - 2 * _log_factorials(N)
    if m:
        i = np.arange(1, N + 1)[:, None]
        j = np.arange(N + 1, N + m + 1)[None, :]
        out += float(np.log((ell[:, None] + j - N) / (j - i)).sum())
    out += float(np.logaddexp(0.0, (ell - g.s * N) * lq).sum())
    out += log_inv_product(-g.s * N, g.q)
    return out


def empirical_energy(x: Sequence[float], V) -> float:
    """Off-diagonal energy ``N^-2 sum_{i != j} [-log|x_i - x_j| + V(x_i)/2 + V(x_j)/2]``."""
    x = np.asarray(x, dtype=float)
    N = x.size
    d = np.abs(np.subtract.outer(x, x))[~np.eye(N, dtype=bool)]
    v = np.asarray(V(x), dtype=float)
    return float((-np.log(d).sum() + (N - 1) * v.sum()) / N ** 2)


def smoothed_energy(ell: Sequence[int], N: int, V) -> float:
    """Energy of the density equal to 1 on each cell ``[l_i/N, (l_i+1)/N]``."""
    ell = _check_shifted(ell).astype(np.int64)
    dx = 1.0 / N
    offsets = np.abs(np.subtract.outer(ell, ell))
    col = cell_kernel_column(int(offsets.max()) + 1, dx)
    log_part = float(col[offsets].sum()) * dx * dx
    v = gauss_cell_average(V, ell * dx, (ell + 1) * dx)
    return log_part + float(v.sum()) * dx


def log_weight_energy(ell: Sequence[int], g: GasParams, N: int) -> float:
    """``-N^2 [R_N + I(empirical measure)]``."""
    x = _check_shifted(ell).astype(float) / N
    V = lambda t: potential_VN(t, g, N)
    return -(N ** 2) * (R_N(g, N) + empirical_energy(x, V))


def decomposition_gap(ell: Sequence[int], g: GasParams, N: int) -> float:
    """``N^-2 |log W_prod - log W_exp|`` for one configuration."""
    return abs(log_weight_product(ell, g, N) - log_weight_energy(ell, g, N)) / N ** 2


def staircase(N: int, step: int = 2) -> np.ndarray:
    return step * (N - np.arange(1, N + 1))


def size_law_check(a: float, z: int, zp: int, max_size: int = 10) -> float:
    """Largest gap between the law of ``|lambda|`` and the negative binomial, sizes ``0..max_size``."""
    mass = np.zeros(max_size + 1)
    for lam in partitions(min(z, zp), max_size):
        if lam.size <= max_size:
            mass[lam.size] += zmeasure_weight(a, z, zp, lam)
    return float(max(abs(mass[n] - size_law(a, z, zp, n)) for n in range(max_size + 1)))


def moment_match_gap(a: float, q: float, M: int, N: int, zeta: float, max_part: int = 60) -> float:
    return moment_match(a, q, M, N, zeta, max_part).gap


def loggas_decomposition_gap(a: float, q: float, N: int, alpha: float, s: float, lam: Partition) -> float:
    return decomposition_gap(lam.shifted(N), GasParams(a, q, alpha, s), N)
