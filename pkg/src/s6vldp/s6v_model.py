"""Stochastic six-vertex model with step initial data.

Paths enter every row from the left at column 1 and nothing enters from below.
A vertex carrying a single incoming arrow keeps its direction with probability
``b1`` (vertical) or ``b2`` (horizontal) and turns otherwise.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .height_core import (
    HeightField,
    boundary,
    is_step_boundary,
    observable_face,
    region_neq,
    shift,
    upsilon,
)

ENUMERATION_LIMIT = 26
EXACT_LIMIT = 16


class VertexConfig(NamedTuple):
    """Occupation of (incoming vertical, incoming horizontal, outgoing vertical, outgoing horizontal)."""

    i1: int
    j1: int
    i2: int
    j2: int

    @property
    def admissible(self) -> bool:
        return all(v in (0, 1) for v in self) and self.i1 + self.j1 == self.i2 + self.j2

    @property
    def code(self) -> int:
        return 8 * self.i1 + 4 * self.j1 + 2 * self.i2 + self.j2


@dataclass(frozen=True)
class ModelParams:
    a: float | Fraction
    q: float | Fraction

    def __post_init__(self):
        for name in ("a", "q"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    @property
    def exact(self) -> bool:
        return isinstance(self.a, Fraction) and isinstance(self.q, Fraction)

    @property
    def b1(self):
        return self.q * (1 - self.a) / (1 - self.a * self.q)

    @property
    def b2(self):
        return (1 - self.a) / (1 - self.a * self.q)

    @property
    def C(self):
        a, q = self.a, self.q
        return 1 / (a * q * (1 - a) ** 2 * (1 - q) ** 2)

    @property
    def log_C(self) -> float:
        return math.log(self.C)

    def as_exact(self) -> "ModelParams":
        return ModelParams(Fraction(self.a), Fraction(self.q))

    def as_float(self) -> "ModelParams":
        return ModelParams(float(self.a), float(self.q))


def vertex_weight(params: ModelParams, cfg) -> float | Fraction:
    cfg = VertexConfig(*cfg)
    if not cfg.admissible:
        raise ValueError(f"non-conserving vertex configuration {tuple(cfg)}")
    b1, b2 = params.b1, params.b2
    one = Fraction(1) if params.exact else 1.0
    table = {
        (0, 0, 0, 0): one,
        (1, 1, 1, 1): one,
        (1, 0, 1, 0): b1,
        (1, 0, 0, 1): 1 - b1,
        (0, 1, 0, 1): b2,
        (0, 1, 1, 0): 1 - b2,
    }
    return table[tuple(cfg)]


ADMISSIBLE = tuple(
    VertexConfig(*c)
    for c in [(0, 0, 0, 0), (1, 1, 1, 1), (1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 0, 1), (0, 1, 1, 0)]
)


def max_weight_ratio(params: ModelParams) -> float:
    """Largest ``w1 w2 / (w3 w4)`` over the six weights."""
    w = [float(vertex_weight(params, c)) for c in ADMISSIBLE]
    return max(w) ** 2 / min(w) ** 2


def _log_weight_lookup(params: ModelParams) -> np.ndarray:
    lut = np.full(16, np.nan)
    for c in ADMISSIBLE:
        lut[c.code] = math.log(vertex_weight(params, c))
    return lut


def vertex_codes(h: HeightField) -> np.ndarray:
    """``M x N`` array of local configuration codes; entry ``[x-1, y-1]`` is vertex ``(x, y)``."""
    v = h.values
    sw, se, nw, ne = v[:-1, :-1], v[1:, :-1], v[:-1, 1:], v[1:, 1:]
    i1, j1, i2, j2 = sw - se, nw - sw, nw - ne, ne - se
    ok = (
        np.isin(i1, (0, 1)) & np.isin(j1, (0, 1)) & np.isin(i2, (0, 1)) & np.isin(j2, (0, 1))
        & (i1 + j1 == i2 + j2)
    )
    if not ok.all():
        x, y = np.argwhere(~ok)[0]
        raise ValueError(f"non-conserving local pattern at vertex ({x + 1}, {y + 1})")
    return 8 * i1 + 4 * j1 + 2 * i2 + j2


def vertex_log_weights(params: ModelParams, h: HeightField) -> np.ndarray:
    return _log_weight_lookup(params)[vertex_codes(h)]


def boltzmann_weight(params: ModelParams, h: HeightField, region: np.ndarray | None = None) -> float:
    """Log of the product of vertex weights over the window (or a vertex mask)."""
    lw = vertex_log_weights(params, h)
    if region is not None:
        lw = lw[np.asarray(region, dtype=bool)]
    return float(lw.sum())


def boltzmann_probability(params: ModelParams, h: HeightField):
    """Exact product of vertex weights (a ``Fraction`` when the parameters are)."""
    codes = vertex_codes(h)
    w = {c.code: vertex_weight(params, c) for c in ADMISSIBLE}
    out = Fraction(1) if params.exact else 1.0
    for c in codes.ravel():
        out *= w[int(c)]
    return out


def height_observable(h: HeightField, M: int | None = None, N: int | None = None) -> int:
    M = h.M if M is None else M
    N = h.N if N is None else N
    if not (1 <= M <= h.M and 0 <= N <= h.N):
        raise IndexError(f"vertex ({M}, {N}) outside the {h.M}x{h.N} window")
    return h[observable_face(M, N)]


# -- sampling ---------------------------------------------------------------

_BLOCK_CELLS = 1 << 22


def replica_block_size(M: int, N: int) -> int:
    """Replicas per random stream; a function of the window only, never of threads."""
    return int(min(65536, max(1, _BLOCK_CELLS // ((M + 1) * (N + 1)))))


def _block_stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _sample_block(b1: float, b2: float, M: int, N: int, rng: np.random.Generator, size: int) -> np.ndarray:
    dtype = np.int16 if N < 30000 else np.int64
    h = np.zeros((size, M + 1, N + 1), dtype=dtype)
    h[:, 0, :] = np.arange(N + 1, dtype=dtype)
    for n in range(2, M + N + 1):
        xs = np.arange(max(1, n - N), min(M, n - 1) + 1)
        ys = n - xs
        sw = h[:, xs - 1, ys - 1]
        se = h[:, xs, ys - 1]
        nw = h[:, xs - 1, ys]
        i1 = sw - se
        j1 = nw - sw
        u = rng.random((size, xs.size))
        j2 = np.where(i1 == 1, np.where(j1 == 1, 1, u >= b1), np.where(j1 == 1, u < b2, 0))
        h[:, xs, ys] = se + j2.astype(dtype)
    return h


def map_replicas(
    params: ModelParams,
    M: int,
    N: int,
    n_samples: int,
    seed: int,
    fn: Callable[[np.ndarray], object],
    threads: int = 1,
) -> list:
    """Apply ``fn`` to each block of sampled height arrays, in block order.

    Replica ``r`` always lives in block ``r // replica_block_size(M, N)`` and
    full blocks are drawn even when only part is kept, so the outcome for a
    replica depends on ``(params, M, N, seed, r)`` alone.
    """
    if M < 1 or N < 1:
        raise ValueError("window must have M, N >= 1")
    if n_samples < 0:
        raise ValueError("n_samples must be non-negative")
    bs = replica_block_size(M, N)
    n_blocks = -(-n_samples // bs)
    b1, b2 = float(params.b1), float(params.b2)

    def run(block: int):
        arr = _sample_block(b1, b2, M, N, _block_stream(seed, block), bs)
        keep = min(bs, n_samples - block * bs)
        return fn(arr[:keep])

    if threads <= 1 or n_blocks <= 1:
        return [run(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, range(n_blocks)))


def sample_heights(params: ModelParams, M: int, N: int, n_samples: int, seed: int, threads: int = 1) -> np.ndarray:
    parts = map_replicas(params, M, N, n_samples, seed, lambda a: a.astype(np.int64), threads)
    if not parts:
        return np.zeros((0, M + 1, N + 1), dtype=np.int64)
    return np.concatenate(parts)


def sample_height(params: ModelParams, M: int, N: int, seed: int) -> HeightField:
    return HeightField(sample_heights(params, M, N, 1, seed)[0])


def sample_observables(params: ModelParams, M: int, N: int, n_samples: int, seed: int, threads: int = 1) -> np.ndarray:
    i, j = observable_face(M, N)
    parts = map_replicas(params, M, N, n_samples, seed, lambda a: a[:, i, j].astype(np.int64), threads)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


# -- exact laws -------------------------------------------------------------

def _check_guard(M: int, N: int, limit: int = ENUMERATION_LIMIT) -> None:
    if M < 1 or N < 1:
        raise ValueError("window must have M, N >= 1")
    if M * N > limit:
        raise ValueError(f"enumeration guard: M*N = {M * N} exceeds {limit}")


def enumerate_distribution(params: ModelParams, M: int, N: int, exact: bool | None = None) -> dict:
    """Every step-boundary field on the window with its probability.

    Rational arithmetic is used when ``exact`` is set (default: when the
    parameters are fractions and ``M*N <= 16``).
    """
    _check_guard(M, N)
    if exact is None:
        exact = params.exact and M * N <= EXACT_LIMIT
    if exact:
        params = params.as_exact()
        one = Fraction(1)
    else:
        params = params.as_float()
        one = 1.0
    b1, b2 = params.b1, params.b2
    order = [(x, n - x) for n in range(2, M + N + 1) for x in range(max(1, n - N), min(M, n - 1) + 1)]
    h = np.zeros((M + 1, N + 1), dtype=np.int64)
    h[0, :] = np.arange(N + 1)
    out: dict = {}

    def walk(k: int, prob) -> None:
        if k == len(order):
            out[HeightField(h)] = prob
            return
        x, y = order[k]
        se = h[x, y - 1]
        i1 = h[x - 1, y - 1] - se
        j1 = h[x - 1, y] - h[x - 1, y - 1]
        if i1 + j1 != 1:
            h[x, y] = se + j1
            walk(k + 1, prob)
            return
        keep = b1 if i1 else b2
        # continuing vertical leaves SE height; continuing horizontal raises it
        h[x, y] = se + (0 if i1 else 1)
        walk(k + 1, prob * keep)
        h[x, y] = se + (1 if i1 else 0)
        walk(k + 1, prob * (1 - keep))

    walk(0, one)
    return out


def height_distribution(params: ModelParams, M: int, N: int, exact: bool | None = None) -> list:
    """Law of the height at ``(M, N)`` by a row-by-row transfer over edge occupations.

    The state is the set of occupied vertical edges leaving a row; the height
    is ``N`` minus the number of occupied top edges in columns ``1..M-1``.
    """
    if M < 1 or N < 1:
        raise ValueError("window must have M, N >= 1")
    if exact is None:
        exact = params.exact
    p = params.as_exact() if exact else params.as_float()
    one = Fraction(1) if exact else 1.0
    zero = one - one
    b1, b2 = p.b1, p.b2
    states = {0: one}
    for _ in range(N):
        new: dict = defaultdict(lambda: zero)
        for mask, pr in states.items():
            partial = {(0, 1): pr}
            for x in range(M):
                bit = 1 << x
                nxt: dict = defaultdict(lambda: zero)
                below = (mask >> x) & 1
                for (om, carry), w in partial.items():
                    if below and carry:
                        nxt[(om | bit, 1)] += w
                    elif below:
                        nxt[(om | bit, 0)] += w * b1
                        nxt[(om, 1)] += w * (1 - b1)
                    elif carry:
                        nxt[(om, 1)] += w * b2
                        nxt[(om | bit, 0)] += w * (1 - b2)
                    else:
                        nxt[(om, 0)] += w
                partial = nxt
            for (om, _), w in partial.items():
                new[om] += w
        states = dict(new)
    dist = [zero] * (N + 1)
    left = (1 << (M - 1)) - 1
    for mask, pr in states.items():
        dist[N - bin(mask & left).count("1")] += pr
    return dist


@dataclass
class TailTable:
    M: int
    N: int
    probs: list
    mode: str
    stderr: list | None = None
    n_samples: int | None = None

    def __getitem__(self, r: int):
        if r <= 0:
            return self.probs[0]
        if r > self.N:
            return 0
        return self.probs[r]

    def to_csv(self) -> str:
        lines = ["r,prob,stderr"]
        for r, pr in enumerate(self.probs):
            se = "" if self.stderr is None else repr(float(self.stderr[r]))
            lines.append(f"{r},{float(pr)!r},{se}")
        return "\n".join(lines) + "\n"


def tail_probability(
    params: ModelParams,
    M: int,
    N: int,
    mode: str = "exact",
    n_samples: int = 10000,
    seed: int = 0,
    threads: int = 1,
) -> TailTable:
    if mode == "exact":
        _check_guard(M, N)
        dist = height_distribution(params, M, N)
        tails = [sum(dist[r:], dist[0] - dist[0]) for r in range(N + 1)]
        return TailTable(M, N, tails, "exact")
    if mode == "mc":
        obs = sample_observables(params, M, N, n_samples, seed, threads)
        tails = [float(np.mean(obs >= r)) for r in range(N + 1)]
        se = [math.sqrt(t * (1 - t) / max(n_samples, 1)) for t in tails]
        return TailTable(M, N, tails, "mc", se, n_samples)
    raise ValueError(f"unknown mode {mode!r}")


# -- verifiers --------------------------------------------------------------

@dataclass
class WeightInequalityReport:
    log_lhs: float
    log_rhs: float
    boundary_size: int
    off_boundary_equal: bool
    slack: float = field(init=False)

    def __post_init__(self):
        self.slack = self.log_rhs - self.log_lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -1e-9 and self.off_boundary_equal


def verify_weight_inequality(params: ModelParams, h: HeightField, hp: HeightField, p, k: int) -> WeightInequalityReport:
    """Compare ``w(h) w(h')`` with ``C^{|boundary|} w(h~) w(h~')`` after the lifted swap."""
    ht, htp = upsilon(h, hp, p, k)
    bset = boundary(region_neq(shift(h, k), hp, p))
    lut = _log_weight_lookup(params)
    c0, c1, c2, c3 = (vertex_codes(f) for f in (h, hp, ht, htp))
    log_lhs = float(lut[c0].sum() + lut[c1].sum())
    log_rhs = len(bset) * params.log_C + float(lut[c2].sum() + lut[c3].sum())
    off = np.ones(c0.shape, dtype=bool)
    for v in bset:
        off[v.x - 1, v.y - 1] = False
    before = np.sort(np.stack([c0[off], c1[off]]), axis=0)
    after = np.sort(np.stack([c2[off], c3[off]]), axis=0)
    return WeightInequalityReport(log_lhs, log_rhs, len(bset), bool(np.array_equal(before, after)))


def _log(x) -> float:
    if isinstance(x, Fraction):
        if x <= 0:
            return -math.inf
        return math.log(x.numerator) - math.log(x.denominator)
    return math.log(x) if x > 0 else -math.inf


@dataclass
class LogConcavityReport:
    M: int
    N: int
    pairs_checked: int
    point_violations: list
    tail_violations: list
    tightest_point_margin: float
    tightest_tail_margin: float

    @property
    def passed(self) -> bool:
        return not self.point_violations and not self.tail_violations


def verify_log_concavity(params: ModelParams, M: int, N: int, exact: bool | None = None) -> LogConcavityReport:
    """Check the weak log-concavity bounds for the exact law of the height.

    Margins are in log space: ``log RHS - log LHS``; a pair fails when the
    margin drops below ``-1e-12``.
    """
    _check_guard(M, N)
    if exact is None:
        exact = M * N <= EXACT_LIMIT
    dist = height_distribution(params, M, N, exact=exact)
    MN = M * N
    logC = params.as_float().log_C
    power = MN ** (7 / 8) * logC
    width = 4 * MN ** (2 / 5)
    zero = dist[0] - dist[0]
    tails = [sum(dist[r:], zero) for r in range(N + 1)]

    def tail(r: float):
        r = math.ceil(r)
        if r <= 0:
            return tails[0]
        return tails[r] if r <= N else zero

    point_bad, tail_bad = [], []
    tight_p = tight_t = math.inf
    for r in range(N + 1):
        for rp in range(N + 1):
            mid = (r + rp) / 2
            event = sum((dist[t] for t in range(N + 1) if abs(t - mid) <= width), zero)
            lhs = _log(dist[r]) + _log(dist[rp])
            if lhs > -math.inf:
                margin = power + 2 * _log(event) - lhs
                tight_p = min(tight_p, margin)
                if margin < -1e-12:
                    point_bad.append((r, rp))
            lhs_t = _log(tails[r]) + _log(tails[rp])
            if lhs_t > -math.inf:
                margin = 2 * math.log(N) + power + 2 * _log(tail(mid - width)) - lhs_t
                tight_t = min(tight_t, margin)
                if margin < -1e-12:
                    tail_bad.append((r, rp))
    return LogConcavityReport(M, N, (N + 1) ** 2, point_bad, tail_bad, tight_p, tight_t)


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys)


def empirical_field_distribution(arrays: np.ndarray) -> dict:
    flat = arrays.reshape(arrays.shape[0], -1)
    uniq, counts = np.unique(flat, axis=0, return_counts=True)
    shape = arrays.shape[1:]
    n = arrays.shape[0]
    return {HeightField(u.reshape(shape)): c / n for u, c in zip(uniq, counts)}


def check_step_sample(h: HeightField) -> bool:
    from .height_core import is_valid

    return is_valid(h) and is_step_boundary(h)
