"""Lower-tail rate functions assembled from capped equilibrium energies.

``rate_F`` adds explicit terms to the equilibrium energy of the field capped at
``y``; the lower-tail rate of the height is then the deconvolution
``Phi(s) = sup_y [F(y) - g(s - y)]`` with ``g(x) = eta_q x^2 / 2``.
Everything here works on uniform grids, with ``+inf`` allowed as a value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .potential_theory import (
    C_alpha,
    EquilibriumResult,
    Field,
    aligned_grid,
    default_domain,
    solve_equilibrium,
)

INF = math.inf
CHUNK = 16


@dataclass(frozen=True)
class RateParams:
    a: float
    q: float
    alpha: float = 1.0

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.q < 1):
            raise ValueError("a and q must lie in (0, 1)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def eta(self) -> float:
        return math.log(1 / self.q)

    @property
    def endpoint(self) -> float:
        """Rate at ``s = 1``: ``alpha log((1 - a q) / (1 - a))``."""
        return self.alpha * math.log((1 - self.a * self.q) / (1 - self.a))

    @property
    def mu(self) -> float:
        return mu_alpha(self.a, self.alpha)


def mu_alpha(a: float, alpha: float) -> float:
    """Law of large numbers for ``h(alpha N, N) / N``."""
    if not 0 < a < 1 or alpha <= 0:
        raise ValueError("need a in (0, 1) and alpha > 0")
    if alpha <= a:
        return 1 - alpha
    if alpha >= 1 / a:
        return 0.0
    return (1 - math.sqrt(a * alpha)) ** 2 / (1 - a)


def R_s(params: RateParams, s: float) -> float:
    if params.alpha < 1:
        raise ValueError("defined for alpha >= 1")
    a, al = params.a, params.alpha
    return params.eta * (s * s - 2 * s) / 2 - al * math.log1p(-a) + math.log(a) / 2 + C_alpha(al)


def g_parabola(params: RateParams, x):
    return params.eta * np.square(x) / 2


def parabola(params: RateParams, y):
    """Large-``y`` form of the rate: ``eta (y - 1)^2 / 2 + alpha log((1 - aq)/(1 - a))``."""
    return params.eta * np.square(np.asarray(y, dtype=float) - 1) / 2 + params.endpoint


# -- grid functions ------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Values on ``lo + step * k``, ``k = 0..n-1``; ``+inf`` marks points off the domain."""

    lo: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        if np.isnan(v).any():
            raise ValueError("NaN in grid function")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_range(cls, lo: float, hi: float, step: float, fn: Callable | None = None) -> "GridFunction":
        n = int(round((hi - lo) / step)) + 1
        x = lo + step * np.arange(n)
        vals = np.zeros(n) if fn is None else np.asarray(fn(x), dtype=float)
        return cls(lo, step, vals)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.n)

    @property
    def hi(self) -> float:
        return self.lo + self.step * (self.n - 1)

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    def __call__(self, x):
        """Linear interpolation on the grid, ``+inf`` outside it or next to an infinite node."""
        x = np.asarray(x, dtype=float)
        t = (x - self.lo) / self.step
        k = np.clip(np.floor(t).astype(int), 0, self.n - 2) if self.n > 1 else np.zeros(x.shape, int)
        w = t - k
        inside = (t >= -1e-9) & (t <= self.n - 1 + 1e-9)
        if self.n == 1:
            return np.where(inside, self.values[0], INF)
        left, right = self.values[k], self.values[np.minimum(k + 1, self.n - 1)]
        with np.errstate(invalid="ignore"):
            out = np.where(w <= 1e-12, left, np.where(w >= 1 - 1e-12, right, (1 - w) * left + w * right))
        return np.where(inside, out, INF)


def _blocks(n: int, size: int = 512):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def inf_convolution(f: GridFunction, g: Callable, out: GridFunction | None = None) -> GridFunction:
    """``(f + g)(s) = min_y f(y) + g(s - y)`` over the grid of ``f``, evaluated on the grid of ``out``."""
    out = out or f
    s = out.grid
    y, fy = f.grid, f.values
    keep = np.isfinite(fy)
    res = np.full(s.size, INF)
    if not keep.any():
        return GridFunction(out.lo, out.step, res)
    y, fy = y[keep], fy[keep]
    for sl in _blocks(s.size):
        res[sl] = (fy[None, :] + np.asarray(g(s[sl, None] - y[None, :]))).min(axis=1)
    return GridFunction(out.lo, out.step, res)


def inf_deconvolution(
    f: GridFunction, g: Callable, out: GridFunction | None = None, check_edges: bool = True
) -> GridFunction:
    """``(f - g)(x) = max_y f(y) - g(x - y)`` over the finite part of ``f``.

    With ``check_edges`` a maximiser pinned at an end of the ``y`` range, with the
    objective still rising into that end, raises ``ValueError``: the range was too short.
    """
    out = out or f
    x = out.grid
    fin = np.isfinite(f.values)
    res = np.full(x.size, -INF)
    if not fin.any():
        return GridFunction(out.lo, out.step, np.full(x.size, INF))
    y, fy = f.grid[fin], f.values[fin]
    for sl in _blocks(x.size):
        obj = fy[None, :] - np.asarray(g(x[sl, None] - y[None, :]))
        k = obj.argmax(axis=1)
        res[sl] = obj[np.arange(k.size), k]
        if check_edges and y.size > 1:
            rows = np.arange(k.size)
            last = (k == y.size - 1) & (obj[rows, -1] > obj[rows, -2] + 1e-12)
            first = (k == 0) & (obj[rows, 0] > obj[rows, 1] + 1e-12) & (x[sl] < y[0] - 1e-12)
            if last.any() or first.any():
                bad = x[sl][last | first][0]
                raise ValueError(f"maximiser at the edge of the y range for x={bad:.6g}; widen the range")
    return GridFunction(out.lo, out.step, res)


def legendre(f: GridFunction, p: GridFunction | None = None) -> GridFunction:
    """``f*(p) = max_x p x - f(x)`` over the finite part of ``f``."""
    p = p or f
    fin = np.isfinite(f.values)
    if not fin.any():
        return GridFunction(p.lo, p.step, np.full(p.n, -INF))
    x, fx = f.grid[fin], f.values[fin]
    pp = p.grid
    res = np.empty(pp.size)
    for sl in _blocks(pp.size):
        res[sl] = (pp[sl, None] * x[None, :] - fx[None, :]).max(axis=1)
    return GridFunction(p.lo, p.step, res)


# -- capped energies -------------------------------------------------------------

class EnergyTable:
    """Equilibrium energies of the field capped at ``y``, for ``alpha >= 1``.

    Every solve uses the same uniform grid of step ``dx`` on ``[0, hi]``; cap
    values on the ``dy`` lattice then fall on cell edges when ``dy`` is a
    multiple of ``dx``. Above ``y_big`` the cap no longer moves the minimiser
    and the uncapped energy is returned without solving.
    """

    def __init__(self, a: float, q: float, alpha: float = 1.0, dx: float = 0.01, dy: float = 0.01,
                 tol: float = 1e-4, energy_tol: float = 1e-7, threads: int | None = None):
        if alpha < 1:
            raise ValueError("capped energies are defined for alpha >= 1")
        self.a, self.q, self.alpha = a, q, alpha
        self.dx, self.dy, self.tol, self.energy_tol = dx, dy, tol, energy_tol
        self.threads = threads
        self.n = int(math.ceil(default_domain(a, q, alpha) / dx - 1e-9))
        self.hi = self.n * dx
        self._cache: dict[float, float] = {}
        self._phi: dict[float, np.ndarray] = {}
        self._inf: EquilibriumResult | None = None
        self._y_big: float | None = None

    def _grid_for(self, y: float) -> tuple[float, int]:
        if not (0 < y < self.hi) or abs(y / self.dx - round(y / self.dx)) < 1e-9:
            return self.hi, self.n
        return aligned_grid(self.hi, self.n, y)

    def solve(self, y: float, init=None) -> EquilibriumResult:
        hi, n = self._grid_for(y)
        if init is not None and len(init) != n:
            init = None
        return solve_equilibrium(Field(self.a, self.q, self.alpha, y), hi, n, tol=self.tol, init=init)

    @property
    def uncapped(self) -> EquilibriumResult:
        if self._inf is None:
            self._inf = self.solve(INF)
        return self._inf

    @property
    def F_inf(self) -> float:
        return self.uncapped.energy

    def _key(self, y: float) -> float:
        return round(y, 10)

    def _solve_cached(self, y: float, init=None) -> float:
        k = self._key(y)
        if k not in self._cache:
            r = self.solve(y, init)
            self._cache[k] = r.energy
            self._phi[k] = r.density.values
        return self._cache[k]

    @property
    def y_big(self) -> float:
        """Smallest ``dy``-lattice cap whose energy matches the uncapped one within ``energy_tol``."""
        if self._y_big is None:
            target = self.F_inf
            lo, hi = 0, int(math.ceil(self.hi / self.dy))
            if target - self._solve_cached(0.0) <= self.energy_tol:
                self._y_big = 0.0
                return 0.0
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if target - self._solve_cached(mid * self.dy) <= self.energy_tol:
                    hi = mid
                else:
                    lo = mid
            self._y_big = hi * self.dy
        return self._y_big

    def _run_chunk(self, ys: list[float]) -> list[tuple[float, float, np.ndarray]]:
        out, init = [], None
        for y in ys:
            r = self.solve(y, init)
            init = r.density.values
            out.append((y, r.energy, init))
        return out

    def __call__(self, ys) -> np.ndarray:
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        yc = np.maximum(ys, 0.0)
        big = self.y_big
        todo = sorted({float(y) for y in yc if y < big and self._key(y) not in self._cache})
        chunks = [todo[i:i + CHUNK] for i in range(0, len(todo), CHUNK)]
        if chunks:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                for res in ex.map(self._run_chunk, chunks):
                    for y, e, _ in res:
                        self._cache[self._key(y)] = e
        base = np.array([self.F_inf if y >= big else self._cache[self._key(y)] for y in yc])
        # a cap below 0 only adds the constant eta * y to the field
        return base + math.log(1 / self.q) * np.minimum(ys, 0.0)


def _explicit_part(params: RateParams, y):
    a, al = params.a, params.alpha
    return params.eta * (y * y - 2 * y) / 2 - al * math.log1p(-a) + math.log(a) / 2 + C_alpha(al)


def rate_F(params: RateParams, y, table: EnergyTable | None = None, **kw) -> np.ndarray:
    """The assembled rate ``F_alpha(y)``; negative ``y`` is clamped to 0, where the rate vanishes.

    For ``alpha < 1`` the value comes from the ``1/alpha`` energies at the
    rescaled cap ``y/alpha - 1/alpha + 1``.
    """
    y = np.maximum(np.atleast_1d(np.asarray(y, dtype=float)), 0.0)
    if params.alpha >= 1:
        table = table or EnergyTable(params.a, params.q, params.alpha, **kw)
        return _explicit_part(params, y) + table(y)
    return rate_rescaled(params, y, table, **kw)


def rate_rescaled(params: RateParams, y, table: EnergyTable | None = None, **kw) -> np.ndarray:
    """Rate built from the ``1/alpha`` problem; valid for ``alpha <= 1``."""
    a, al, eta = params.a, params.alpha, params.eta
    if al > 1:
        raise ValueError("the rescaled form needs alpha <= 1")
    y = np.maximum(np.atleast_1d(np.asarray(y, dtype=float)), 0.0)
    inv = 1 / al
    table = table or EnergyTable(a, params.q, inv, **kw)
    ys = y * inv - inv + 1
    # int_alpha^1 (y + x - 1)_+ dx
    ramp = (np.maximum(y, 0) ** 2 - np.maximum(y + al - 1, 0) ** 2) / 2
    return (
        eta * (y * y - 2 * y * al + 2 * al - 2 * al * al) / 2
        - eta * ramp
        - al * math.log1p(-a)
        + al * al * math.log(a) / 2
        + al * al * C_alpha(inv)
        + al * al * table(ys)
    )


def F_alpha(params: RateParams, y, **kw):
    out = rate_F(params, y, **kw)
    return float(out[0]) if np.ndim(y) == 0 else out


@dataclass
class RateTable:
    params: RateParams
    F: GridFunction
    y_big: float
    energies: EnergyTable = field(repr=False)


def tail_start(params: RateParams, energies: EnergyTable) -> float:
    """Point beyond which the rate is exactly parabolic."""
    if params.alpha >= 1:
        return energies.y_big
    al = params.alpha
    return max(al * (energies.y_big - 1) + 1, 1 - al, 0.0)


def tabulate_F(params: RateParams, y_lo: float = -0.5, y_hi: float | None = None, dy: float = 0.01,
               dx: float = 0.01, tol: float = 1e-4, threads: int | None = None) -> RateTable:
    """Tabulate the rate on ``[y_lo, y_hi]`` with ``y_hi`` defaulting to two units past the parabolic tail."""
    inner = params.alpha if params.alpha >= 1 else 1 / params.alpha
    energies = EnergyTable(params.a, params.q, inner, dx=dx, dy=dy, tol=tol, threads=threads)
    start = tail_start(params, energies)
    if y_hi is None:
        y_hi = math.ceil((start + 2) / dy) * dy
    k0, k1 = int(round(y_lo / dy)), int(round(y_hi / dy))
    ys = dy * np.arange(k0, k1 + 1)
    vals = rate_F(params, ys, table=energies)
    return RateTable(params, GridFunction(ys[0], dy, vals), start, energies)


def phi_minus(params: RateParams, table: RateTable | None = None, s_lo: float = -0.5, s_hi: float = 1.5,
              ds: float = 1e-3, **kw) -> GridFunction:
    """``Phi(s) = sup_y [F(y) - g(s - y)]``, and ``+inf`` for ``s > 1`` where the parabolic tail is unbounded."""
    table = table or tabulate_F(params, **kw)
    n = int(round((s_hi - s_lo) / ds)) + 1
    s = s_lo + ds * np.arange(n)
    g = lambda x: g_parabola(params, x)
    m = int(np.count_nonzero(s <= 1 + 1e-9))
    vals = np.full(n, INF)
    if m:
        vals[:m] = inf_deconvolution(table.F, g, GridFunction(s_lo, ds, np.zeros(m))).values
    return GridFunction(s_lo, ds, vals)


def rate_properties_report(table: RateTable, phi: GridFunction | None = None, tail_points=(3.0, 4.0, 5.0),
                           lipschitz_slack: float = 0.1, noise: float = 1e-5) -> dict:
    """Shape checks on a tabulated rate and, if given, on ``Phi``.

    Tail residuals at ``tail_points`` are recomputed by fresh solves rather than
    read off the table, since the table itself is parabolic past ``y_big``.
    """
    P = table.params
    F = table.F
    y, v = F.grid, F.values
    h = F.step
    d1 = np.diff(v)
    d2 = np.diff(v, 2)
    curv_tol = 1e-6
    res = {
        "y_big": table.y_big,
        "monotone_violations": int((d1 < -noise).sum()),
        "convexity_violations": int((d2 < -curv_tol).sum()),
        "min_second_difference": float(d2.min()),
        "max_curvature": float(d2.max() / h ** 2),
        "lipschitz_bound": P.eta * (1 + lipschitz_slack),
    }
    res["lipschitz_ok"] = res["max_curvature"] <= res["lipschitz_bound"]
    pts = [t for t in tail_points]
    fresh = rate_F(P, np.array(pts), table=_fresh_energies(table)) if pts else np.array([])
    res["tail_residuals"] = {float(t): float(abs(f - parabola(P, t))) for t, f in zip(pts, fresh)}
    res["tail_ok"] = all(r < 1e-2 for r in res["tail_residuals"].values())
    below = y < P.mu - 1e-9
    res["max_below_mu"] = float(np.abs(v[below]).max()) if below.any() else 0.0
    ok = (
        res["monotone_violations"] == 0
        and res["convexity_violations"] == 0
        and res["lipschitz_ok"]
        and res["tail_ok"]
        and res["max_below_mu"] < 1e-2
    )
    if phi is not None:
        res.update(phi_report(P, phi, F, noise))
        ok = ok and res["phi_ok"]
    res["pass"] = bool(ok)
    return res


def _fresh_energies(table: RateTable) -> EnergyTable:
    e = table.energies
    fresh = EnergyTable(e.a, e.q, e.alpha, dx=e.dx, dy=e.dy, tol=e.tol, energy_tol=e.energy_tol, threads=e.threads)
    fresh._y_big = INF  # force a solve at every point
    return fresh


def phi_report(P: RateParams, phi: GridFunction, F: GridFunction, noise: float = 1e-5) -> dict:
    """Endpoint, sign, monotonicity, convexity and round-trip checks on ``Phi``.

    ``noise`` absorbs the energy error of the solver, which shows up where ``Phi`` is flat.
    """
    s, v = phi.grid, phi.values
    mu = P.mu
    win = (s >= mu - 1e-9) & (s <= 1 + 1e-9)
    sw, vw = s[win], v[win]
    ds = phi.step
    # a sup of downward parabolas over a discrete y set bends by at most -eta ds^2 between kinks
    curv_tol = P.eta * ds * ds * 1.01 + 1e-10
    # the sup runs over y-nodes only, so it can undershoot by g(dy / 2) between them
    slack = noise + P.eta * F.step ** 2 / 8
    at1 = float(phi(np.array([1.0]))[0])
    at_mu = float(phi(np.array([mu]))[0])
    back = inf_convolution(phi, lambda x: g_parabola(P, x), F)
    fin = F.grid >= 0
    rt = float(np.abs(back.values[fin] - F.values[fin]).max())
    out = {
        "phi_at_1": at1,
        "phi_at_1_target": P.endpoint,
        "phi_at_mu": at_mu,
        "mu": mu,
        "phi_monotone_violations": int((np.diff(vw) < -slack).sum()),
        "phi_convexity_violations": int((np.diff(vw, 2) < -curv_tol).sum()),
        "phi_nonnegative": bool((v[np.isfinite(v)] >= -slack).all()),
        "round_trip_error": rt,
    }
    out["phi_ok"] = bool(
        abs(at1 - P.endpoint) < 1e-2
        and at_mu < 1e-2
        and out["phi_monotone_violations"] == 0
        and out["phi_convexity_violations"] == 0
        and out["phi_nonnegative"]
        and rt < 2e-2
        and sw.size > 2
    )
    return out
