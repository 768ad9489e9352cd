"""Constrained logarithmic energy minimisation on the half-line.

Densities are piecewise constant on a uniform grid and are constrained to
``0 <= phi <= 1`` with unit mass. The logarithmic interaction is integrated
exactly over each pair of cells, so the discrete energy of a piecewise constant
density is its true continuum energy up to the quadrature of the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import matmul_toeplitz

FieldFn = Callable[[np.ndarray], np.ndarray]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


# -- kernel and quadrature helpers -------------------------------------------

def _second_antiderivative_log(t: np.ndarray) -> np.ndarray:
    """``t^2 log|t| / 2 - 3 t^2 / 4``, whose second derivative is ``log|t|``."""
    t = np.asarray(t, dtype=float)
    out = -0.75 * t * t
    nz = t != 0
    out[nz] += 0.5 * t[nz] ** 2 * np.log(np.abs(t[nz]))
    return out


def cell_kernel_column(n: int, dx: float) -> np.ndarray:
    """Average of ``-log|x - y|`` over two cells of width ``dx`` that are ``m`` cells apart.

    Exact differences are used for small offsets; far apart the expansion in
    ``1/m`` avoids the cancellation between large terms.
    """
    m = np.arange(n, dtype=float)
    out = np.empty(n)
    near = m < 10
    mn = m[near]
    F = _second_antiderivative_log
    out[near] = -(F((mn + 1) * dx) - 2 * F(mn * dx) + F((mn - 1) * dx)) / dx ** 2
    mf = m[~near]
    if mf.size:
        # E log(m + U) with U the difference of two uniforms on [0, 1]
        corr = np.zeros_like(mf)
        for k in range(1, 8):
            moment = 2.0 / ((2 * k + 1) * (2 * k + 2))
            corr += moment / (2 * k) * mf ** (-2 * k)
        out[~near] = -(np.log(mf * dx) - corr)
    return out


def gauss_cell_average(V: FieldFn, lo, hi) -> np.ndarray:
    """Average of ``V`` over each interval ``[lo_i, hi_i]`` by 8-point Gauss-Legendre."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.asarray(V(pts.ravel()), dtype=float).reshape(pts.shape)
    return vals @ _GL_W / 2


def _log_antiderivative(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = -t.copy()
    nz = t != 0
    out[nz] += t[nz] * np.log(np.abs(t[nz]))
    return out


# -- external fields ------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    """External field of the q-deformed gas, optionally capped at ``y``.

    ``V(x) = x log(1/a) + eta_q min(x, y) - (alpha-1)[log(x+alpha-1) - 1] + x log(x/(x+alpha-1))``.
    """

    a: float
    q: float
    alpha: float = 1.0
    y: float = math.inf

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.q < 1):
            raise ValueError("a and q must lie in (0, 1)")
        if self.alpha < 1:
            raise ValueError("the field is defined for alpha >= 1")

    @property
    def eta(self) -> float:
        return math.log(1 / self.q)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = x * math.log(1 / self.a) + self.eta * np.minimum(x, self.y)
        al = self.alpha
        if al != 1:
            out = out - (al - 1) * (np.log(x + al - 1) - 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(x > 0, x * np.log(np.where(x > 0, x, 1) / (x + al - 1)), 0.0)
            out = out + t
        return out

    def capped(self, y: float) -> "Field":
        return Field(self.a, self.q, self.alpha, y)


# -- densities -----------------------------------------------------------------

@dataclass(frozen=True)
class GridDensity:
    lo: float
    hi: float
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.n + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.dx * (np.arange(self.n) + 0.5)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.dx)

    def support(self, eps: float = 1e-9) -> tuple[float, float]:
        """Edges of ``{phi > eps}``."""
        idx = np.nonzero(self.values > eps)[0]
        if idx.size == 0:
            return (math.nan, math.nan)
        e = self.edges
        return (float(e[idx[0]]), float(e[idx[-1] + 1]))

    def saturation_edge(self, eps: float = 1e-9) -> float:
        """Right end of the initial run of cells with ``phi >= 1 - eps`` (``lo`` if none)."""
        full = self.values >= 1 - eps
        if not full[0]:
            return self.lo
        k = int(np.argmin(full)) if not full.all() else self.n
        return float(self.edges[k])


def uniform_density(lo: float, hi: float, n: int) -> GridDensity:
    return GridDensity(lo, hi, np.full(n, 1.0 / (hi - lo)))


def aligned_grid(hi: float, n: int, node: float | None = None) -> tuple[float, int]:
    """Upper end and cell count on ``[0, hi']`` with ``node`` on a cell edge and about ``n`` cells."""
    if node is None or not (0 < node < hi):
        return hi, n
    dx = hi / n
    k = max(1, round(node / dx))
    dx = node / k
    n2 = int(math.ceil(hi / dx - 1e-9))
    return n2 * dx, n2


def _toeplitz_mv(col: np.ndarray, v: np.ndarray) -> np.ndarray:
    return matmul_toeplitz((col, col), v)


def energy(V: FieldFn, rho: GridDensity) -> float:
    """``int int [-log|x-y| + V(x)/2 + V(y)/2] drho drho`` for a unit-mass grid density."""
    col = cell_kernel_column(rho.n, rho.dx)
    phi = rho.values
    dx = rho.dx
    e = rho.edges
    v = gauss_cell_average(V, e[:-1], e[1:])
    return float(dx * dx * phi @ _toeplitz_mv(col, phi) + dx * phi @ v)


def log_potential(rho: GridDensity, y) -> np.ndarray:
    """``-int log|x - y| rho(x) dx`` evaluated exactly cell by cell."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    e = rho.edges
    A = _log_antiderivative(e[None, 1:] - y[:, None]) - _log_antiderivative(e[None, :-1] - y[:, None])
    return -(A @ rho.values)


def effective_field(V: FieldFn, rho: GridDensity, y) -> np.ndarray:
    """``int k_V(x, y) rho(x) dx = -int log|x-y| rho + V(y)/2 + (1/2) int V rho``."""
    e = rho.edges
    vbar = gauss_cell_average(V, e[:-1], e[1:])
    half_mean = 0.5 * float(rho.values @ vbar) * rho.dx
    return log_potential(rho, y) + 0.5 * np.asarray(V(np.atleast_1d(y)), dtype=float) + half_mean


# -- solver ----------------------------------------------------------------------

def project_capped_simplex(z: np.ndarray, dx: float, tol: float = 1e-14) -> np.ndarray:
    """Euclidean projection onto ``{0 <= phi <= 1, dx * sum(phi) = 1}`` by bisection on the shift."""
    target = 1.0 / dx
    if target > z.size + 1e-9:
        raise ValueError("grid too short to carry unit mass under the cap")
    lo = float(z.min()) - 1.0
    hi = float(z.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = np.clip(z - mid, 0.0, 1.0).sum()
        if s > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return np.clip(z - 0.5 * (lo + hi), 0.0, 1.0)


class EquilibriumError(RuntimeError):
    def __init__(self, message: str, residuals: dict):
        super().__init__(f"{message}; residuals {residuals}")
        self.residuals = residuals


@dataclass
class EquilibriumResult:
    density: GridDensity
    energy: float
    lagrange: float
    residuals: dict
    iterations: int
    polish_iterations: int
    converged: bool
    field: FieldFn | None = field(default=None, repr=False)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def support(self) -> tuple[float, float]:
        return self.density.support()


def _kkt(W: np.ndarray, phi: np.ndarray, eps: float = 1e-10) -> tuple[float, dict]:
    free = (phi > eps) & (phi < 1 - eps)
    low = phi <= eps
    up = phi >= 1 - eps
    if free.any():
        lam = float(np.median(W[free]))
    else:
        a = W[up].max() if up.any() else -math.inf
        b = W[low].min() if low.any() else math.inf
        lam = 0.5 * (a + b) if np.isfinite(a) and np.isfinite(b) else (a if np.isfinite(a) else b)
    res = {
        "free": float(np.abs(W[free] - lam).max()) if free.any() else 0.0,
        "void": float(np.maximum(lam - W[low], 0).max()) if low.any() else 0.0,
        "saturated": float(np.maximum(W[up] - lam, 0).max()) if up.any() else 0.0,
    }
    return lam, res


def _active_set_polish(col, v, dx, phi, max_iter=60):
    """Primal-dual active-set iterations for the box- and mass-constrained quadratic."""
    n = phi.size
    idx = np.arange(n)
    W = dx * _toeplitz_mv(col, phi) + v / 2
    lam, _ = _kkt(W, phi)
    c = 1.0 / (dx * col[0])
    up = phi + c * (lam - W) > 1
    low = phi + c * (lam - W) < 0
    for it in range(1, max_iter + 1):
        free = ~(up | low)
        F = idx[free]
        U = idx[up]
        k = F.size
        A = np.empty((k + 1, k + 1))
        A[:k, :k] = dx * col[np.abs(F[:, None] - F[None, :])]
        A[:k, k] = -1.0
        A[k, :k] = dx
        A[k, k] = 0.0
        rhs = np.empty(k + 1)
        rhs[:k] = -v[F] / 2 - (dx * col[np.abs(F[:, None] - U[None, :])].sum(axis=1) if U.size else 0.0)
        rhs[k] = 1.0 - dx * U.size
        sol = np.linalg.solve(A, rhs)
        phi = np.zeros(n)
        phi[U] = 1.0
        phi[F] = sol[:k]
        lam = sol[k]
        W = dx * _toeplitz_mv(col, phi) + v / 2
        score = phi + c * (lam - W)
        new_up = score > 1
        new_low = score < 0
        if np.array_equal(new_up, up) and np.array_equal(new_low, low):
            return phi, it, True
        up, low = new_up, new_low
    return phi, max_iter, False


def solve_equilibrium(
    V: FieldFn,
    hi: float,
    n: int = 2000,
    lo: float = 0.0,
    tol: float = 1e-4,
    max_iter: int = 5000,
    init: np.ndarray | None = None,
    polish: bool = True,
    strict: bool = True,
) -> EquilibriumResult:
    """Minimise the energy over capped unit-mass densities on ``[lo, hi]``.

    Accelerated projected gradient with backtracking runs first; an active-set
    step then solves the optimality system exactly on the current partition
    into void, saturated and free cells and repeats until the partition is
    stable. Residuals are the violations of: field ``>= lambda`` where
    ``phi = 0``, ``<= lambda`` where ``phi = 1`` and ``= lambda`` elsewhere.

    With ``strict`` a run that ends above ``tol`` raises ``EquilibriumError``.
    """
    if hi - lo < 1:
        raise ValueError("domain must be at least one unit long")
    dx = (hi - lo) / n
    edges = lo + dx * np.arange(n + 1)
    col = cell_kernel_column(n, dx)
    v = gauss_cell_average(V, edges[:-1], edges[1:])

    def obj(phi):
        return float(dx * dx * phi @ _toeplitz_mv(col, phi) + dx * phi @ v)

    def grad(phi):
        return 2 * dx * dx * _toeplitz_mv(col, phi) + dx * v

    def residuals(phi):
        W = dx * _toeplitz_mv(col, phi) + v / 2
        return _kkt(W, phi)

    if init is None:
        phi = np.zeros(n)
        m = int(round(1 / dx))
        phi[:m] = 1.0
        phi = project_capped_simplex(phi, dx)
    else:
        phi = project_capped_simplex(np.asarray(init, dtype=float), dx)

    L = 2 * dx * dx * (col[0] + 2 * np.abs(col[1:]).sum())
    L = max(L * 1e-3, 1e-12)
    yk, t, f_prev = phi.copy(), 1.0, obj(phi)
    it = 0
    lam, res = residuals(phi)
    while it < max_iter and max(res.values()) > tol:
        it += 1
        g = grad(yk)
        fy = obj(yk)
        while True:
            cand = project_capped_simplex(yk - g / L, dx)
            d = cand - yk
            if obj(cand) <= fy + g @ d + 0.5 * L * d @ d + 1e-15:
                break
            L *= 2.0
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        f_new = obj(cand)
        if f_new > f_prev:
            # restart momentum when the objective goes up
            yk, t = cand.copy(), 1.0
        else:
            yk = cand + (t - 1) / t_next * (cand - phi)
            t = t_next
        phi, f_prev = cand, f_new
        L *= 0.9
        if polish and it % 25 == 0:
            break
        if it % 10 == 0:
            lam, res = residuals(phi)
    n_polish, converged = 0, False
    if polish:
        phi2, n_polish, ok = _active_set_polish(col, v, dx, phi)
        if ok and phi2.min() > -1e-9 and phi2.max() < 1 + 1e-9:
            phi = np.clip(phi2, 0.0, 1.0)
    lam, res = residuals(phi)
    converged = max(res.values()) <= tol
    if not converged and polish:
        return solve_equilibrium(V, hi, n, lo, tol, max_iter, init=phi, polish=False, strict=strict)
    if not converged and strict:
        raise EquilibriumError(f"no convergence after {it} iterations", res)
    rho = GridDensity(lo, hi, phi)
    half_mean = 0.5 * float(phi @ v) * dx
    return EquilibriumResult(rho, obj(phi), lam + half_mean, res, it, n_polish, converged, V)


# -- closed-form equilibrium --------------------------------------------------

@dataclass(frozen=True)
class ClosedFormEquilibrium:
    """Explicit minimiser for the uncapped field, with ``p = a q``."""

    a: float
    q: float
    alpha: float = 1.0

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.q < 1) or self.alpha < 1:
            raise ValueError("need a, q in (0, 1) and alpha >= 1")

    @property
    def p(self) -> float:
        return self.a * self.q

    @property
    def c(self) -> float:
        return (1 - math.sqrt(self.p * self.alpha)) ** 2 / (1 - self.p)

    @property
    def d(self) -> float:
        return (1 + math.sqrt(self.p * self.alpha)) ** 2 / (1 - self.p)

    @property
    def saturated(self) -> bool:
        """Whether the density equals 1 on ``[0, c]``."""
        return self.alpha * self.p <= 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p, al, c, d = self.p, self.alpha, self.c, self.d
        out = np.zeros_like(x)
        if self.saturated:
            out[(x >= 0) & (x <= c)] = 1.0
        bulk = (x > c) & (x < d)
        xb = x[bulk]
        num = xb * p + xb + p * al - 1
        root = np.sqrt(np.maximum((1 - p) ** 2 * (d - xb) * (xb - c), 0.0))
        out[bulk] = 0.5 - np.arctan2(num, root) / math.pi
        return out

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p, al, c, d = self.p, self.alpha, self.c, self.d
        out = np.zeros_like(x)
        b = (x > c) & (x < d)
        xb = x[b]
        root = np.sqrt((1 - p) ** 2 * (d - xb) * (xb - c))
        out[b] = (xb * (p - 1) * (al + 1) + (al * p - 1) * (al - 1)) / (
            2 * math.pi * xb * (xb + al - 1) * root
        )
        return out

    def cell_averages(self, edges: np.ndarray) -> np.ndarray:
        """Cell means, integrating exactly across the kinks at ``c`` and ``d``."""
        edges = np.asarray(edges, dtype=float)
        lo, hi = edges[:-1], edges[1:]
        out = gauss_cell_average(self, lo, hi)
        for k in np.nonzero(((lo < self.c) & (hi > self.c)) | ((lo < self.d) & (hi > self.d)))[0]:
            pts = [t for t in (self.c, self.d) if lo[k] < t < hi[k]]
            out[k] = integrate.quad(lambda t: float(self(np.array([t]))[0]), lo[k], hi[k], points=pts)[0] / (hi[k] - lo[k])
        return out

    def on_grid(self, hi: float, n: int) -> GridDensity:
        e = np.linspace(0.0, hi, n + 1)
        return GridDensity(0.0, hi, self.cell_averages(e))


def C_alpha(alpha: float) -> float:
    """``-((alpha-1)^2 log(alpha-1) - alpha^2 log(alpha) + 3 alpha) / 2``."""
    if alpha < 1:
        raise ValueError("defined for alpha >= 1")
    t = (alpha - 1) ** 2 * math.log(alpha - 1) if alpha > 1 else 0.0
    return -(t - alpha ** 2 * math.log(alpha) + 3 * alpha) / 2


def F_inf_closed(a: float, q: float, alpha: float = 1.0) -> float:
    """Minimal energy for the uncapped field."""
    p = a * q
    return alpha * math.log1p(-p) - 0.5 * math.log(p) - C_alpha(alpha)


def variational_constant(a: float, q: float, alpha: float = 1.0) -> float:
    """Value of ``-int log|y-x| phi(x) dx + V(y)/2`` on the bulk ``(c, d)``."""
    p = a * q
    return -(alpha * math.log(alpha) + math.log(p)) / 2 + (alpha + 1) / 2 * (math.log1p(-p) + 1)


# -- integral identities ---------------------------------------------------------

def I_minus_1(a, b, c, d):
    return math.pi * math.log(abs(a * a + b * b * c * c / (d * d))) / (2 * c * d)


def I_plus_1(a, b, c, d):
    return math.pi / (c * d) * math.log(abs(a + b * c / d))


def I_minus_2(a, b):
    return math.pi / 4 * math.log(a * a + b * b) - math.pi * b * b / (2 * (a * a + b * b))


def I_plus_2(a, b):
    return math.pi / 2 * math.log(a + b) - math.pi * b / (2 * (a + b))


def J_1(c, d):
    return math.pi / (2 * c * d)


def J_2():
    return math.pi / 4


_QUAD = dict(limit=400, epsabs=1e-13, epsrel=1e-12)


def I_quad(sign: int, a, b, c, d, n: int) -> float:
    """``int_0^inf log|a^2 +- b^2 z^2| / (c^2 + d^2 z^2)^n dz`` by adaptive quadrature."""

    def f(z):
        return math.log(abs(a * a + sign * b * b * z * z)) / (c * c + d * d * z * z) ** n

    if sign < 0 and b > 0 and a > 0:
        z0 = a / b
        # log singularity at z0: algebraic-log weights on both sides
        g = lambda z: 1.0 / (c * c + d * d * z * z) ** n
        h = lambda z: (math.log(b * b * (z + z0))) / (c * c + d * d * z * z) ** n
        left = integrate.quad(g, 0, z0, weight="alg-logb", wvar=(0.0, 0.0), **_QUAD)[0]
        left += integrate.quad(h, 0, z0, **_QUAD)[0]
        right = integrate.quad(g, z0, 2 * z0, weight="alg-loga", wvar=(0.0, 0.0), **_QUAD)[0]
        right += integrate.quad(h, z0, 2 * z0, **_QUAD)[0]
        tail = integrate.quad(f, 2 * z0, math.inf, **_QUAD)[0]
        return left + right + tail
    if a == 0:
        # log(b^2 z^2) = 2 log z + log b^2
        g = lambda z: 1.0 / (c * c + d * d * z * z) ** n
        head = 2 * integrate.quad(g, 0, 1, weight="alg-loga", wvar=(0.0, 0.0), **_QUAD)[0]
        head += math.log(b * b) * integrate.quad(g, 0, 1, **_QUAD)[0]
        return head + integrate.quad(f, 1, math.inf, **_QUAD)[0]
    return integrate.quad(f, 0, math.inf, **_QUAD)[0]


def J_quad(c, d, n: int) -> float:
    return integrate.quad(lambda z: 1.0 / (c * c + d * d * z * z) ** n, 0, math.inf, **_QUAD)[0]


def log_potential_closed(cf: ClosedFormEquilibrium, y: float) -> float:
    """``U(y) = -int_c^d log|x - y| phi(x) dx`` in closed form.

    At ``y = c`` or ``y = d`` the outer branch is continuous and gives the one-sided limit.
    """
    p, al, c, d = cf.p, cf.alpha, cf.c, cf.d
    if y <= 0:
        raise ValueError("closed form needs y > 0")
    r = math.sqrt(al * p)
    s = math.copysign(1.0, al * p - 1) if al * p != 1 else 0.0
    norm = abs(r + 1) + abs(r - 1)
    if c < y < d:
        inner = (
            y * s * math.log(math.sqrt(4 * y * r) / norm)
            - (y + al - 1) * math.log(math.sqrt(4 * (y + al - 1) * r) / (2 * math.sqrt(al)))
            + (al + 1) * math.log(math.sqrt(d - c) / 2)
            - 1
        )
    else:
        A, B = math.sqrt(abs(y - c)), math.sqrt(abs(y - d))
        inner = (
            y * s * math.log((A * abs(r + 1) + B * abs(r - 1)) / norm)
            - (y + al - 1) * math.log((A * (math.sqrt(al) + math.sqrt(p)) + B * (math.sqrt(al) - math.sqrt(p))) / (2 * math.sqrt(al)))
            + (al + 1) * math.log((A + B) / 2)
            - 1
        )
    phi_c = 1.0 if cf.saturated else 0.0
    g_c = ((y - c) * math.log(abs(y - c)) if y != c else 0.0) + c
    return -g_c * phi_c - inner


def log_potential_quad(cf: ClosedFormEquilibrium, y: float) -> float:
    """Quadrature for ``U(y)`` with ``x = c + (d-c)(1 - cos t)/2`` to tame the edge roots."""
    c, d = cf.c, cf.d

    def x_of(t):
        return c + (d - c) * (1 - math.cos(t)) / 2

    def f(t):
        x = x_of(t)
        return -math.log(abs(x - y)) * float(cf(np.array([x]))[0]) * (d - c) * math.sin(t) / 2

    if c < y < d:
        t0 = math.acos(1 - 2 * (y - c) / (d - c))
        return integrate.quad(f, 0, t0, **_QUAD)[0] + integrate.quad(f, t0, math.pi, **_QUAD)[0]
    return integrate.quad(f, 0, math.pi, **_QUAD)[0]


def potential_integral_closed(cf: ClosedFormEquilibrium) -> float:
    """``int_0^d V phi`` for the uncapped field."""
    p, al = cf.p, cf.alpha
    lam1 = math.log(al - 1) if al > 1 else 0.0
    sq = (al - 1) ** 2 * lam1
    if al * p > 1:
        return (al - 1) * math.log1p(-p) + sq - al ** 2 * math.log(al) + al * math.log(al) + 2 * al - 1
    first = ((al ** 2 - 1) * (p - 1) * math.log1p(-p) + (2 * al * p - p + 1) * math.log(p)) / (2 * (p - 1))
    second = (
        (al - 1) * (-al * p + (al - 1) * (p - 1) * lam1 + 2 * p - 3) + al * math.log(al) * (al - al * p + 2 * p)
    ) / (2 * (p - 1))
    return first + second


def potential_integral_quad(cf: ClosedFormEquilibrium) -> float:
    V = Field(cf.a, cf.q, cf.alpha)
    c, d = cf.c, cf.d

    def f(t):
        x = c + (d - c) * (1 - math.cos(t)) / 2
        return float(V(np.array([x]))[0] * cf(np.array([x]))[0]) * (d - c) * math.sin(t) / 2

    bulk = integrate.quad(f, 0, math.pi, **_QUAD)[0]
    if cf.saturated:
        bulk += integrate.quad(lambda x: float(V(np.array([x]))[0]), 0, c, **_QUAD)[0]
    return bulk


def square_log_closed(c: float) -> float:
    """``int_0^c int_0^c log|x - y| dx dy``."""
    return -1.5 * c * c + c * c * math.log(c)


def square_log_quad(c: float) -> float:
    # inner integral in closed form, outer by quadrature
    inner = lambda y: float(_log_antiderivative(np.array([c - y]))[0] + _log_antiderivative(np.array([y]))[0])
    return integrate.quad(inner, 0, c, **_QUAD)[0]


def saturated_field_integral_closed(cf: ClosedFormEquilibrium) -> float:
    """``int_0^c V(y) dy`` for the uncapped field."""
    p, al, c = cf.p, cf.alpha, cf.c
    t = (al - 1) ** 2 * math.log(al - 1) if al > 1 else 0.0
    return (c * c * math.log(c / p) - (c + al - 1) ** 2 * math.log(c + al - 1) + t + 3 * c * (al - 1)) / 2


def saturated_field_integral_quad(cf: ClosedFormEquilibrium) -> float:
    V = Field(cf.a, cf.q, cf.alpha)
    return integrate.quad(lambda x: float(V(np.array([x]))[0]), 0, cf.c, **_QUAD)[0]


def cross_log_closed(cf: ClosedFormEquilibrium) -> float:
    """``int_c^d ((x-c) log(x-c) - x log x + c) phi(x) dx``."""
    p, al = cf.p, cf.alpha
    r = math.sqrt(al * p)
    den = 2 * (p - 1) ** 2
    t1 = (
        p * (6 * al + al ** 2 * p - 4 * al * r - 4 * r + p) * math.log(r / (1 - p))
        - 3 * (r - 1) ** 4
        - 3 * (p - 1) * (r - 1) ** 2
    )
    t2 = al * (al + 1) * (p - 1) * p - (al + 1) * (p - 1) * r + 3 * (r - 1) ** 4 * math.log(1 - r)
    t3 = (al - 2 * r + p) ** 2 * math.log(1 - math.sqrt(p / al)) - (
        al * (p - 1) * (al * (p - 1) + 2) + (1 - r) ** 4
    ) * math.log1p(-p)
    return (t1 + t2 + t3) / den


def cross_log_quad(cf: ClosedFormEquilibrium) -> float:
    c, d = cf.c, cf.d

    def f(t):
        x = c + (d - c) * (1 - math.cos(t)) / 2
        g = ((x - c) * math.log(x - c) if x > c else 0.0) - x * math.log(x) + c
        return g * float(cf(np.array([x]))[0]) * (d - c) * math.sin(t) / 2

    return integrate.quad(f, 0, math.pi, **_QUAD)[0]


# -- named entry points ----------------------------------------------------------

def phi_closed_form(a: float, q: float, alpha: float = 1.0) -> ClosedFormEquilibrium:
    return ClosedFormEquilibrium(a, q, alpha)


def log_potential_U(a: float, q: float, alpha: float, y: float) -> tuple[float, float]:
    """Closed-form ``U(y)`` together with its quadrature value."""
    cf = ClosedFormEquilibrium(a, q, alpha)
    return log_potential_closed(cf, y), log_potential_quad(cf, y)


F_inf_closed_form = F_inf_closed


def integral_identity(kind: str, a: float, b: float, c: float, d: float, n: int) -> tuple[float, float]:
    """Closed value of one of the tabulated log integrals and ``|closed - quadrature|``.

    ``kind`` is ``"I-"``, ``"I+"`` or ``"J"``. For ``n = 2`` only ``c = d = 1`` is covered.
    """
    if c * d <= 0 or min(a, b, c, d) < 0:
        raise ValueError("need a, b, c, d >= 0 with cd > 0")
    if kind != "J" and a + b <= 0:
        raise ValueError("need a + b > 0")
    unit = c == 1 and d == 1
    if kind == "I-" and n == 1:
        closed, quad = I_minus_1(a, b, c, d), I_quad(-1, a, b, c, d, 1)
    elif kind == "I+" and n == 1:
        closed, quad = I_plus_1(a, b, c, d), I_quad(1, a, b, c, d, 1)
    elif kind == "I-" and n == 2 and unit:
        closed, quad = I_minus_2(a, b), I_quad(-1, a, b, 1, 1, 2)
    elif kind == "I+" and n == 2 and unit:
        closed, quad = I_plus_2(a, b), I_quad(1, a, b, 1, 1, 2)
    elif kind == "J" and n == 1:
        closed, quad = J_1(c, d), J_quad(c, d, 1)
    elif kind == "J" and n == 2 and unit:
        closed, quad = J_2(), J_quad(1, 1, 2)
    else:
        raise ValueError(f"no closed form for kind={kind!r}, n={n}, c={c}, d={d}")
    return closed, abs(closed - quad)


def default_domain(a: float, q: float, alpha: float = 1.0, y: float = math.inf) -> float:
    """``max(2d, y + 2, 8)`` with ``d`` the widest support edge over all caps."""
    d = (1 + math.sqrt(a * alpha)) ** 2 / (1 - a)
    top = 2 * d if not math.isfinite(y) else max(2 * d, y + 2)
    return max(top, 8.0)


def equilibrium_energy_F(
    a: float, q: float, alpha: float, y: float, dx: float = 0.01, tol: float = 1e-4, hi: float | None = None, init=None
) -> EquilibriumResult:
    """Solve for the field capped at ``y`` on a grid of step ``dx`` that has ``y`` as a node."""
    if hi is None:
        hi = default_domain(a, q, alpha)
    n = int(math.ceil(hi / dx - 1e-9))
    hi = n * dx
    if math.isfinite(y) and 0 < y < hi:
        hi, n = aligned_grid(hi, n, y)
    return solve_equilibrium(Field(a, q, alpha, y), hi, n, tol=tol, init=init)


def equilibrium_energy(a: float, q: float, alpha: float, y: float, **kw) -> float:
    """``F_alpha(y)``; the uncapped case ``y = inf`` returns the closed form."""
    if not math.isfinite(y):
        return F_inf_closed(a, q, alpha)
    return equilibrium_energy_F(a, q, alpha, y, **kw).energy
