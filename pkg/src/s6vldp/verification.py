"""Self-checking suites behind the ``verify`` command.

Each suite returns ``{"config": ..., "results": [...], "pass": bool}`` where a
result is a dict with at least ``name`` and ``pass``.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate

from . import potential_theory as pt
from .height_core import HeightField, is_step_boundary, is_valid, k_star, upsilon
from .q_analysis import (
    cdf_shift_closed,
    cdf_shift_convolution,
    log_partition_S,
    pmf_chi,
    q_laplace_of_height,
    q_pochhammer,
    shift_distributions,
    shifted_tail,
)
from .s6v_model import ModelParams, sample_heights, verify_log_concavity, verify_weight_inequality


def _result(name: str, ok: bool, **info) -> dict:
    return {"name": name, "pass": bool(ok), **info}


def _report(config: dict, results: list) -> dict:
    return {"config": config, "results": results, "pass": all(r["pass"] for r in results)}


# -- injection ------------------------------------------------------------------

def random_step_pairs(params: ModelParams, M: int, N: int, n_pairs: int, seed: int, threads: int = 1):
    """Independent step-field pairs with a face where they differ, ordered so ``h(p) < h'(p)``.

    Pairs that agree everywhere are skipped, so fewer than ``n_pairs`` may be returned.
    """
    fields = sample_heights(params, M, N, 2 * n_pairs, seed, threads)
    rng = np.random.default_rng([seed, 1])
    for t in range(n_pairs):
        a, b = fields[2 * t], fields[2 * t + 1]
        diff = np.argwhere(a != b)
        if not diff.size:
            continue
        i, j = diff[rng.integers(len(diff))]
        if a[i, j] > b[i, j]:
            a, b = b, a
        yield HeightField(a), HeightField(b), (int(i), int(j))


def check_pair(params: ModelParams, h: HeightField, hp: HeightField, p, M: int, N: int) -> dict:
    r, rp = h[p], hp[p]
    k = k_star(h, hp, p, M, N)
    ht, htp = upsilon(h, hp, p, k)
    floor = -(-(rp - r) // 2)
    out = {
        "round_trip": upsilon(ht, htp, p, k) == (h, hp),
        "k_bounds": floor <= k <= floor + (M * N) ** (2 / 5),
        "valid": is_valid(ht) and is_valid(htp),
        "weight": verify_weight_inequality(params, h, hp, p, k).passed,
    }
    if rp >= r + k:
        out["shrinkage"] = ht[p] == rp - k and htp[p] == r + k
    if 0 <= k <= rp - r:
        out["step_preserved"] = is_step_boundary(ht) and is_step_boundary(htp)
    return out


def suite_injection(a=0.5, q=0.5, M=9, N=9, n_pairs=10_000, seed=2024, threads=1) -> dict:
    params = ModelParams(a, q)
    counts: dict[str, list[int]] = {}
    used = 0
    for h, hp, p in random_step_pairs(params, M, N, n_pairs, seed, threads):
        used += 1
        for key, ok in check_pair(params, h, hp, p, M, N).items():
            c = counts.setdefault(key, [0, 0])
            c[0] += 1
            c[1] += not ok
    results = [_result(k, v[1] == 0, checked=v[0], violations=v[1]) for k, v in sorted(counts.items())]
    results.append(_result("pairs_used", used > 0, value=used))
    return _report(dict(a=a, q=q, M=M, N=N, n_pairs=n_pairs, seed=seed), results)


# -- log-concavity --------------------------------------------------------------

def suite_logconcavity(sizes=((4, 4), (5, 5)), params=((0.5, 0.5), (0.3, 0.7))) -> dict:
    results = []
    for a, q in params:
        for M, N in sizes:
            rep = verify_log_concavity(ModelParams(a, q), M, N)
            results.append(
                _result(
                    f"a={a},q={q},M={M},N={N}",
                    rep.passed,
                    pairs=rep.pairs_checked,
                    point_violations=len(rep.point_violations),
                    tail_violations=len(rep.tail_violations),
                    tightest_point_margin=rep.tightest_point_margin,
                    tightest_tail_margin=rep.tightest_tail_margin,
                )
            )
    return _report(dict(sizes=[list(s) for s in sizes], params=[list(p) for p in params]), results)


# -- q-identities ---------------------------------------------------------------

def suite_qidentities(q=0.5, n_range=(-5, 10), tol=1e-10) -> dict:
    results = []
    dists = shift_distributions(q)
    gap = max(abs(cdf_shift_closed(n, q) - cdf_shift_convolution(n, dists)) for n in range(n_range[0], n_range[1] + 1))
    results.append(_result("shift_cdf_two_way", gap < tol, max_gap=gap, tol=tol))

    k = np.arange(60)
    chi = np.atleast_1d(pmf_chi(k, q))
    cums = np.cumsum(chi)
    closed = np.array([q_pochhammer(q ** (kk + 1), q) for kk in k])
    tele = float(np.abs(cums - closed).max())
    results.append(_result("chi_telescoping", tele < tol and abs(cums[-1] - 1) < tol, max_gap=tele, total=float(cums[-1])))

    z1 = math.exp(log_partition_S(q))
    z2 = math.exp(log_partition_S(q, 2 * (len(dists.s_support) // 2)))
    results.append(_result("S_normalisation", abs(z1 - z2) < 1e-12 and abs(z1 - 3.28327) < 1e-5, value=z1, doubled=z2))

    # q-Laplace transform equals the shifted tail at integer levels
    params = ModelParams(0.5, q)
    worst = 0.0
    for M, N in ((2, 2), (3, 2), (3, 3)):
        for kk in range(-2, 4):
            lhs = q_laplace_of_height(params, M, N, q ** (-kk))
            rhs = shifted_tail(params, M, N, kk / N)
            worst = max(worst, abs(lhs - rhs))
    results.append(_result("laplace_equals_shifted_tail", worst < tol, max_gap=worst))
    return _report(dict(q=q, n_range=list(n_range), tol=tol), results)


# -- appendix -------------------------------------------------------------------

_APPENDIX_TOL = 1e-6


def _plateau_potential(c: float, y: float) -> float:
    """``-int_0^c log|x - y| dx``."""
    F = lambda t: t * math.log(abs(t)) - t if t != 0 else 0.0
    return -(F(y) - F(y - c))


def suite_appendix(tol=_APPENDIX_TOL) -> dict:
    results = []
    identities = [
        ("I-", 1.3, 0.7, 1.1, 0.9, 1),
        ("I+", 1.3, 0.7, 1.1, 0.9, 1),
        ("I-", 1.3, 0.7, 1, 1, 2),
        ("I+", 1.3, 0.7, 1, 1, 2),
        ("J", 0, 0, 1.1, 0.9, 1),
        ("J", 0, 0, 1, 1, 2),
    ]
    for kind, a, b, c, d, n in identities:
        closed, res = pt.integral_identity(kind, a, b, c, d, n)
        results.append(_result(f"{kind}_n{n}", res < tol, closed=closed, residual=res))

    cases = {"saturated": (0.5, 0.5, 1.0), "unsaturated": (0.9, 0.9, 2.0)}
    for label, (a, q, al) in cases.items():
        cf = pt.ClosedFormEquilibrium(a, q, al)
        ys = {"inside": (cf.c + cf.d) / 2, "right": cf.d + 1.0}
        if cf.c > 0.05:
            ys["left"] = cf.c / 2
        for where, y in ys.items():
            closed, quad = pt.log_potential_U(a, q, al, y)
            results.append(_result(f"U_{where}_{label}", abs(closed - quad) < tol, closed=closed, residual=abs(closed - quad)))
        closed, quad = pt.potential_integral_closed(cf), pt.potential_integral_quad(cf)
        results.append(_result(f"int_V_phi_{label}", abs(closed - quad) < tol, closed=closed, residual=abs(closed - quad)))

        # the full potential plus V/2 is flat on the bulk
        V = pt.Field(a, q, al)
        lam = pt.variational_constant(a, q, al)
        worst = 0.0
        for y in np.linspace(cf.c, cf.d, 22)[1:-1]:
            u = pt.log_potential_quad(cf, y) + (_plateau_potential(cf.c, y) if cf.saturated else 0.0)
            worst = max(worst, abs(u + float(V(np.array([y]))[0]) / 2 - lam))
        results.append(_result(f"variational_constant_{label}", worst < 1e-5, value=lam, max_gap=worst))

    cf = pt.ClosedFormEquilibrium(0.5, 0.5, 1.0)
    lam = pt.variational_constant(0.5, 0.5, 1.0)
    results.append(_result("variational_constant_reference", abs(lam - 1.405465) < 1e-6, value=lam))
    for name, closed_fn, quad_fn, arg in (
        ("square_log", pt.square_log_closed, pt.square_log_quad, cf.c),
        ("saturated_field_integral", pt.saturated_field_integral_closed, pt.saturated_field_integral_quad, cf),
        ("cross_log", pt.cross_log_closed, pt.cross_log_quad, cf),
    ):
        closed, quad = closed_fn(arg), quad_fn(arg)
        results.append(_result(name, abs(closed - quad) < tol, closed=closed, residual=abs(closed - quad)))
    return _report(dict(tol=tol), results)


SUITES: dict[str, Callable[..., dict]] = {
    "injection": suite_injection,
    "logconcavity": suite_logconcavity,
    "qidentities": suite_qidentities,
    "appendix": suite_appendix,
}


def run_suite(name: str, **kw) -> dict:
    if name == "all":
        reports = {k: fn(**kw.get(k, {})) for k, fn in SUITES.items()}
        return {
            "config": {k: r["config"] for k, r in reports.items()},
            "results": [dict(r, suite=k) for k, rep in reports.items() for r in rep["results"]],
            "pass": all(r["pass"] for r in reports.values()),
        }
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](**kw)
