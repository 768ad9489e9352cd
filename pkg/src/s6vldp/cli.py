"""Command line front end: ``s6vldp <command> [options]``.

Options can also come from a flat ``key=value`` file given with ``--config``;
flags on the command line win. JSON reports carry the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

DEFAULTS = dict(
    a=0.5,
    q=0.5,
    alpha=1.0,
    M=3,
    N=3,
    seed=0,
    threads=os.cpu_count() or 1,
    output=None,
    format="csv",
    mode="exact",
    n_samples=10000,
    zeta="0.1,1,10",
    max_part=60,
    n=2000,
    y=math.inf,
    tol=1e-4,
    dy=0.01,
    ds=0.001,
    suite="all",
    n_pairs=10000,
)


@dataclass
class RunConfig:
    command: str
    a: float
    q: float
    alpha: float
    M: int
    N: int
    seed: int
    threads: int
    output: str | None
    format: str
    mode: str
    n_samples: int
    zeta: str
    max_part: int
    n: int
    y: float
    tol: float
    dy: float
    ds: float
    suite: str
    n_pairs: int

    def validate(self) -> None:
        if not (0 < self.a < 1 and 0 < self.q < 1):
            raise ValueError("a and q must lie in (0, 1)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.mode not in ("exact", "mc"):
            raise ValueError("mode must be exact or mc")
        for name in ("n_samples", "max_part", "n", "n_pairs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("tol", "dy", "ds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def as_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["y"]):
            d["y"] = "inf"
        return d


def read_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def resolve(args: argparse.Namespace) -> RunConfig:
    file_vals = read_config_file(args.config) if args.config else {}
    types = {f.name: f.type for f in fields(RunConfig)}
    vals = {"command": args.command}
    for key, default in DEFAULTS.items():
        v = getattr(args, key, None)
        if v is None:
            v = file_vals.pop(key, default)
        else:
            file_vals.pop(key, None)
        vals[key] = _coerce(key, v, types[key])
    unknown = set(file_vals) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**vals)
    cfg.validate()
    return cfg


def _coerce(key: str, v, typ: str):
    # annotations are strings under postponed evaluation
    if v is None:
        return None
    if typ == "int":
        return int(v)
    if typ == "float":
        return float(v)
    return str(v)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        return str(o)

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, default=default) + "\n"


# -- commands --------------------------------------------------------------------

def cmd_sample(cfg: RunConfig) -> int:
    from .s6v_model import ModelParams, sample_height

    h = sample_height(ModelParams(cfg.a, cfg.q), cfg.M, cfg.N, cfg.seed)
    if cfg.format == "json":
        _emit(_json({"config": cfg.as_dict(), "heights": h.values.tolist(), "observable": h.observable()}), cfg.output)
    else:
        _emit(h.to_csv(), cfg.output)
    return 0


def cmd_tail(cfg: RunConfig) -> int:
    from .s6v_model import ModelParams, tail_probability

    t = tail_probability(ModelParams(cfg.a, cfg.q), cfg.M, cfg.N, cfg.mode, cfg.n_samples, cfg.seed, cfg.threads)
    if cfg.format == "json":
        rows = [{"r": r, "prob": float(p), "stderr": None if t.stderr is None else t.stderr[r]} for r, p in enumerate(t.probs)]
        _emit(_json({"config": cfg.as_dict(), "results": rows, "pass": True}), cfg.output)
    else:
        _emit(t.to_csv(), cfg.output)
    return 0


def cmd_moment_match(cfg: RunConfig) -> int:
    from .schur_gas import moment_match

    zetas = [float(z) for z in cfg.zeta.split(",") if z.strip()]
    results = []
    for z in zetas:
        r = moment_match(cfg.a, cfg.q, cfg.M, cfg.N, z, cfg.max_part).as_dict()
        r["pass"] = r["gap"] < 1e-8
        results.append(r)
    report = {"config": cfg.as_dict(), "results": results, "pass": all(r["pass"] for r in results)}
    _emit(_json(report), cfg.output if cfg.format == "json" else None)
    return 0 if report["pass"] else 1


def cmd_equilibrium(cfg: RunConfig) -> int:
    from . import potential_theory as pt

    if cfg.alpha < 1:
        raise ValueError("the equilibrium problem needs alpha >= 1")
    hi = pt.default_domain(cfg.a, cfg.q, cfg.alpha, cfg.y)
    res = pt.equilibrium_energy_F(cfg.a, cfg.q, cfg.alpha, cfg.y, dx=hi / cfg.n, tol=cfg.tol, hi=hi)
    rho = res.density
    report = {
        "energy": res.energy,
        "lagrange": res.lagrange,
        "residuals": res.residuals,
        "converged": res.converged,
        "iterations": res.iterations,
        "support": list(rho.support()),
        "saturation_edge": rho.saturation_edge(),
    }
    closed_col = None
    if math.isinf(cfg.y):
        cf = pt.ClosedFormEquilibrium(cfg.a, cfg.q, cfg.alpha)
        closed_col = cf.cell_averages(rho.edges)
        report.update(
            closed_energy=pt.F_inf_closed(cfg.a, cfg.q, cfg.alpha),
            closed_support=[cf.c, cf.d],
            l1_error=float(np.abs(closed_col - rho.values).sum() * rho.dx),
        )
        report["energy_error"] = abs(report["energy"] - report["closed_energy"])
    if cfg.output:
        lines = ["x,phi_solver,phi_closed"]
        for k, (x, v) in enumerate(zip(rho.centers, rho.values)):
            c = "" if closed_col is None else repr(float(closed_col[k]))
            lines.append(f"{float(x)!r},{float(v)!r},{c}")
        _emit("\n".join(lines) + "\n", cfg.output)
    _emit(_json({"config": cfg.as_dict(), "results": [report], "pass": bool(res.converged)}), None)
    return 0 if res.converged else 1


def cmd_rate(cfg: RunConfig) -> int:
    from .rate_functions import RateParams, parabola, phi_minus, rate_properties_report, tabulate_F

    P = RateParams(cfg.a, cfg.q, cfg.alpha)
    table = tabulate_F(P, dy=cfg.dy, tol=cfg.tol, threads=cfg.threads)
    phi = phi_minus(P, table, ds=cfg.ds)
    rep = rate_properties_report(table, phi)
    if cfg.output:
        s = phi.grid
        F = table.F(s)
        lines = ["s,F,Phi,parabola_gap"]
        for x, f, v in zip(s, F, phi.values):
            lines.append(f"{float(x)!r},{float(f)!r},{float(v)!r},{float(f - parabola(P, x))!r}")
        _emit("\n".join(lines) + "\n", cfg.output)
    report = {
        "config": cfg.as_dict(),
        "results": [
            {
                "phi_at_1": rep["phi_at_1"],
                "phi_at_1_target": rep["phi_at_1_target"],
                "phi_at_mu": rep["phi_at_mu"],
                "mu": rep["mu"],
                "y_big": rep["y_big"],
                "tail_residuals": rep["tail_residuals"],
                "round_trip_error": rep["round_trip_error"],
                "pass": rep["pass"],
            }
        ],
        "phi_at_1": rep["phi_at_1"],
        "pass": rep["pass"],
    }
    _emit(_json(report), None)
    return 0 if rep["pass"] else 1


def cmd_verify(cfg: RunConfig) -> int:
    from .verification import run_suite

    inj = dict(a=cfg.a, q=cfg.q, n_pairs=cfg.n_pairs, seed=cfg.seed, threads=cfg.threads)
    if cfg.suite == "all":
        report = run_suite("all", injection=inj)
    elif cfg.suite == "injection":
        report = run_suite("injection", **inj)
    else:
        report = run_suite(cfg.suite)
    report["config"] = {"run": cfg.as_dict(), "suite": report["config"]}
    _emit(_json(report), cfg.output)
    return 0 if report["pass"] else 1


COMMANDS = {
    "sample": cmd_sample,
    "tail": cmd_tail,
    "moment-match": cmd_moment_match,
    "equilibrium": cmd_equilibrium,
    "rate": cmd_rate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="s6vldp", description="Stochastic six-vertex lower-tail toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="file of key=value lines; flags override it")
        sp.add_argument("--a", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--output", help="write the main table here instead of stdout")
        sp.add_argument("--format", choices=["csv", "json"])

    sp = sub.add_parser("sample", help="one step-boundary height field as CSV i,j,h")
    common(sp)
    sp.add_argument("--M", type=int)
    sp.add_argument("--N", type=int)

    sp = sub.add_parser("tail", help="tail probabilities P(h(M,N) >= r)")
    common(sp)
    sp.add_argument("--M", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--mode", choices=["exact", "mc"])
    sp.add_argument("--n-samples", dest="n_samples", type=int)

    sp = sub.add_parser("moment-match", help="q-Laplace transform against the partition-side expectation")
    common(sp)
    sp.add_argument("--M", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--zeta", help="comma separated list")
    sp.add_argument("--max-part", dest="max_part", type=int)

    sp = sub.add_parser("equilibrium", help="solve the capped energy problem")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--y", type=float, help="cap of the field (default: uncapped)")
    sp.add_argument("--n", type=int, help="number of grid cells")
    sp.add_argument("--tol", type=float)

    sp = sub.add_parser("rate", help="tabulate F and Phi")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--dy", type=float)
    sp.add_argument("--ds", type=float)

    sp = sub.add_parser("verify", help="run a verification suite")
    common(sp)
    sp.add_argument("--suite", choices=["injection", "logconcavity", "qidentities", "appendix", "all"])
    sp.add_argument("--n-pairs", dest="n_pairs", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    try:
        return COMMANDS[cfg.command](cfg)
    except ValueError as exc:
        print(f"s6vldp {cfg.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
