"""Command-line front end.

    fade run        --problem ex61 --alpha 0.5 --m 8 --tau 1e-5 --t-end 0.1 --weights gl1
    fade converge   --problem ex61 --alpha 0.2 --grids 8,16,32,64,128 --tau 1e-5
    fade stability  --sweep eps --values 0.01,0.1,1,10 --kappa 10
    fade weights    --kind ctb --order 1 --m 4

Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dq_weights import dq_weights
from .problems import PROBLEM_IDS, convergence_rates, make_problem
from .splines import Grid
from .stability import SWEEP_AXES, assumption_sweep, critical_ratio
from .steppers import SCHEMES, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

FMT = "%.17g"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: Optional[str] = None
    alpha: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    beta_nl: Optional[float] = None
    initial: Optional[str] = None
    kappa: Optional[float] = None
    eps: Optional[float] = None
    m: Optional[int] = None
    mx: Optional[int] = None
    my: Optional[int] = None
    tau: Optional[float] = None
    t_end: Optional[float] = None
    scheme: Optional[str] = None
    weights: Optional[str] = None
    solver: str = "auto"
    out: str = "."
    every: int = 0
    grids: list = field(default_factory=list)

    def hash(self) -> str:
        # the output location does not change the numbers
        d = asdict(self)
        d.pop("out")
        return _digest(d)

    def problem_spec(self):
        if self.problem is None:
            raise ConfigError("--problem is required")
        if self.scheme is not None and self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        params = dict(alpha=self.alpha, beta1=self.beta1, beta2=self.beta2, beta_nl=self.beta_nl,
                      initial=self.initial, kappa=self.kappa, eps=self.eps)
        return make_problem(self.problem, **params)


def _digest(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _fmt(v) -> str:
    return FMT % v


def provenance(cfg_hash: str) -> str:
    return f"# fade {__version__} {cfg_hash}\n"


def write_csv(path: Path, header, rows, cfg_hash: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(provenance(cfg_hash))
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in r) + "\n")


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v.strip("\"'")
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FADE_THREADS", "1")))
    except ValueError:
        raise ConfigError("FADE_THREADS must be an integer") from None


def _ordered_map(fn, items):
    items = list(items)
    n = min(_threads(), len(items)) or 1
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _int_list(s):
    try:
        return [int(v) for v in str(s).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {s!r}") from None


def _float_list(s):
    try:
        return [float(v) for v in str(s).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated number list, got {s!r}") from None


# -- subcommands --------------------------------------------------------------------

def _errors_dict(traj) -> dict:
    out = {k: v.as_dict() for k, v in traj.errors.items()}
    flat = dict(out.get("u", {}))
    flat.update({k: v for k, v in out.items() if k != "u"})
    flat["runtime_seconds"] = traj.runtime
    flat["config"] = traj.config
    if traj.newton_iterations:
        flat["newton_iterations_max"] = int(max(traj.newton_iterations))
    return flat


def solution_rows(traj, every: int = 0):
    idx = range(len(traj.times))
    if every <= 0:
        idx = [len(traj.times) - 1]
    else:
        idx = [k for k in idx if k % every == 0 or k == len(traj.times) - 1]
    g = traj.grid
    two_d = not isinstance(g, Grid)
    cplx = traj.problem.complex_valued
    header = ["t", "x"] + (["y"] if two_d else []) + ["u"] + (["v"] if cplx else [])
    rows = []
    for k in idx:
        t = traj.times[k]
        f = traj.field(k)
        if two_d:
            X, Y = g.mesh()
            for xv, yv, uv in zip(X.ravel(), Y.ravel(), f.ravel()):
                rows.append((t, xv, yv, uv))
        else:
            for xv, uv in zip(g.x, f):
                rows.append((t, xv, uv.real, uv.imag) if cplx else (t, xv, uv))
    return header, rows


def cmd_run(cfg: RunConfig) -> int:
    p = cfg.problem_spec()
    traj = run(p, M=cfg.m, Mx=cfg.mx, My=cfg.my, tau=cfg.tau, t_end=cfg.t_end, scheme=cfg.scheme,
               weights=cfg.weights, store="all" if cfg.every > 0 else "final", solver=cfg.solver)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    header, rows = solution_rows(traj, cfg.every)
    write_csv(out / "solution.csv", header, rows, h)
    errs = _errors_dict(traj)
    errs["provenance"] = provenance(h).strip()
    with open(out / "errors.json", "w") as fh:
        json.dump(errs, fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary = {k: errs[k] for k in ("e2", "einf", "eN") if k in errs}
    for part in ("real", "imag"):
        if part in errs:
            summary[part + "_e2"] = errs[part]["e2"]
    print(json.dumps(summary), f"runtime={traj.runtime:.3f}s")
    return EXIT_OK


def convergence_table(cfg: RunConfig):
    if len(cfg.grids) < 1:
        raise ConfigError("--grids needs at least one grid size")
    p = cfg.problem_spec()

    def one(M):
        t = run(p, M=M, tau=cfg.tau, t_end=cfg.t_end, scheme=cfg.scheme, weights=cfg.weights,
                store="final", solver=cfg.solver)
        key = "u" if "u" in t.errors else "real"
        if key not in t.errors:
            raise ConfigError(f"problem {p.id} has no exact solution to score against")
        return t.errors[key]

    reports = convergence_rates(_ordered_map(one, cfg.grids))
    header = ["M", "e2", "rate_e2", "einf", "rate_einf"]
    rows = [(str(M), r.e2, "" if r.rate_e2 is None else r.rate_e2, r.einf,
             "" if r.rate_einf is None else r.rate_einf) for M, r in zip(cfg.grids, reports)]
    return header, rows


def cmd_converge(cfg: RunConfig) -> int:
    header, rows = convergence_table(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "converge.csv", header, rows, cfg.hash())
    print(",".join(header))
    for r in rows:
        print(",".join(v if isinstance(v, str) else "%.4e" % v for v in r))
    return EXIT_OK


def cmd_stability(args, cfg_hash: str) -> int:
    fixed = {k: v for k, v in dict(kappa=args.kappa, eps=args.eps, M=args.m, tau=args.tau,
                                    alpha=args.alpha, domain_extent=args.domain_extent).items()
             if v is not None}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.critical:
        r = critical_ratio(kappa_max=args.kappa_max, fixed=fixed)
        write_csv(out / "critical.csv", ["kappa_max", "critical_ratio"], [(args.kappa_max, r)], cfg_hash)
        print(f"critical kappa/eps = {r:.6g}")
        return EXIT_OK
    if args.sweep is None or args.values is None:
        raise ConfigError("stability needs --sweep and --values (or --critical)")
    if args.sweep not in SWEEP_AXES:
        raise ConfigError(f"--sweep must be one of {SWEEP_AXES}")
    values = _float_list(args.values)
    reports = _ordered_map(lambda v: assumption_sweep(args.sweep, [v], fixed)[0], values)
    rows = [(args.sweep, v, r.resolvent_norm) for v, r in zip(values, reports)]
    write_csv(out / "sweep.csv", ["param", "value", "resolvent_norm"], rows, cfg_hash)
    if args.spectrum:
        spec_rows = [(z.real, z.imag) for r in reports for z in r.spectrum]
        write_csv(out / "spectrum.csv", ["re", "im"], spec_rows, cfg_hash)
    for _, v, n in rows:
        print(f"{args.sweep}={v:g} resolvent_norm={n:.6f}")
    return EXIT_OK


def cmd_weights(args, cfg_hash: str) -> int:
    if args.m is None:
        raise ConfigError("--m is required")
    grid = Grid(args.a, args.b, args.m)
    kind = args.kind
    if args.order not in (1.0, 2.0) and args.kind in ("ctb", "mctb"):
        kind = "cubicb"
    method = args.method
    if method == "fractional":
        kind = "cubicb"
    W = dq_weights(args.order, grid, kind, method=method)
    header = ["row"] + [f"col{j}" for j in range(grid.M + 1)]
    rows = [(str(int(i)),) + tuple(W.entries[k]) for k, i in enumerate(W.rows)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "weights.csv", header, rows, cfg_hash)
    print(f"wrote {len(rows)}x{grid.M + 1} weights to {out / 'weights.csv'}")
    return EXIT_OK


# -- argument handling ----------------------------------------------------------------

def _add_problem_flags(sp):
    sp.add_argument("--problem", choices=PROBLEM_IDS)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--beta1", type=float)
    sp.add_argument("--beta2", type=float)
    sp.add_argument("--beta-nl", dest="beta_nl", type=float)
    sp.add_argument("--initial", choices=("soliton", "collision"))
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--m", type=int)
    sp.add_argument("--mx", type=int)
    sp.add_argument("--my", type=int)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--scheme", choices=SCHEMES)
    sp.add_argument("--weights", choices=("gl1", "ho3"))
    sp.add_argument("--solver", choices=("auto", "dense", "kron"))
    sp.add_argument("--out")
    sp.add_argument("--config", help="key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fade", description="Spline DQ solvers for fractional advection-diffusion.")
    ap.add_argument("--version", action="version", version=f"fade {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="integrate one problem and write solution.csv / errors.json")
    _add_problem_flags(sp)
    sp.add_argument("--every", type=int, help="write every k-th level (default: final only)")

    sp = sub.add_parser("converge", help="error table over a list of grids")
    _add_problem_flags(sp)
    sp.add_argument("--grids", help="comma-separated grid sizes, e.g. 8,16,32")

    sp = sub.add_parser("stability", help="resolvent-norm sweep")
    sp.add_argument("--sweep", choices=SWEEP_AXES)
    sp.add_argument("--values")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--m", type=int)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--domain-extent", dest="domain_extent", type=float)
    sp.add_argument("--critical", action="store_true", help="locate the kappa/eps crossing of 1")
    sp.add_argument("--kappa-max", dest="kappa_max", type=float, default=200.0)
    sp.add_argument("--spectrum", action="store_true", help="also write spectrum.csv")
    sp.add_argument("--out", default=".")

    sp = sub.add_parser("weights", help="dump a DQ weight matrix")
    sp.add_argument("--kind", default="ctb", choices=("ctb", "mctb", "cubicb", "mcb"))
    sp.add_argument("--order", type=float, default=1.0)
    sp.add_argument("--m", type=int)
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--b", type=float, default=1.0)
    sp.add_argument("--method", default="recursion", choices=("recursion", "direct", "fractional"))
    sp.add_argument("--out", default=".")
    return ap


_TYPES = {f: t for f, t in (("alpha", float), ("beta1", float), ("beta2", float), ("beta_nl", float),
                            ("kappa", float), ("eps", float), ("m", int), ("mx", int), ("my", int),
                            ("tau", float), ("t_end", float), ("every", int))}


def config_from_args(args) -> RunConfig:
    merged = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config"):
            merged[k] = v
    cfg = RunConfig()
    known = set(asdict(cfg))
    for k, v in merged.items():
        if k not in known:
            raise ConfigError(f"unknown configuration key {k!r}")
        if k == "grids":
            v = _int_list(v)
        elif k in _TYPES and isinstance(v, str):
            try:
                v = _TYPES[k](v)
            except ValueError:
                raise ConfigError(f"bad value for {k}: {v!r}") from None
        setattr(cfg, k, v)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command in ("run", "converge"):
            cfg = config_from_args(args)
            return cmd_run(cfg) if args.command == "run" else cmd_converge(cfg)
        cfg_hash = _digest({k: v for k, v in vars(args).items() if k != "out"})
        if args.command == "stability":
            return cmd_stability(args, cfg_hash)
        return cmd_weights(args, cfg_hash)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fade: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"fade: configuration error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
