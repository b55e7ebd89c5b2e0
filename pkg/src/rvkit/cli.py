"""Batch command-line interface: ``rvkit {expand,rv,vary,solve,check}``.

Configuration comes from an optional JSON file (``--config``) with
command-line flags taking precedence.  Every report embeds the resolved
configuration.  Output JSON is written with sorted keys so repeated runs
with the same configuration are byte-identical.

Exit codes: 0 success, 2 an asserted check failed, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .boundary import BoundaryError, RoundSphere, ellipse, load_boundary
from .expansion import expand_minimal_graph
from .renvol import HemisphereTail, check_equivalence, hadamard_rv, riesz_rv
from .solver import (NonexistenceError, ProfileTail, SolverError, end_expansions,
                     extract_coefficients, solve_rotational)
from .variation import first_variation, second_variation

log = logging.getLogger("rvkit")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3
COMMANDS = ("expand", "rv", "vary", "solve", "check")
FAMILIES = ("hemisphere", "catenoid")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    command: str
    boundary: dict | str | None = None
    family: str | None = None
    params: dict = field(default_factory=dict)
    m: int | None = None
    n: int | None = None
    order: int | None = None
    neumann: str | float = "zero"
    delta: float = 0.1
    param_step: float = 1e-3
    suite: str = "acceptance"
    out: str | None = None
    csv: str | None = None


# ------------------------------------------------------------- config
def _line_of(text, key):
    if text is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _where(source, text, key):
    line = _line_of(text, key)
    if source and line:
        return f"{source}:{line}: "
    return f"--{key.replace('_', '-')}: " if not source else f"{source}: "


def _parse_kv(items):
    out = {}
    for item in items or []:
        for part in item.split(","):
            if "=" not in part:
                raise ConfigError(f"expected key=value, got {part!r}")
            k, v = part.split("=", 1)
            try:
                out[k.strip()] = float(v) if any(c in v for c in ".eE") else int(v)
            except ValueError:
                raise ConfigError(f"value for {k!r} is not a number: {v!r}") from None
    return out


def _validate(cfg: RunConfig, source=None, text=None):
    def fail(key, msg):
        raise ConfigError(_where(source, text, key) + msg)

    if cfg.command not in COMMANDS:
        fail("command", f"unknown command {cfg.command!r}")
    if cfg.family is not None and cfg.family not in FAMILIES:
        fail("family", f"unknown family {cfg.family!r}; choose from {', '.join(FAMILIES)}")
    if cfg.m is not None and cfg.m < 2:
        fail("m", "m must be at least 2")
    if cfg.m is not None and cfg.n is not None and not cfg.m < cfg.n + 1:
        fail("n", f"dimensions need m < n + 1 (got m = {cfg.m}, n = {cfg.n})")
    if cfg.order is not None and cfg.m is not None and cfg.order < cfg.m + 2:
        fail("order", f"order must be at least m + 2 = {cfg.m + 2}")
    if not (isinstance(cfg.delta, (int, float)) and 0 < cfg.delta < 1):
        fail("delta", "delta must lie in (0, 1)")
    if not (isinstance(cfg.param_step, (int, float)) and 0 < cfg.param_step < 0.1):
        fail("param_step", "param-step must lie in (0, 0.1)")
    if isinstance(cfg.neumann, str) and cfg.neumann not in ("zero", "solver-fit") \
            and not cfg.neumann.endswith((".json", ".csv", ".txt")):
        fail("neumann", "neumann must be 'zero', 'solver-fit', a number, or a data file")
    if cfg.command == "expand" and cfg.boundary is None:
        fail("boundary", "expand needs a boundary (--sphere or --curve)")
    if cfg.command in ("vary",) and cfg.family not in (None, "catenoid"):
        fail("family", "vary supports the catenoid family")
    if cfg.command == "solve" and cfg.family is None:
        fail("family", "solve needs --family")


def resolve_config(args) -> tuple[RunConfig, dict]:
    data, text, source = {}, None, None
    if args.config:
        source = args.config
        try:
            with open(args.config) as fh:
                text = fh.read()
            data = json.loads(text)
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}:1: top level must be an object")
        known = {f.name for f in fields(RunConfig)}
        for key in data:
            if key not in known:
                raise ConfigError(f"{_where(source, text, key)}unknown key {key!r}")
    data["command"] = args.command
    if getattr(args, "sphere", None):
        data["boundary"] = _parse_kv(args.sphere)
    if getattr(args, "curve", None):
        data["boundary"] = args.curve
    if getattr(args, "ellipse", None):
        data["boundary"] = {"ellipse": _parse_kv(args.ellipse)}
    if getattr(args, "param", None):
        data["params"] = {**data.get("params", {}), **_parse_kv(args.param)}
    for key in ("family", "m", "n", "order", "neumann", "delta", "param_step", "suite",
                "out", "csv"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if isinstance(data.get("neumann"), str):
        try:
            data["neumann"] = float(data["neumann"])
        except ValueError:
            pass
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg, source, text)
    return cfg, asdict(cfg)


def _boundary(cfg: RunConfig):
    desc = cfg.boundary
    try:
        if isinstance(desc, dict) and "ellipse" in desc:
            e = desc["ellipse"]
            return ellipse(e.get("a", 2.0), e.get("b", 1.0), int(e.get("P", 64)),
                           int(e.get("n", cfg.n or 2)))
        if isinstance(desc, dict) and "R" in desc and "n" not in desc:
            desc = {**desc, "n": cfg.n or cfg.m or 2}
        bdy = load_boundary(desc)
    except (BoundaryError, OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"boundary: {exc}") from None
    if isinstance(bdy, RoundSphere) and cfg.m is not None and bdy.dim != cfg.m - 1:
        bdy = RoundSphere(bdy.R, bdy.n, cfg.m - 1)
    return bdy


def _neumann(cfg: RunConfig, bdy):
    nm = cfg.neumann
    if nm == "zero":
        return None
    if isinstance(nm, (int, float)):
        return float(nm)
    if nm == "solver-fit":
        if not isinstance(bdy, RoundSphere) or bdy.dim != bdy.n - 1:
            raise ConfigError("neumann: solver-fit needs a round codimension-one boundary")
        sol = solve_rotational("hemisphere", {"R": bdy.R}, m=bdy.dim + 1)
        return extract_coefficients(sol)[0]["u"][bdy.dim + 2]
    try:
        return np.loadtxt(nm, delimiter="," if nm.endswith(".csv") else None)
    except OSError as exc:
        raise ConfigError(f"neumann: {exc.strerror}: {nm}") from None


# ------------------------------------------------------------ commands
def _cmd_expand(cfg):
    bdy = _boundary(cfg)
    m = cfg.m or (bdy.dim + 1 if isinstance(bdy, RoundSphere) else 2)
    n = cfg.n or bdy.n
    g = expand_minimal_graph(bdy, m, n, neumann=_neumann(cfg, bdy), order=cfg.order)
    xs = np.geomspace(1e-3, 0.3, 40)
    rows = [("x", "u")] + [(float(x), float(np.mean(np.real(g.u[0].evaluate(x))))) for x in xs]
    return {"expansion": g.to_dict()}, rows, True


def _hemisphere_tail(cfg, bdy, m):
    return HemisphereTail(bdy.R, m)


def _cmd_rv(cfg):
    if cfg.family == "catenoid" or (cfg.family == "hemisphere" and cfg.params):
        sol = solve_rotational(cfg.family, cfg.params or None, m=cfg.m or 2)
        gs = end_expansions(sol)
        tail = ProfileTail(sol)
        m = sol.m
        scale = min(e.radius for e in sol.ends)
    else:
        bdy = _boundary(cfg) if cfg.boundary is not None else RoundSphere(1.0, cfg.n or 2, 1)
        if not isinstance(bdy, RoundSphere):
            raise ConfigError("boundary: rv needs a round boundary or a solver family")
        m = cfg.m or bdy.dim + 1
        bdy = RoundSphere(bdy.R, m, m - 1)
        neumann = -0.125 * bdy.R ** -3 if m == 3 else None
        gs = [expand_minimal_graph(bdy, m, m, neumann=neumann, order=cfg.order)]
        tail = _hemisphere_tail(cfg, bdy, m)
        scale = bdy.R
    delta = cfg.delta * scale
    res = riesz_rv(gs, tail, delta)
    ladder = scale * (np.geomspace(0.2, 0.005, 30) if m >= 4 else np.geomspace(1e-1, 1e-4, 24))
    samples = [float(tail.tail(e)[0]) for e in ladder]
    had = hadamard_rv(samples, m, ladder, extra=8 if m >= 4 else 3)
    report = {"riesz": res.to_dict(), "hadamard": had.to_dict()}
    if len(gs) == 1:
        eq = check_equivalence(gs, tail, deltas=tuple(d * scale for d in (0.05, 0.1, 0.2)),
                               eps=ladder if m >= 4 else None)
        report["equivalence"] = eq
    rows = [("epsilon", "area")] + list(zip(map(float, ladder), samples))
    return report, rows, report.get("equivalence", {}).get("passed", True)


def _family_point(d, rho=1.0):
    return rho * math.exp(-d / 2), rho * math.exp(d / 2)


def _catenoid_data(d, rho, delta):
    R1, R2 = _family_point(d, rho)
    sol = solve_rotational("catenoid", {"R1": R1, "R2": R2})
    gs = end_expansions(sol)
    return riesz_rv(gs, ProfileTail(sol), delta).value, gs


def _cmd_vary(cfg):
    from .variation import jacobi_expansion

    d = float(cfg.params.get("separation", 0.5))
    rho = float(cfg.params.get("rho", 1.0))
    h = cfg.param_step
    delta = cfg.delta * rho * math.exp(-d / 2) / 10
    V = {t: _catenoid_data(d + t, rho, delta) for t in (-h, 0.0, h)}
    fd1 = (V[h][0] - V[-h][0]) / (2 * h)
    fd2 = (V[h][0] - 2 * V[0.0][0] + V[-h][0]) / h ** 2
    R0, Rp, Rm = (_family_point(d + t, rho) for t in (0.0, h, -h))
    gs = V[0.0][1]
    phis, accs = [], []
    for i, g in enumerate(gs):
        p0 = (Rp[i] - Rm[i]) / (2 * h)
        a0 = (Rp[i] - 2 * R0[i] + Rm[i]) / h ** 2
        du3 = (V[h][1][i].u[0].coeff(3) - V[-h][1][i].u[0].coeff(3)) / (2 * h)
        p3 = du3 - 6 * g.u[0].coeff(2) * g.u[0].coeff(3) * p0
        phis.append(jacobi_expansion(g, p0, p3).phidot)
        accs.append(a0)
    fv = first_variation(gs, phis)
    sv = second_variation(gs, phis, accs)
    table = [{"quantity": "first", "finite_difference": fd1, "general": fv["general"],
              "closed_form": fv["closed_form"],
              "relative_error": abs(fv["general"] - fd1) / abs(fd1)}]
    for key in ("theorem", "closed_form", "theorem_with_hessian", "family_form"):
        table.append({"quantity": f"second/{key}", "finite_difference": fd2, "value": sv[key],
                      "relative_error": abs(sv[key] - fd2) / abs(fd2)})
    rows = [("quantity", "finite_difference", "value")]
    rows.append(("first", fd1, fv["general"]))
    rows += [(t["quantity"], t["finite_difference"], t["value"]) for t in table[1:]]
    report = {"family": "catenoid", "separation": d, "rho": rho, "step": h,
              "renormalized_volume": V[0.0][0], "table": table,
              "second_variation_terms": sv["terms"]}
    return report, rows, table[0]["relative_error"] < 2e-3


def _cmd_solve(cfg):
    sol = solve_rotational(cfg.family, cfg.params or None, m=cfg.m or 2)
    fits = extract_coefficients(sol)
    report = {"solution": sol.to_dict(samples=False), "coefficients": fits}
    return report, sol.csv_rows(), bool(sol.validation.get("passed", True))


def _cmd_check(cfg):
    from .checks import SUITES, run_suite

    if cfg.suite not in SUITES:
        raise ConfigError(f"suite: unknown suite {cfg.suite!r}; choose from {sorted(SUITES)}")
    results = run_suite(cfg.suite)
    for r in results:
        print(r.line(), file=sys.stderr)
    rows = [("check", "passed", "measured", "tolerance")]
    rows += [(r.name, int(r.passed), r.measured, r.tolerance) for r in results]
    ok = all(r.passed for r in results if r.asserted)
    return {"suite": cfg.suite, "results": [r.to_dict() for r in results]}, rows, ok


HANDLERS = {"expand": _cmd_expand, "rv": _cmd_rv, "vary": _cmd_vary,
            "solve": _cmd_solve, "check": _cmd_check}


# -------------------------------------------------------------- output
def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_outputs(report, rows, cfg: RunConfig):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.csv and rows:
        with open(cfg.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)


def build_parser():
    p = argparse.ArgumentParser(prog="rvkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rvkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="write the JSON report here (default stdout)")
        sp.add_argument("--csv", help="write plot data as CSV here")
        sp.add_argument("-v", "--verbose", action="store_true")

    def geometry(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--sphere", action="append", metavar="R=..",
                       help="round boundary, e.g. R=1 (with --n, --m)")
        g.add_argument("--curve", metavar="FILE", help="curve samples (.json or .csv)")
        g.add_argument("--ellipse", action="append", metavar="a=..,b=..",
                       help="ellipse boundary, e.g. a=2,b=1,P=64")
        sp.add_argument("--m", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--order", type=int)

    def family(sp):
        sp.add_argument("--family", help="solver family: hemisphere or catenoid")
        sp.add_argument("--param", action="append", metavar="k=v",
                        help="family parameters, e.g. rho=1,separation=0.5")

    sp = sub.add_parser("expand", help="boundary expansion of a minimal graph")
    common(sp)
    geometry(sp)
    sp.add_argument("--neumann", help="zero, solver-fit, a number, or a data file")

    sp = sub.add_parser("rv", help="renormalized volume (Riesz and Hadamard)")
    common(sp)
    geometry(sp)
    family(sp)
    sp.add_argument("--delta", type=float, help="split radius relative to the boundary scale")

    sp = sub.add_parser("vary", help="variations vs finite differences along a family")
    common(sp)
    family(sp)
    sp.add_argument("--param-step", dest="param_step", type=float)
    sp.add_argument("--delta", type=float)

    sp = sub.add_parser("solve", help="rotational minimal hypersurface solver")
    common(sp)
    family(sp)
    sp.add_argument("--m", type=int)

    sp = sub.add_parser("check", help="run a check suite")
    common(sp)
    sp.add_argument("--suite", help="parity or acceptance")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, resolved = resolve_config(args)
        report, rows, ok = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"rvkit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonexistenceError as exc:
        print(f"rvkit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ValueError) as exc:
        print(f"rvkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = {"config": resolved, "version": __version__, "report": report, "passed": ok}
    write_outputs(report, rows, cfg)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
