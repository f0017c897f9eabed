"""Command-line driver.

Subcommands: solve, lambda-star, sweep, eig, oracle, check.  All accept
--config pointing to a ``key = value`` file; unset keys fall back to the
defaults below.  Exit codes: 0 success, 1 solver failure (no convergence,
divergence, invalid bracket), 2 configuration or usage error.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import branch_minus as bm
from . import branch_plus as bp
from . import checks
from . import mesh
from . import shooting as sh
from .errors import (
    BracketInvalid,
    ConfigError,
    FileFormat,
    GridMismatch,
    GridTooCoarse,
    NoConvergence,
    NonPositivePotential,
    OrderingFailed,
    UnsupportedKind,
    ZeroField,
)
from .potentials import UNIT, PotentialSpec, make_potential, pair_stats
from .problem import VARIANTS, ProblemSpec, assemble_diagram, record_from_report, write_diagram


@dataclass(frozen=True)
class RunConfig:
    kind: str = "interval"
    counts: tuple = (201,)
    q: float = 0.5
    p: float = 3.0
    variant: str = "plus"
    k: PotentialSpec = UNIT
    h: PotentialSpec = UNIT
    tol_linear: float = 1e-10
    tol_fixed_point: float = 1e-10
    tol_lambda: float = 1e-2
    tol_gradient: float = 1e-8
    nontrivial_floor: float = 1e-4
    energy_floor: float = 1e-10
    norm_cap: float = 1e6
    seed: int = 42


def _as_float(key, value, line):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {value!r}", line) from None


def _positive(key, value, line):
    x = _as_float(key, value, line)
    if not x > 0.0:
        raise ConfigError(f"{key} must be positive", line)
    return x


def _parse_kind(value, line):
    if value not in (mesh.INTERVAL, mesh.RECTANGLE):
        raise ConfigError(f"kind must be interval or rectangle, got {value!r}", line)
    return value


def _parse_counts(value, line):
    try:
        counts = tuple(int(tok) for tok in value.split())
    except ValueError:
        raise ConfigError(f"counts expects integers, got {value!r}", line) from None
    if not 1 <= len(counts) <= 2 or any(c < 2 for c in counts):
        raise ConfigError("counts takes one or two node counts of at least 2", line)
    return counts


def _parse_q(value, line):
    x = _as_float("q", value, line)
    if not 0.0 < x < 1.0:
        raise ConfigError("q must lie strictly between 0 and 1", line)
    return x


def _parse_p(value, line):
    x = _as_float("p", value, line)
    if not x > 1.0:
        raise ConfigError("p must exceed 1", line)
    return x


def _parse_variant(value, line):
    if value not in VARIANTS:
        raise ConfigError(f"variant must be one of {'/'.join(VARIANTS)}, got {value!r}", line)
    return value


def _parse_potential(value, line):
    tokens = value.split()
    if not tokens:
        raise ConfigError("potential needs a shape", line)
    shape, rest = tokens[0], tokens[1:]
    try:
        if shape == "file":
            if len(rest) != 1:
                raise ConfigError("file potential takes exactly one path", line)
            return PotentialSpec("file", path=rest[0])
        return PotentialSpec(shape, tuple(float(tok) for tok in rest))
    except ValueError as e:
        raise ConfigError(str(e), line) from None


def _parse_seed(value, line):
    try:
        seed = int(value)
    except ValueError:
        raise ConfigError(f"seed expects an integer, got {value!r}", line) from None
    if seed < 0:
        raise ConfigError("seed must be nonnegative", line)
    return seed


_KEYS = {
    "kind": _parse_kind,
    "counts": _parse_counts,
    "q": _parse_q,
    "p": _parse_p,
    "variant": _parse_variant,
    "k": _parse_potential,
    "h": _parse_potential,
    "tol_linear": lambda v, n: _positive("tol_linear", v, n),
    "tol_fixed_point": lambda v, n: _positive("tol_fixed_point", v, n),
    "tol_lambda": lambda v, n: _positive("tol_lambda", v, n),
    "tol_gradient": lambda v, n: _positive("tol_gradient", v, n),
    "nontrivial_floor": lambda v, n: _positive("nontrivial_floor", v, n),
    "energy_floor": lambda v, n: _positive("energy_floor", v, n),
    "norm_cap": lambda v, n: _positive("norm_cap", v, n),
    "seed": _parse_seed,
}


def parse_config(text: str) -> RunConfig:
    """``key = value`` per line; # starts a comment; unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if not value:
            raise ConfigError(f"empty value for {key}", lineno)
        values[key] = _KEYS[key](value, lineno)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text)


def config_grid(cfg: RunConfig):
    return mesh.build_grid(cfg.kind, cfg.counts)


def config_spec(cfg: RunConfig, grid, variant=None) -> ProblemSpec:
    pair = pair_stats(make_potential(grid, cfg.k), make_potential(grid, cfg.h))
    return ProblemSpec(cfg.q, cfg.p, variant or cfg.variant, pair)


def iterate_options(cfg: RunConfig) -> bp.IterateOptions:
    return bp.IterateOptions(tol=cfg.tol_fixed_point, norm_cap=cfg.norm_cap)


def minimize_options(cfg: RunConfig) -> bm.MinimizeOptions:
    return bm.MinimizeOptions(grad_tol=cfg.tol_gradient, seed=cfg.seed)


def _g(x) -> str:
    return format(float(x), ".17g")


def _print_report(variant, report, cfg):
    print(f"variant = {variant}")
    print(f"lambda = {_g(report.lam)}")
    print(f"converged = {int(report.converged)}")
    print(f"iterations = {report.iterations}")
    print(f"sup_norm = {_g(report.sup_norm)}")
    print(f"h1_norm = {_g(report.h1_norm)}")
    print(f"energy = {_g(report.energy)}")
    print(f"weak_residual = {_g(report.weak_residual)}")
    print(f"stability_slack = {_g(report.stability_slack)}")
    if variant == "minus":
        flag = bm.classify_nontrivial(report, cfg.nontrivial_floor, cfg.energy_floor)
        print(f"classified_nontrivial = {int(flag)}")


def cmd_solve(cfg, args) -> int:
    variant = args.variant or cfg.variant
    grid = config_grid(cfg)
    spec = config_spec(cfg, grid, variant)
    if variant == "plus":
        if args.lam <= 0.0:
            raise ValueError("plus variant needs lambda > 0")
        report = bp.minimal_solution(grid, spec, args.lam, iterate_options(cfg))
    else:
        report = bm.minimize_free(grid, spec, args.lam, minimize_options(cfg))
    _print_report(variant, report, cfg)
    if args.out:
        mesh.write_field(report.solution, args.out)
    if report.diverged:
        print("diverged (nonexistence regime)", file=sys.stderr)
        return 1
    if not report.converged:
        print("no convergence within the iteration budget", file=sys.stderr)
        return 1
    return 0


def _print_bracket(lo, hi):
    print(f"bracket_low = {_g(lo)}")
    print(f"bracket_high = {_g(hi)}")
    print(f"bracket_mid = {_g(0.5 * (lo + hi))}")


def cmd_lambda_star(cfg, args) -> int:
    variant = args.variant or cfg.variant
    tol = args.tol if args.tol is not None else cfg.tol_lambda
    grid = config_grid(cfg)
    spec = config_spec(cfg, grid, variant)
    print(f"variant = {variant}")
    if variant == "plus":
        star = bp.estimate_lambda_star_plus(grid, spec, tol, iterate_options(cfg))
        print(f"lambda0 = {_g(star.lambda0)}")
        print(f"lambda1 = {_g(star.lambda1)}")
        print(f"lambda_prime = {_g(star.lambda_upper)}")
    else:
        star = bm.estimate_lambda_star_minus(
            grid, spec, tol, minimize_options(cfg), cfg.nontrivial_floor, cfg.energy_floor
        )
        print(f"Lambda = {_g(star.Lambda)}")
        print(f"nontrivial_floor = {_g(star.nontrivial_floor)}")
        print(f"energy_floor = {_g(star.energy_floor)}")
    _print_bracket(*star.bracket)
    if args.diagram:
        write_diagram(star.diagram, args.diagram)
    return 0


def _sweep_point(payload):
    """One sweep record; module-level so process pools can pickle it."""
    cfg, variant, lam = payload
    grid = config_grid(cfg)
    spec = config_spec(cfg, grid, variant)
    if variant == "plus":
        diagram = bp.sweep_branch_plus(grid, spec, [lam], iterate_options(cfg))
    else:
        diagram = bm.sweep_branch_minus(
            grid, spec, [lam], minimize_options(cfg), cfg.nontrivial_floor, cfg.energy_floor
        )
    return diagram.records[0]


def cmd_sweep(cfg, args) -> int:
    variant = args.variant or cfg.variant
    if not args.lo < args.hi:
        raise ValueError("sweep needs --from below --to")
    if args.steps < 2:
        raise ValueError("sweep needs at least 2 steps")
    if args.jobs < 1:
        raise ValueError("--jobs must be at least 1")
    lams = np.linspace(args.lo, args.hi, args.steps)
    grid = config_grid(cfg)
    spec = config_spec(cfg, grid, variant)
    if args.jobs == 1:
        if variant == "plus":
            diagram = bp.sweep_branch_plus(grid, spec, lams, iterate_options(cfg))
        else:
            diagram = bm.sweep_branch_minus(
                grid, spec, lams, minimize_options(cfg), cfg.nontrivial_floor, cfg.energy_floor
            )
    else:
        payloads = [(cfg, variant, float(lam)) for lam in lams]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_sweep_point, payloads))
        if variant == "minus":
            records = _repair_upward(grid, spec, cfg, lams, records)
        diagram = assemble_diagram(records)
    write_diagram(diagram, args.out)
    print(f"wrote {len(diagram.records)} records to {args.out}")
    return 0


def _repair_upward(grid, spec, cfg, lams, records):
    """Recycle the first nontrivial minimizer as an obstacle wherever a
    larger lambda classified trivial (matches the sequential sweep)."""
    flags = [bool(r.classified_nontrivial) for r in records]
    first = next((i for i, f in enumerate(flags) if f), None)
    if first is None or all(flags[first:]):
        return records
    opts = minimize_options(cfg)
    witness = bm.minimize_free(grid, spec, float(lams[first]), opts).solution
    for j in range(first + 1, len(records)):
        if flags[j]:
            continue
        repaired = bm.obstacle_minimize(grid, spec, float(lams[j]), witness, opts)
        if bm.classify_nontrivial(repaired, cfg.nontrivial_floor, cfg.energy_floor):
            records[j] = record_from_report(repaired, classified_nontrivial=True)
    return records


def cmd_eig(cfg, args) -> int:
    grid = config_grid(cfg)
    pair = mesh.principal_eigenpair(grid, tol=cfg.tol_linear)
    print(f"kind = {grid.kind}")
    print(f"counts = {' '.join(str(c) for c in grid.counts)}")
    print(f"lambda1 = {_g(pair.eigenvalue)}")
    if args.out:
        mesh.write_field(pair.eigenfunction, args.out)
    return 0


def cmd_oracle(cfg, args) -> int:
    if cfg.kind != mesh.INTERVAL:
        raise ValueError("the shooting oracle handles the interval kind only")
    variant = args.variant or cfg.variant
    tol = args.tol if args.tol is not None else cfg.tol_lambda
    print(f"variant = {variant}")
    print("weights = unit (oracle is constant-coefficient)")
    lo, hi = sh.oracle_lambda_star(
        cfg.q, cfg.p, variant, tol, nontrivial_floor=cfg.nontrivial_floor
    )
    _print_bracket(lo, hi)
    wants_sweep = [args.lo is not None, args.hi is not None, args.steps is not None]
    if any(wants_sweep):
        if not all(wants_sweep) or not args.out:
            raise ValueError("oracle sweep needs --from, --to, --steps and --out together")
        if not args.lo < args.hi:
            raise ValueError("oracle sweep needs --from below --to")
        if args.steps < 2:
            raise ValueError("oracle sweep needs at least 2 steps")
        diagram = sh.oracle_sweep(cfg.q, cfg.p, variant, np.linspace(args.lo, args.hi, args.steps))
        write_diagram(diagram, args.out)
        print(f"wrote {len(diagram.records)} records to {args.out}")
    return 0


def cmd_check(cfg, args) -> int:
    results, ok = checks.run_all(fast=args.fast)
    for r in results:
        print(checks.format_result(r))
    passed = sum(1 for r in results if r.passed)
    print(f"checks: {passed}/{len(results)} passed")
    return 0 if ok else 1


_COMMANDS = {
    "solve": cmd_solve,
    "lambda-star": cmd_lambda_star,
    "sweep": cmd_sweep,
    "eig": cmd_eig,
    "oracle": cmd_oracle,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leflab",
        description="Minimal branches, energy minimizers and extremal parameters "
        "for concave-convex reaction problems on unit domains.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run-configuration file")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    ps = sub.add_parser("solve", parents=[common], help="one solution at a fixed lambda")
    ps.add_argument("--lambda", dest="lam", type=float, required=True, help="parameter value")
    ps.add_argument("--variant", choices=VARIANTS)
    ps.add_argument("--out", metavar="PATH", help="write the solution field here")

    pl = sub.add_parser("lambda-star", parents=[common], help="extremal-parameter bracket")
    pl.add_argument("--variant", choices=VARIANTS)
    pl.add_argument("--tol", type=float, help="bracket width target")
    pl.add_argument("--diagram", metavar="PATH", help="write the probe diagram here")

    pw = sub.add_parser("sweep", parents=[common], help="branch diagram over a lambda range")
    pw.add_argument("--variant", choices=VARIANTS)
    pw.add_argument("--from", dest="lo", type=float, required=True)
    pw.add_argument("--to", dest="hi", type=float, required=True)
    pw.add_argument("--steps", type=int, required=True, help="number of lambda values")
    pw.add_argument("--out", metavar="PATH", required=True)
    pw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    pe = sub.add_parser("eig", parents=[common], help="principal Dirichlet eigenpair")
    pe.add_argument("--out", metavar="PATH", help="write the eigenfunction here")

    po = sub.add_parser(
        "oracle", parents=[common], help="shooting reference (interval, unit weights)"
    )
    po.add_argument("--variant", choices=VARIANTS)
    po.add_argument("--tol", type=float, help="bracket width target")
    po.add_argument("--from", dest="lo", type=float)
    po.add_argument("--to", dest="hi", type=float)
    po.add_argument("--steps", type=int)
    po.add_argument("--out", metavar="PATH")

    pc = sub.add_parser("check", parents=[common], help="run the invariant suite")
    pc.add_argument("--fast", action="store_true", help="smaller grids, same coverage")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        return _COMMANDS[args.command](cfg, args)
    except (NoConvergence, BracketInvalid, OrderingFailed, ZeroField) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (
        ConfigError,
        FileFormat,
        GridMismatch,
        GridTooCoarse,
        UnsupportedKind,
        NonPositivePotential,
        ValueError,
        OSError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
