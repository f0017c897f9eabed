"""Invariant suite behind the ``check`` subcommand and the acceptance tests.

Every check returns a named result with a signed slack (positive means the
invariant holds with that much margin).  Output is deliberately free of
timings and environment detail so two runs of the same build print
byte-identical reports.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import branch_minus as bm
from . import branch_plus as bp
from . import mesh
from . import shooting as sh
from .numutil import bisect_root, golden_section_max, golden_section_min
from .potentials import unit_pair
from .problem import ProblemSpec


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    slack: float
    detail: str = ""


@dataclass(frozen=True)
class CheckScale:
    """Problem sizes for the suite; FAST trades resolution for wall time
    while exercising every code path."""

    interval_counts: int = 201
    cross_counts: int = 401
    n_lambda: int = 20
    star_tol_plus: float = 2e-2
    cross_tol: float = 4e-2
    minus_probes: int = 200
    minus_sweep: int = 20
    minus_tol: float = 1e-3
    floors: tuple = (1e-4, 5e-5, 2.5e-5)
    grad_fields: int = 20
    oracle_slopes: int = 2048
    oracle_steps: int = 4000


FULL = CheckScale()
FAST = CheckScale(
    interval_counts=101,
    cross_counts=201,
    n_lambda=5,
    star_tol_plus=5e-2,
    cross_tol=8e-2,
    minus_probes=50,
    minus_sweep=8,
    minus_tol=5e-3,
    floors=(1e-4, 5e-5),
    grad_fields=5,
    oracle_slopes=512,
)

Q, P = 0.5, 3.0


class _Context:
    """Lazily computed artifacts shared between suites."""

    def __init__(self, scale: CheckScale):
        self.scale = scale
        self._cache = {}

    def grid(self, counts):
        return self._get(("grid", counts), lambda: mesh.build_grid("interval", counts))

    def spec(self, counts, variant):
        return self._get(
            ("spec", counts, variant),
            lambda: ProblemSpec(Q, P, variant, unit_pair(self.grid(counts))),
        )

    def star_plus(self, counts, tol):
        return self._get(
            ("star_plus", counts, tol),
            lambda: bp.estimate_lambda_star_plus(
                self.grid(counts), self.spec(counts, "plus"), tol_lambda=tol
            ),
        )

    def capital_lambda(self, counts):
        return self._get(
            ("Lambda", counts),
            lambda: bm.capital_lambda(self.grid(counts), self.spec(counts, "minus")),
        )

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]


def _upper(name, measured, bound) -> CheckResult:
    """measured must stay at or below bound."""
    slack = bound - measured
    return CheckResult(name, bool(slack >= 0.0), slack)


def _lower(name, measured, bound) -> CheckResult:
    """measured must stay at or above bound."""
    slack = measured - bound
    return CheckResult(name, bool(slack >= 0.0), slack)


def analytic_checks(ctx: _Context):
    """Poisson and eigenvalue sanity on grids with known answers."""
    out = []
    g = mesh.build_grid("interval", 257)
    x = g.axes[0]
    v = mesh.solve_poisson(g, mesh.constant_field(g, 1.0))
    out.append(_upper("torsion-closed-form", float(np.max(np.abs(v.values - 0.5 * x * (1 - x)))), 1e-10))
    lam1 = mesh.principal_eigenpair(g, tol=1e-10).eigenvalue
    out.append(_upper("eigen-interval", abs(lam1 - math.pi**2) / math.pi**2, 1e-3))
    g2 = mesh.build_grid("rectangle", 65)
    lam2 = mesh.principal_eigenpair(g2, tol=1e-10).eigenvalue
    out.append(_upper("eigen-square", abs(lam2 - 2 * math.pi**2) / (2 * math.pi**2), 1e-2))
    return out


def constants_checks(ctx: _Context):
    """Closed-form super-solution constants against 1D minimization."""
    A = B = 1.0
    C = (A * (1 - Q) / (B * (P - 1))) ** (1.0 / (P - Q))
    lambda0 = (A * C ** (Q - 1) + B * C ** (P - 1)) ** (-(P - Q) / (P - 1))
    t_gold, _ = golden_section_min(lambda t: A * t ** (Q - 1) + B * t ** (P - 1), 1e-6, 1e3)
    out = [_upper("constant-argmin", abs(C - t_gold), 1e-8)]

    def min_value(lam):
        _, val = golden_section_min(lambda t: lam * A * t ** (Q - 1) + B * t ** (P - 1), 1e-6, 1e3)
        return val

    lam0_oracle = bisect_root(lambda lam: min_value(lam) - 1.0, 1e-3, 1e3, 1e-12)
    out.append(_upper("constant-lambda0", abs(lambda0 - lam0_oracle), 1e-8))
    ident = (A * C ** (Q - 1) + B * C ** (P - 1)) * lambda0 ** ((P - 1) / (P - Q))
    out.append(_upper("lambda0-identity", abs(ident - 1.0), 1e-10))
    return out


def plus_branch_checks(ctx: _Context):
    """Monotone-iteration invariants along the minimal branch."""
    s = ctx.scale
    grid = ctx.grid(s.interval_counts)
    spec = ctx.spec(s.interval_counts, "plus")
    star = ctx.star_plus(s.interval_counts, s.star_tol_plus)
    low = star.bracket[0]
    v = bp.torsion_function(grid)
    consts = bp.supersolution_constants(spec, mesh.norm_sup(v))
    lams = np.linspace(low / s.n_lambda, low, s.n_lambda)

    iter_slack = math.inf
    bound_slack = math.inf
    resid_worst = 0.0
    energy_worst = -math.inf
    ene3_worst = 0.0
    psi_worst = math.inf
    ene4_worst = math.inf
    branch_worst = math.inf
    prev_solution = None
    for lam in lams:
        state = {"prev": None}
        upper = consts.M(lam) * v.values if lam <= consts.lambda0 else None

        def watch(n, f, state=state, upper=upper):
            if state["prev"] is not None:
                nonlocal iter_slack
                iter_slack = min(iter_slack, float(np.min(f.values - state["prev"])))
            if upper is not None:
                nonlocal bound_slack
                bound_slack = min(bound_slack, float(np.min(upper - f.values)))
            state["prev"] = f.values

        w = bp.solve_concave(grid, lam, spec.potentials.k, spec.q)
        state["prev"] = w.values
        if upper is not None:
            bound_slack = min(bound_slack, float(np.min(upper - w.values)))
        report = bp.monotone_iterate(grid, spec, lam, w, bp.IterateOptions(on_iterate=watch))
        if not report.converged:
            return [CheckResult("branch-converges", False, -1.0, f"lambda={lam:.6f}")]
        resid_worst = max(resid_worst, report.weak_residual)
        energy_worst = max(energy_worst, report.energy)
        ene3_worst = max(ene3_worst, bp.identity_ene3_residual(grid, spec, lam, report.solution))
        stab = bp.semistability_slack(grid, spec, lam, report.solution, with_eigen=False)
        psi_worst = min(psi_worst, stab.integral_slack)
        ene4_worst = min(ene4_worst, stab.ene4_slack)
        if prev_solution is not None:
            branch_worst = min(branch_worst, float(np.min(report.solution.values - prev_solution)))
        prev_solution = report.solution.values
    return [
        CheckResult("branch-converges", True, 0.0, f"lambdas={s.n_lambda}"),
        _lower("iterate-monotone", iter_slack, -1e-12),
        _lower("iterate-bounded", bound_slack, 0.0),
        _upper("weak-residual", resid_worst, 1e-6),
        _upper("energy-negative", energy_worst, 0.0),
        _upper("ene3-identity", ene3_worst, 1e-6),
        _lower("stability-psi-u", psi_worst, -1e-8),
        _lower("stability-ene4", ene4_worst, -1e-8),
        _lower("branch-monotone", branch_worst, -1e-8),
    ]


def ordering_checks(ctx: _Context):
    """lambda0 <= bracket <= lambda' plus the nonexistence escape."""
    s = ctx.scale
    grid = ctx.grid(s.interval_counts)
    spec = ctx.spec(s.interval_counts, "plus")
    star = ctx.star_plus(s.interval_counts, s.star_tol_plus)
    out = [
        _lower("window-lower", star.bracket[0], star.lambda0),
        _upper("window-upper", star.bracket[1], star.lambda_upper),
    ]
    _, gold = golden_section_max(
        lambda t: star.lambda1 / spec.potentials.m * t ** (1 - Q) - t ** (P - Q), 1e-8, 100.0
    )
    out.append(_upper("lambda-prime-closed-form", abs(star.lambda_upper - gold), 1e-8))
    report = bp.minimal_solution(grid, spec, 1.5 * star.lambda_upper)
    escaped = report.diverged and report.sup_norm > bp.DEFAULT_ITERATE.norm_cap
    out.append(CheckResult("norm-cap-escape", escaped, report.sup_norm - bp.DEFAULT_ITERATE.norm_cap))
    return out


def cross_checks(ctx: _Context):
    """Grid solver against the shooting oracle (constant unit weights)."""
    s = ctx.scale
    grid = ctx.grid(s.cross_counts)
    spec = ctx.spec(s.cross_counts, "plus")
    star = bp.estimate_lambda_star_plus(grid, spec, tol_lambda=s.cross_tol)
    pde_mid = 0.5 * (star.bracket[0] + star.bracket[1])
    slopes = sh.default_slope_grid(s.oracle_slopes, 1e-2, 1e2)
    oracle = sh.oracle_lambda_star(Q, P, "plus", s.cross_tol, slopes, s.oracle_steps)
    oracle_mid = 0.5 * (oracle[0] + oracle[1])
    out = [_upper("cross-lambda-star", abs(pde_mid - oracle_mid) / oracle_mid, 1e-2)]
    lam = 0.5 * pde_mid
    report = bp.minimal_solution(grid, spec, lam)
    roots = sh.solution_count(lam, Q, P, "plus", slopes, s.oracle_steps)
    if not roots:
        out.append(CheckResult("cross-profile", False, -1.0, "no oracle root"))
        return out
    prof = sh.profile_field(roots[0], grid)
    diff = float(np.max(np.abs(prof.values - report.solution.values))) / report.sup_norm
    out.append(_upper("cross-profile", diff, 1e-2))
    return out


def minus_checks(ctx: _Context):
    """Energy-minimization invariants for the competing variant."""
    s = ctx.scale
    grid = ctx.grid(s.interval_counts)
    spec = ctx.spec(s.interval_counts, "minus")
    out = []

    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(s.grad_fields):
        u = mesh.random_dirichlet_field(grid, rng)
        d = mesh.random_dirichlet_field(grid, rng)
        grad = bm.grad_energy_minus(grid, spec, 1.3, u)
        inner = float(np.vdot(grad.values, d.values))
        eps = 1e-6
        fp = bm.energy_minus(grid, spec, 1.3, mesh.make_field(grid, u.values + eps * d.values, True))
        fm = bm.energy_minus(grid, spec, 1.3, mesh.make_field(grid, u.values - eps * d.values, True))
        fd = (fp - fm) / (2 * eps)
        worst = max(worst, abs(fd - inner) / max(1.0, abs(fd)))
    out.append(_upper("grad-consistency", worst, 1e-5))

    params = bm.coercivity_params(grid, spec, 1.0, probes=s.minus_probes)
    floor_slack = math.inf
    for f in mesh.dirichlet_test_fields(grid, s.minus_probes, 2718):
        lower = 0.5 * mesh.norm_h1(grid, f) ** 2 + params.m_min
        floor_slack = min(floor_slack, bm.energy_minus(grid, spec, 1.0, f) - lower)
    out.append(_lower("coercivity-floor", floor_slack, -1e-8))

    cap = ctx.capital_lambda(s.interval_counts)
    report = bm.minimize_free(grid, spec, cap.Lambda + 1.0)
    out.append(_upper("energy-at-Lambda-plus-1", report.energy, -1.0 + 1e-6))

    star = bm.estimate_lambda_star_minus(grid, spec, tol_lambda=s.minus_tol)
    out.append(_upper("minus-bracket-below-Lambda", star.bracket[1], star.Lambda))

    lams = np.linspace(star.bracket[0] / 4 if star.bracket[0] > 0 else 0.01, 4 * star.bracket[1], s.minus_sweep)
    diagram = bm.sweep_branch_minus(grid, spec, lams)
    flags = [r.classified_nontrivial for r in diagram.records]
    inversions = sum(
        1 for i in range(len(flags)) for j in range(i + 1, len(flags)) if flags[i] and not flags[j]
    )
    out.append(CheckResult("upset-classification", inversions == 0, float(-inversions),
                           "".join("N" if f else "t" for f in flags)))

    witness = next((r for r in diagram.records if r.classified_nontrivial), None)
    if witness is None:
        out.append(CheckResult("obstacle-feasible", False, -1.0, "no nontrivial witness"))
    else:
        base = bm.minimize_free(grid, spec, witness.lam)
        ob = bm.obstacle_minimize(grid, spec, witness.lam * 1.5, base.solution)
        feas = float(np.min(ob.solution.values - base.solution.values))
        out.append(_lower("obstacle-feasible", feas, 0.0))
        out.append(_upper("obstacle-improves", ob.energy,
                          bm.energy_minus(grid, spec, witness.lam * 1.5, base.solution)))
    return out


def floor_trend_checks(ctx: _Context):
    """Halving the amplitude floor must not raise the measured threshold."""
    s = ctx.scale
    grid = ctx.grid(s.interval_counts)
    spec = ctx.spec(s.interval_counts, "minus")
    mids = []
    for floor in s.floors:
        star = bm.estimate_lambda_star_minus(
            grid, spec, tol_lambda=s.minus_tol, nontrivial_floor=floor
        )
        mids.append(0.5 * (star.bracket[0] + star.bracket[1]))
    drops = [a - b for a, b in zip(mids, mids[1:])]
    trend = " ".join(f"floor={f:g}:mid={m:.6f}" for f, m in zip(s.floors, mids))
    return [CheckResult("floor-trend", min(drops) >= 0.0, min(drops), trend)]


SUITES = (
    ("analytic", analytic_checks),
    ("constants", constants_checks),
    ("plus-branch", plus_branch_checks),
    ("ordering", ordering_checks),
    ("cross-validation", cross_checks),
    ("minus-branch", minus_checks),
    ("floor-sensitivity", floor_trend_checks),
)


def run_all(fast: bool = False):
    """All suites in fixed order; returns (results, all_passed)."""
    ctx = _Context(FAST if fast else FULL)
    results = []
    for _, suite in SUITES:
        results.extend(suite(ctx))
    return results, all(r.passed for r in results)


def format_result(r: CheckResult) -> str:
    line = f"{'PASS' if r.passed else 'FAIL'} {r.name} slack={r.slack:+.3e}"
    if r.detail:
        line += f" [{r.detail}]"
    return line
