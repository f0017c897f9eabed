"""Energy minimization for the competing ("minus") variant.

Here the superlinear term fights the sublinear one, the energy

    F(u) = 1/2 ||grad u||^2 - lambda/(q+1) int k|u|^(q+1)
                            + 1/(p+1)  int h|u|^(p+1)

is coercive for every lambda, and solutions are found as global minimizers
rather than by monotone iteration.  The descent direction is the Sobolev
gradient (the nodewise residual passed through the inverse Laplacian):
plain nodewise descent would crawl at the stencil's condition number, while
the preconditioned direction converges in tens of steps.  Iterates are
replaced by their absolute value after every step — the energy only
depends on |u|, and folding never increases the gradient seminorm — so
minimizers come out nonnegative for free.

The threshold lambda* is floor-dependent by nature: minimizer amplitudes
scale like a power of lambda, so "nontrivial" needs a sup-norm floor, and
the measured threshold moves with that floor.  The bisection reports the
floors alongside the bracket.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BracketInvalid, ZeroField
from .branch_plus import semistability_slack, weak_residual
from .mesh import (
    Field,
    Grid,
    POISSON_ITER_FACTOR,
    _neg_laplacian_values,
    _require_same_grid,
    _solve_correction,
    dirichlet_test_fields,
    integrate,
    make_field,
    norm_h1,
    norm_lp,
    norm_sup,
    principal_eigenpair_cached,
)
from .problem import (
    BifurcationDiagram,
    ProblemSpec,
    SolveReport,
    assemble_diagram,
    record_from_report,
)


@dataclass(frozen=True)
class MinimizeOptions:
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    grad_tol: float = 1e-8
    max_iter: int = 500
    restarts: int = 4
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0,1)")
        if not 0.0 < self.armijo < 1.0:
            raise ValueError("sufficient-decrease constant must lie in (0,1)")
        if self.restarts < 1:
            raise ValueError("restart count must be >= 1")


DEFAULT_MINIMIZE = MinimizeOptions()


def energy_minus(grid: Grid, spec: ProblemSpec, lam: float, u: Field) -> float:
    _require_same_grid(grid, u)
    q, p = spec.q, spec.p
    au = np.abs(u.values)
    kq = integrate(grid, make_field(grid, spec.potentials.k.values * au ** (q + 1.0), False))
    hp = integrate(grid, make_field(grid, spec.potentials.h.values * au ** (p + 1.0), False))
    return 0.5 * norm_h1(grid, u) ** 2 - lam / (q + 1.0) * kq + 1.0 / (p + 1.0) * hp


def _residual_minus(grid: Grid, spec: ProblemSpec, lam: float, values: np.ndarray) -> np.ndarray:
    """Nodewise Euler-Lagrange residual (no cell measure), zero on the boundary.

    |u|^(q-1) u is written sign(u)|u|^q so the q < 1 singularity at zero
    never materializes."""
    r = _neg_laplacian_values(grid, values)
    sgn = np.sign(values)
    au = np.abs(values)
    r -= lam * spec.potentials.k.values * sgn * au**spec.q
    r += spec.potentials.h.values * sgn * au**spec.p
    r[~grid.interior] = 0.0
    return r


def grad_energy_minus(grid: Grid, spec: ProblemSpec, lam: float, u: Field) -> Field:
    """Discrete gradient of energy_minus: the nodewise residual scaled by the
    trapezoid cell measure (so it is the true derivative w.r.t. node values)."""
    _require_same_grid(grid, u)
    g = grid.quad_weights * _residual_minus(grid, spec, lam, u.values)
    g[~grid.interior] = 0.0
    return make_field(grid, g, dirichlet=True)


def coercive_floor(A: float, B: float, q: float, p: float):
    """Minimum of t -> A t^(p+1) - B t^(q+1) over t > 0: returns (t_min, m_min)."""
    t_min = (B * (q + 1.0) / (A * (p + 1.0))) ** (1.0 / (p - q))
    m_min = A * t_min ** (p + 1.0) - B * t_min ** (q + 1.0)
    return t_min, m_min


@dataclass(frozen=True)
class CoercivityParams:
    """Constants of the discrete coercivity bound F(u) >= 1/2||u||^2 + m_min.

    e_q and e_p are embedding ratios measured on a seeded probe family (the
    largest ||u||_(q+1)/||u||_H1 and smallest ||u||_(p+1)/||u||_H1), so
    m_min is a floor certified on that family rather than a proven constant.
    """

    C1: float
    C2: float
    A: float
    B: float
    e_q: float
    e_p: float
    t_min: float
    m_min: float


def coercivity_params(
    grid: Grid, spec: ProblemSpec, lam: float, probes: int = 200, seed: int = 2718
) -> CoercivityParams:
    if lam <= 0.0:
        raise ValueError("coercivity_params needs lambda > 0")
    q, p = spec.q, spec.p
    C1 = lam * spec.potentials.sup_k / (q + 1.0)
    C2 = float(spec.potentials.h.values.min()) / (p + 1.0)
    e_q = 0.0
    e_p = np.inf
    for f in dirichlet_test_fields(grid, probes, seed):
        g = norm_h1(grid, f)
        e_q = max(e_q, norm_lp(grid, f, q + 1.0) / g)
        e_p = min(e_p, norm_lp(grid, f, p + 1.0) / g)
    A = C2 * e_p ** (p + 1.0)
    B = C1 * e_q ** (q + 1.0)
    t_min, m_min = coercive_floor(A, B, q, p)
    return CoercivityParams(C1=C1, C2=C2, A=A, B=B, e_q=e_q, e_p=e_p, t_min=t_min, m_min=m_min)


def _descend(grid, spec, lam, start, project, opts: MinimizeOptions):
    """Backtracking descent along the Sobolev gradient, projecting after
    every trial step.  Returns (values, energy, iterations, converged)."""
    cg_cap = POISSON_ITER_FACTOR * grid.n_interior
    u = project(start)
    fu = energy_minus(grid, spec, lam, make_field(grid, u, True))
    iterations = 0
    converged = False
    for n in range(1, opts.max_iter + 1):
        r = _residual_minus(grid, spec, lam, u)
        if float(np.max(np.abs(grid.quad_weights * r))) <= opts.grad_tol:
            converged = True
            break
        d = _solve_correction(grid, r, 1e-10, cg_cap)
        slope = integrate(grid, make_field(grid, r * d, False))
        if slope <= 0.0:
            converged = True  # no descent direction left at this resolution
            break
        t = opts.step0
        accepted = False
        while t >= 1e-14 * opts.step0:
            trial = project(u - t * d)
            ft = energy_minus(grid, spec, lam, make_field(grid, trial, True))
            if ft <= fu - opts.armijo * t * slope:
                u, fu = trial, ft
                accepted = True
                break
            t *= opts.shrink
        iterations = n
        if not accepted:
            # Line search exhausted: projected-stationary up to roundoff.
            converged = True
            break
    return u, fu, iterations, converged


def _free_starts(grid: Grid, opts: MinimizeOptions):
    phi1 = principal_eigenpair_cached(grid).eigenfunction
    starts = [np.zeros(grid.npoints), 1e-2 * phi1.values]
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        starts.append(np.abs(np.where(grid.interior, rng.uniform(-1.0, 1.0, grid.npoints), 0.0)))
    return starts


def _minimize_report(grid, spec, lam, values, energy, iterations, converged) -> SolveReport:
    solution = make_field(grid, values, dirichlet=True)
    sup = norm_sup(solution)
    if sup > 0.0:
        residual = weak_residual(grid, spec, lam, solution)
        slack = semistability_slack(grid, spec, lam, solution, with_eigen=False).integral_slack
    else:
        residual = 0.0
        slack = 0.0
    return SolveReport(
        solution=solution,
        lam=lam,
        converged=converged,
        iterations=iterations,
        weak_residual=residual,
        energy=energy,
        stability_slack=slack,
        sup_norm=sup,
        h1_norm=norm_h1(grid, solution),
        dead_core=bool(sup > 0.0 and np.any(solution.values[grid.interior] <= 0.0)),
    )


def minimize_free(
    grid: Grid, spec: ProblemSpec, lam: float, opts: MinimizeOptions = DEFAULT_MINIMIZE
) -> SolveReport:
    """Global minimization of energy_minus by multistart projected descent.

    Starts from zero, a small multiple of the principal eigenfunction, and
    ``opts.restarts`` seeded random fields; keeps the lowest energy found
    (first hit wins ties).  No certificate of global optimality is claimed.
    """
    if spec.variant != "minus":
        raise ValueError("minimize_free drives the minus variant only")
    if lam < 0.0:
        raise ValueError("minimize_free needs lambda >= 0")
    _require_same_grid(grid, spec.potentials.k)
    best = None
    for start in _free_starts(grid, opts):
        u, fu, its, conv = _descend(grid, spec, lam, start, np.abs, opts)
        if best is None or fu < best[1]:
            best = (u, fu, its, conv)
    return _minimize_report(grid, spec, lam, *best)


def constraint_scale(grid: Grid, k: Field, q: float, v: Field) -> float:
    """The s > 0 placing s*v on the constraint (1/(q+1)) int k|v|^(q+1) = 1."""
    _require_same_grid(grid, k)
    _require_same_grid(k, v)
    mass = integrate(grid, make_field(grid, k.values * np.abs(v.values) ** (q + 1.0), False))
    if mass <= 0.0:
        raise ZeroField("constraint rescaling needs a field with positive k-mass")
    return ((q + 1.0) / mass) ** (1.0 / (q + 1.0))


@dataclass(frozen=True)
class CapitalLambda:
    Lambda: float
    minimizer: Field


def capital_lambda(
    grid: Grid, spec: ProblemSpec, opts: MinimizeOptions = DEFAULT_MINIMIZE
) -> CapitalLambda:
    """Constrained minimum of 1/2||grad v||^2 + 1/(p+1) int h|v|^(p+1) over
    the set (1/(q+1)) int k|v|^(q+1) = 1.

    The constraint is homogeneous, so feasibility is restored after every
    trial step by exact radial rescaling instead of a multiplier iteration.
    At the minimizer v*, the free energy satisfies F_lambda(v*) = Lambda -
    lambda, which is the existence witness for lambda > Lambda.
    """
    q, p = spec.q, spec.p
    kf = spec.potentials.k
    hv = spec.potentials.h.values
    cg_cap = POISSON_ITER_FACTOR * grid.n_interior

    def G(values) -> float:
        f = make_field(grid, values, True)
        hp = integrate(grid, make_field(grid, hv * np.abs(values) ** (p + 1.0), False))
        return 0.5 * norm_h1(grid, f) ** 2 + hp / (p + 1.0)

    def feasible(values):
        out = np.abs(values)
        return constraint_scale(grid, kf, q, make_field(grid, out, True)) * out

    phi1 = principal_eigenpair_cached(grid).eigenfunction
    starts = [phi1.values]
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        starts.append(np.where(grid.interior, rng.uniform(-1.0, 1.0, grid.npoints), 0.0))

    best = None
    for start in starts:
        v = feasible(start)
        gv = G(v)
        flat = 0
        for _ in range(opts.max_iter):
            r = _neg_laplacian_values(grid, v) + hv * np.sign(v) * np.abs(v) ** p
            r[~grid.interior] = 0.0
            d = _solve_correction(grid, r, 1e-10, cg_cap)
            t = opts.step0
            accepted = False
            while t >= 1e-14 * opts.step0:
                trial = feasible(v - t * d)
                gt = G(trial)
                if gt < gv:
                    if gv - gt <= 1e-14 * max(1.0, abs(gv)):
                        flat += 1
                    else:
                        flat = 0
                    v, gv = trial, gt
                    accepted = True
                    break
                t *= opts.shrink
            if not accepted or flat >= 3:
                break
        if best is None or gv < best[1]:
            best = (v, gv)
    minimizer = make_field(grid, best[0], dirichlet=True)
    return CapitalLambda(Lambda=best[1], minimizer=minimizer)


def obstacle_minimize(
    grid: Grid,
    spec: ProblemSpec,
    lam: float,
    obstacle: Field,
    opts: MinimizeOptions = DEFAULT_MINIMIZE,
) -> SolveReport:
    """Minimize energy_minus over fields dominating the obstacle nodewise.

    The projection is the nodewise maximum with the obstacle; descent starts
    at the obstacle itself (so the output energy never exceeds the
    obstacle's) plus projected versions of the free starts.
    """
    if spec.variant != "minus":
        raise ValueError("obstacle_minimize drives the minus variant only")
    _require_same_grid(grid, obstacle)
    if np.any(obstacle.values < 0.0) or not obstacle.dirichlet:
        raise ValueError("obstacle must be nonnegative with zero boundary values")
    ob = obstacle.values

    def project(values):
        out = np.maximum(values, ob)
        out[~grid.interior] = 0.0
        return out

    starts = [ob.copy()]
    starts.extend(_free_starts(grid, opts)[1:])
    best = None
    for start in starts:
        u, fu, its, conv = _descend(grid, spec, lam, start, project, opts)
        if best is None or fu < best[1]:
            best = (u, fu, its, conv)
    return _minimize_report(grid, spec, lam, *best)


def classify_nontrivial(
    report: SolveReport, nontrivial_floor: float = 1e-4, energy_floor: float = 1e-10
) -> bool:
    """A minimizer counts as a solution when it clears the amplitude floor
    and sits at strictly negative energy."""
    return bool(report.sup_norm > nontrivial_floor and report.energy < -energy_floor)


@dataclass(frozen=True)
class LambdaStarMinus:
    bracket: tuple
    Lambda: float
    nontrivial_floor: float
    energy_floor: float
    diagram: BifurcationDiagram


def estimate_lambda_star_minus(
    grid: Grid,
    spec: ProblemSpec,
    tol_lambda: float = 1e-3,
    opts: MinimizeOptions = DEFAULT_MINIMIZE,
    nontrivial_floor: float = 1e-4,
    energy_floor: float = 1e-10,
) -> LambdaStarMinus:
    """Bisect the smallest lambda whose free minimizer is classified
    nontrivial.

    The set of such lambdas is upward closed (a minimizer at mu seeds an
    obstacle construction at every lambda > mu), so bisection downward from
    Lambda is sound; [0, Lambda] is the starting bracket and Lambda + 1 is
    checked as a guaranteed-nontrivial control.
    """
    if tol_lambda <= 0.0:
        raise ValueError("tol_lambda must be positive")
    cap = capital_lambda(grid, spec, opts)
    records = []

    def probe(lam: float) -> bool:
        report = minimize_free(grid, spec, lam, opts)
        flag = classify_nontrivial(report, nontrivial_floor, energy_floor)
        records.append(record_from_report(report, classified_nontrivial=flag))
        return flag

    if not probe(cap.Lambda + 1.0):
        raise BracketInvalid(
            f"free minimizer at Lambda + 1 = {cap.Lambda + 1.0:g} classified trivial; "
            "floors or minimizer options are inconsistent"
        )
    lo = 0.0
    hi = cap.Lambda + 1.0
    if probe(cap.Lambda):
        hi = cap.Lambda
    probe(lo)
    while hi - lo > tol_lambda:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return LambdaStarMinus(
        bracket=(lo, hi),
        Lambda=cap.Lambda,
        nontrivial_floor=nontrivial_floor,
        energy_floor=energy_floor,
        diagram=assemble_diagram(records, bracket=(lo, hi)),
    )


def sweep_branch_minus(
    grid: Grid,
    spec: ProblemSpec,
    lambdas,
    opts: MinimizeOptions = DEFAULT_MINIMIZE,
    nontrivial_floor: float = 1e-4,
    energy_floor: float = 1e-10,
) -> BifurcationDiagram:
    """Free minimization per lambda with upward-closure repair: when a
    lambda classifies trivial even though a smaller one did not, the smaller
    lambda's minimizer is recycled as an obstacle before recording."""
    lams = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lams, lams[1:])) or any(x < 0 for x in lams):
        raise ValueError("sweep needs strictly increasing nonnegative lambdas")
    records = []
    witness = None
    for lam in lams:
        report = minimize_free(grid, spec, lam, opts)
        flag = classify_nontrivial(report, nontrivial_floor, energy_floor)
        if not flag and witness is not None:
            repaired = obstacle_minimize(grid, spec, lam, witness, opts)
            if classify_nontrivial(repaired, nontrivial_floor, energy_floor):
                report, flag = repaired, True
        if flag and witness is None:
            witness = report.solution
        records.append(record_from_report(report, classified_nontrivial=flag))
    return assemble_diagram(records)
