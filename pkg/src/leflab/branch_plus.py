"""Minimal-solution branch for the cooperative ("plus") variant.

The pipeline mirrors the classical sub/super-solution construction:

  1. solve the purely sublinear problem  -lap w = lambda k w^q  (unique
     positive solution, reached monotonically from an explicit
     super-solution seed),
  2. iterate  -lap u_(n+1) = lambda k u_n^q + h u_n^p  from u_0 = w; the
     sequence increases nodewise and, below the existence threshold,
     converges to the minimal solution,
  3. certify the threshold bracket [lambda0, lambda'] from the torsion
     function and the principal eigenvalue, then bisect on the
     converged/escaped outcome of step 2.

Each outer step solves for the *correction* delta = u_(n+1) - u_n with a
conjugate-gradient tolerance relative to the step's own residual, so the
fixed point is the exact discrete solution and the nodewise monotonicity of
the sequence survives floating point at the 1e-12 level.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BracketInvalid, NoConvergence, OrderingFailed
from .mesh import (
    Field,
    Grid,
    _require_same_grid,
    _neg_laplacian_values,
    _solve_correction,
    grad_inner,
    integrate,
    make_field,
    norm_h1,
    norm_sup,
    principal_eigenpair_cached,
    dirichlet_test_fields,
    solve_poisson,
    constant_field,
    POISSON_ITER_FACTOR,
)
from .problem import (
    BifurcationDiagram,
    ProblemSpec,
    SolveReport,
    assemble_diagram,
    record_from_report,
)

_torsion_cache: dict[tuple, Field] = {}


def torsion_function(grid: Grid, tol: float = 1e-10) -> Field:
    """Solution of -lap v = 1 with zero boundary values (cached per grid)."""
    key = (grid.kind, grid.counts, tol)
    if key not in _torsion_cache:
        v = solve_poisson(grid, constant_field(grid, 1.0), tol)
        if np.any(v.values[grid.interior] <= 0.0):
            raise NoConvergence("torsion function lost interior positivity")
        _torsion_cache[key] = v
    return _torsion_cache[key]


def source_values(spec: ProblemSpec, lam: float, values: np.ndarray) -> np.ndarray:
    """lambda k u+^q +/- h u+^p, clamped below zero before powering."""
    up = np.maximum(values, 0.0)
    return (
        lam * spec.potentials.k.values * up**spec.q
        + spec.sign * spec.potentials.h.values * up**spec.p
    )


def solve_concave(
    grid: Grid,
    lam: float,
    k: Field,
    q: float,
    tol: float | None = None,
    u0: Field | None = None,
    max_iter: int = 500,
) -> Field:
    """Fixed point of u -> (-lap)^(-1)(lambda k u+^q).

    The default seed c*v with c = (lambda sup k sup v^q)^(1/(1-q)) dominates
    the problem, so the Picard sequence decreases monotonically onto the
    unique positive solution.  When ``tol`` is omitted it scales with the
    seed amplitude (floored at 1e-13): small-lambda solutions are tiny and a
    fixed absolute tolerance would leave them relatively sloppy.
    """
    if lam <= 0.0:
        raise ValueError("solve_concave needs lambda > 0")
    if not 0.0 < q < 1.0:
        raise ValueError("solve_concave needs 0 < q < 1")
    _require_same_grid(grid, k)
    v = torsion_function(grid)
    sup_v = norm_sup(v)
    seed_amp = (lam * float(k.values.max()) * sup_v**q) ** (1.0 / (1.0 - q))
    if tol is None:
        tol = max(1e-13, 1e-10 * seed_amp * sup_v)
    if u0 is None:
        u = seed_amp * v.values
    else:
        _require_same_grid(grid, u0)
        if np.any(u0.values < 0.0) or not u0.dirichlet:
            raise ValueError("concave seed must be nonnegative with zero boundary")
        u = u0.values.copy()
    cg_cap = POISSON_ITER_FACTOR * grid.n_interior
    kv = k.values
    for _ in range(max_iter):
        residual = lam * kv * np.maximum(u, 0.0) ** q - _neg_laplacian_values(grid, u)
        delta = _solve_correction(grid, residual, 1e-8, cg_cap)
        u = u + delta
        if float(np.max(np.abs(delta))) <= tol:
            w = make_field(grid, u, dirichlet=True)
            if np.any(w.values[grid.interior] <= 0.0):
                raise NoConvergence("sublinear solve lost interior positivity")
            return w
    raise NoConvergence(
        f"sublinear fixed point not reached in {max_iter} iterations", iterations=max_iter
    )


@dataclass(frozen=True)
class SuperSolutionConstants:
    """Constants of the explicit super-solution M(lambda) * v.

    A and B absorb the weight and torsion sup-norms; C minimizes
    t -> lambda A t^(q-1) + B t^(p-1) up to the lambda power, and lambda0 is
    the largest lambda at which the minimum still clears 1, i.e. at which
    M(lambda) v is certified to dominate the nonlinearity.
    """

    A: float
    B: float
    C: float
    lambda0: float
    sup_v: float
    q: float
    p: float

    def M(self, lam: float) -> float:
        return self.C * lam ** (1.0 / (self.p - self.q))


def supersolution_constants(spec: ProblemSpec, sup_v: float) -> SuperSolutionConstants:
    if sup_v <= 0.0:
        raise ValueError("sup_v must be positive")
    q, p = spec.q, spec.p
    A = spec.potentials.sup_k * sup_v**q
    B = spec.potentials.sup_h * sup_v**p
    C = (A * (1.0 - q) / (B * (p - 1.0))) ** (1.0 / (p - q))
    lambda0 = (A * C ** (q - 1.0) + B * C ** (p - 1.0)) ** (-(p - q) / (p - 1.0))
    return SuperSolutionConstants(A=A, B=B, C=C, lambda0=lambda0, sup_v=sup_v, q=q, p=p)


@dataclass(frozen=True)
class SubSuperPair:
    epsilon: float
    sub: Field
    sup: Field


def subsuper_pair(grid: Grid, spec: ProblemSpec, lam: float, tol: float = 1e-10) -> SubSuperPair:
    """Ordered sub/super-solution pair (eps*w, M(lambda)*v) for 0 < lam <= lambda0.

    eps runs down the dyadic ladder 2^-1, 2^-2, ... until eps*w fits under
    the super-solution; OrderingFailed past 2^-40 signals a broken setup.
    """
    v = torsion_function(grid)
    consts = supersolution_constants(spec, norm_sup(v))
    if not 0.0 < lam <= consts.lambda0:
        raise ValueError(f"subsuper_pair needs 0 < lambda <= lambda0 = {consts.lambda0:g}")
    w = solve_concave(grid, lam, spec.potentials.k, spec.q, tol)
    upper = consts.M(lam) * v.values
    for j in range(1, 41):
        eps = 2.0**-j
        if np.all(eps * w.values <= upper):
            return SubSuperPair(
                epsilon=eps,
                sub=make_field(grid, eps * w.values, dirichlet=True),
                sup=make_field(grid, upper, dirichlet=True),
            )
    raise OrderingFailed(
        "no dyadic epsilon down to 2^-40 puts the sub-solution under M(lambda)*v"
    )


@dataclass(frozen=True)
class IterateOptions:
    """Knobs for the monotone fixed-point loop.

    on_iterate, when set, receives (n, Field) after every accepted update;
    tests use it to watch monotonicity and super-solution bounds without
    re-running solves.
    """

    tol: float = 1e-10
    max_iter: int = 2000
    norm_cap: float = 1e6
    cg_rel_tol: float = 1e-8
    on_iterate: object = None


DEFAULT_ITERATE = IterateOptions()


def monotone_iterate(
    grid: Grid, spec: ProblemSpec, lam: float, u0: Field, opts: IterateOptions = DEFAULT_ITERATE
) -> SolveReport:
    """Picard iteration u -> (-lap)^(-1)(lambda k u^q + h u^p) from u0.

    Runs until the sup-norm update drops to opts.tol (converged), the
    iterate escapes opts.norm_cap (diverged — the nonexistence proxy), or
    max_iter is exhausted.  Divergence is an outcome, not an error.
    """
    _require_same_grid(grid, u0)
    if np.any(u0.values < 0.0):
        raise ValueError("monotone_iterate needs a nonnegative start")
    u = u0.values.copy()
    cg_cap = POISSON_ITER_FACTOR * grid.n_interior
    converged = False
    diverged = False
    iterations = opts.max_iter
    for n in range(1, opts.max_iter + 1):
        residual = source_values(spec, lam, u) - _neg_laplacian_values(grid, u)
        delta = _solve_correction(grid, residual, opts.cg_rel_tol, cg_cap)
        u = u + delta
        if opts.on_iterate is not None:
            opts.on_iterate(n, make_field(grid, u, dirichlet=True))
        if float(np.max(u)) > opts.norm_cap:
            iterations = n
            diverged = True
            break
        if float(np.max(np.abs(delta))) <= opts.tol:
            iterations = n
            converged = True
            break
    solution = make_field(grid, u, dirichlet=True)
    return _fill_report(grid, spec, lam, solution, converged, diverged, iterations)


def _fill_report(grid, spec, lam, solution, converged, diverged, iterations) -> SolveReport:
    if converged:
        residual = weak_residual(grid, spec, lam, solution)
        energy = energy_plus(grid, spec, lam, solution)
        slack = semistability_slack(grid, spec, lam, solution, with_eigen=False)
        stability = slack.integral_slack
        dead = bool(
            norm_sup(solution) > 0.0 and np.any(solution.values[grid.interior] <= 0.0)
        )
    else:
        residual = energy = stability = float("nan")
        dead = False
    return SolveReport(
        solution=solution,
        lam=lam,
        converged=converged,
        iterations=iterations,
        weak_residual=residual,
        energy=energy,
        stability_slack=stability,
        sup_norm=norm_sup(solution),
        h1_norm=norm_h1(grid, solution),
        diverged=diverged,
        dead_core=dead,
    )


def minimal_solution(
    grid: Grid, spec: ProblemSpec, lam: float, opts: IterateOptions = DEFAULT_ITERATE
) -> SolveReport:
    """Sublinear solve for the seed, then the monotone loop: the limit is
    the smallest nonnegative solution at this lambda (when one exists)."""
    if spec.variant != "plus":
        raise ValueError("minimal_solution drives the plus variant only")
    w = solve_concave(grid, lam, spec.potentials.k, spec.q)
    return monotone_iterate(grid, spec, lam, w, opts)


def weak_residual(
    grid: Grid, spec: ProblemSpec, lam: float, u: Field, count: int = 20, seed: int = 314
) -> float:
    """Worst violation of the weak form over a fixed test-field family.

    Tests against the principal eigenfunction, the torsion function, u
    itself, and ``count`` seeded random fields; the maximum mismatch is
    normalized by 1 + the H1 seminorm of u.
    """
    _require_same_grid(grid, u)
    phi1 = principal_eigenpair_cached(grid).eigenfunction
    tests = [phi1, torsion_function(grid), u]
    tests.extend(dirichlet_test_fields(grid, count, seed))
    src = source_values(spec, lam, u.values)
    worst = 0.0
    for phi in tests:
        lhs = grad_inner(grid, u, phi)
        rhs = integrate(grid, make_field(grid, src * phi.values, dirichlet=False))
        worst = max(worst, abs(lhs - rhs))
    return worst / (1.0 + norm_h1(grid, u))


def energy_plus(grid: Grid, spec: ProblemSpec, lam: float, u: Field) -> float:
    """(1/2)||grad u||^2 - lambda/(q+1) int k|u|^(q+1) - 1/(p+1) int h|u|^(p+1)."""
    _require_same_grid(grid, u)
    q, p = spec.q, spec.p
    au = np.abs(u.values)
    kq = integrate(grid, make_field(grid, spec.potentials.k.values * au ** (q + 1.0), False))
    hp = integrate(grid, make_field(grid, spec.potentials.h.values * au ** (p + 1.0), False))
    return 0.5 * norm_h1(grid, u) ** 2 - lam / (q + 1.0) * kq - 1.0 / (p + 1.0) * hp


def identity_ene3_residual(grid: Grid, spec: ProblemSpec, lam: float, u: Field) -> float:
    """Normalized defect of ||grad u||^2 = lambda int k u^(q+1) + int h u^(p+1),
    the weak form tested against u itself; vanishes at exact solutions."""
    _require_same_grid(grid, u)
    au = np.abs(u.values)
    kq = integrate(grid, make_field(grid, spec.potentials.k.values * au ** (spec.q + 1.0), False))
    hp = integrate(grid, make_field(grid, spec.potentials.h.values * au ** (spec.p + 1.0), False))
    g2 = norm_h1(grid, u) ** 2
    return abs(g2 - lam * kq - spec.sign * hp) / (1.0 + g2)


@dataclass(frozen=True)
class StabilityReport:
    """Semi-stability diagnostics at a candidate solution.

    integral_slack   quadratic form of the linearization tested with the
                     solution itself (singularity-free since u^(q-1) meets
                     u^2), nonnegative at semi-stable solutions
    ene4_slack       lambda(1-q) int k u^(q+1) - (p-1) int h u^(p+1), the
                     combination of the stability and energy identities
    eigen_margin     smallest eigenvalue of the linearized operator, with
                     the u^(q-1) singularity floored at delta (nan when the
                     eigensolve is skipped)
    """

    integral_slack: float
    ene4_slack: float
    eigen_margin: float


def semistability_slack(
    grid: Grid,
    spec: ProblemSpec,
    lam: float,
    u: Field,
    delta: float = 1e-8,
    with_eigen: bool = True,
) -> StabilityReport:
    _require_same_grid(grid, u)
    if np.any(u.values < 0.0):
        raise ValueError("semistability_slack needs a nonnegative field")
    q, p = spec.q, spec.p
    kv = spec.potentials.k.values
    hv = spec.potentials.h.values
    uv = u.values
    kq = integrate(grid, make_field(grid, kv * uv ** (q + 1.0), False))
    hp = integrate(grid, make_field(grid, hv * uv ** (p + 1.0), False))
    g2 = norm_h1(grid, u) ** 2
    sign = spec.sign
    integral_slack = g2 - (lam * q * kq + sign * p * hp)
    ene4_slack = lam * (1.0 - q) * kq - sign * (p - 1.0) * hp
    if with_eigen:
        from .mesh import smallest_eigenvalue_shifted

        c = lam * q * kv * np.maximum(uv, delta) ** (q - 1.0) + sign * p * hv * uv ** (p - 1.0)
        pair = smallest_eigenvalue_shifted(grid, make_field(grid, c, False), tol=1e-8)
        eigen_margin = pair.eigenvalue
    else:
        eigen_margin = float("nan")
    return StabilityReport(
        integral_slack=integral_slack, ene4_slack=ene4_slack, eigen_margin=eigen_margin
    )


def lambda_prime(lambda1: float, m: float, q: float, p: float) -> float:
    """Upper existence bound: smallest lambda' with
    m(lambda' + t^(p-q)) > lambda1 t^(1-q) for every t >= 0.

    Closed form from the interior maximizer of (lambda1/m) t^(1-q) - t^(p-q),
    nudged up by 1e-12 so the strict inequality survives roundoff.
    """
    if min(lambda1, m) <= 0.0 or not 0.0 < q < 1.0 < p:
        raise ValueError("lambda_prime needs positive inputs and 0 < q < 1 < p")
    ratio = lambda1 / m
    t_star = (ratio * (1.0 - q) / (p - q)) ** (1.0 / (p - 1.0))
    value = ratio * t_star ** (1.0 - q) - t_star ** (p - q)
    return value * (1.0 + 1e-12)


@dataclass(frozen=True)
class LambdaStarPlus:
    bracket: tuple
    lambda0: float
    lambda1: float
    lambda_upper: float  # the lambda' nonexistence bound
    diagram: BifurcationDiagram


def estimate_lambda_star_plus(
    grid: Grid,
    spec: ProblemSpec,
    tol_lambda: float = 1e-2,
    opts: IterateOptions = DEFAULT_ITERATE,
) -> LambdaStarPlus:
    """Bisect the existence threshold inside the certified window.

    lambda0 (from the super-solution constants) must converge and lambda'
    (from the principal eigenvalue) must escape, else BracketInvalid; the
    probes in between classify by the converged flag of the monotone loop.
    Every probe lands in the returned diagram.
    """
    if tol_lambda <= 0.0:
        raise ValueError("tol_lambda must be positive")
    if spec.variant != "plus":
        raise ValueError("estimate_lambda_star_plus drives the plus variant only")
    v = torsion_function(grid)
    consts = supersolution_constants(spec, norm_sup(v))
    lam1 = principal_eigenpair_cached(grid).eigenvalue
    upper = lambda_prime(lam1, spec.potentials.m, spec.q, spec.p)
    if upper <= consts.lambda0:
        raise BracketInvalid(
            f"existence window is empty: lambda0 = {consts.lambda0:g} >= lambda' = {upper:g}"
        )
    records = []

    def probe(lam: float) -> bool:
        report = minimal_solution(grid, spec, lam, opts)
        records.append(record_from_report(report))
        return report.converged

    lo, hi = consts.lambda0, upper
    if not probe(lo):
        raise BracketInvalid(f"iteration failed at lambda0 = {lo:g}; bracket low end unusable")
    if probe(hi):
        raise BracketInvalid(f"iteration converged at lambda' = {hi:g}; bracket high end unusable")
    while hi - lo > tol_lambda:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return LambdaStarPlus(
        bracket=(lo, hi),
        lambda0=consts.lambda0,
        lambda1=lam1,
        lambda_upper=upper,
        diagram=assemble_diagram(records, bracket=(lo, hi)),
    )


def sweep_branch_plus(
    grid: Grid,
    spec: ProblemSpec,
    lambdas,
    opts: IterateOptions = DEFAULT_ITERATE,
) -> BifurcationDiagram:
    """Minimal solution per lambda; solver failures become non-converged rows."""
    lams = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lams, lams[1:])) or any(x <= 0 for x in lams):
        raise ValueError("sweep needs strictly increasing positive lambdas")
    records = []
    for lam in lams:
        try:
            report = minimal_solution(grid, spec, lam, opts)
            records.append(record_from_report(report))
        except NoConvergence:
            nan = float("nan")
            records.append(
                record_from_report(
                    SolveReport(
                        solution=make_field(grid, np.zeros(grid.npoints), True),
                        lam=lam,
                        converged=False,
                        iterations=opts.max_iter,
                        weak_residual=nan,
                        energy=nan,
                        stability_slack=nan,
                        sup_norm=nan,
                        h1_norm=nan,
                    )
                )
            )
    return assemble_diagram(records)
