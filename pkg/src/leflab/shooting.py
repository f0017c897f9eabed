"""Shooting oracle for the constant-coefficient problem on the interval.

Completely independent of the grid solvers: integrates the initial value
problem u'' = -(lambda u+^q +/- u+^p), u(0) = 0, u'(0) = s with classical
RK4 and finds boundary-value solutions as roots of s -> u(1; s).  Exists to
cross-check minimal-solution profiles and the extremal-parameter brackets,
so it deliberately shares nothing with the finite-difference path except
the u+ clamp (both sides must solve the identical nonlinearity).

Trajectories that dive below zero keep integrating on the clamped dynamics
(the nonlinearity vanishes, so the continuation is linear) and carry a
``crossed_zero`` flag; refined roots are reported from the nonnegative side
of the bracket so solution profiles never dip below zero on the way to
their terminal root.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BracketInvalid
from .mesh import Field, Grid, INTERVAL, make_field
from .problem import BifurcationDiagram, DiagramRecord, assemble_diagram

_REFINE_TOL = 1e-10
# Profiles that grow beyond this saturated the +-1e100 clamp at some point;
# they are integration failures, not boundary-value solutions.
_AMP_CAP = 1e50


def _sign_of(variant: str) -> float:
    if variant == "plus":
        return 1.0
    if variant == "minus":
        return -1.0
    raise ValueError(f"variant must be plus or minus, got {variant!r}")


@dataclass(frozen=True)
class ShootingResult:
    s: float
    terminal: float
    profile: np.ndarray
    crossed_zero: bool

    @property
    def steps(self) -> int:
        return len(self.profile) - 1

    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.profile))


def shoot(lam, q, p, variant, s, steps=4000, rhs=None) -> ShootingResult:
    """One RK4 trajectory over [0, 1].

    ``rhs`` optionally replaces the source term f in -u'' = f(u) (testing
    hook; the linear and constant-source closed forms come from here).
    Exponents are passed through unvalidated for the same reason.
    """
    if s <= 0.0:
        raise ValueError("shoot needs a positive initial slope")
    if steps < 1000:
        raise ValueError("shoot needs at least 1000 steps")
    kern_rhs = None if rhs is None else (lambda u: -rhs(u))
    out = np.empty(steps + 1)
    crossed = kernels.rk4_profile(
        float(lam), float(q), float(p), _sign_of(variant), float(s), int(steps), out, kern_rhs
    )
    return ShootingResult(s=float(s), terminal=float(out[-1]), profile=out, crossed_zero=bool(crossed))


def default_slope_grid(count: int = 64, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    """Logarithmic slope ladder wide enough for both the small (minimal)
    and large branches."""
    if count < 2:
        raise ValueError("a slope ladder needs at least 2 rungs")
    if not 0.0 < lo < hi:
        raise ValueError("slope ladder needs 0 < lo < hi")
    return np.geomspace(lo, hi, count)


def _terminal_batch(lam, q, p, sign, slopes, steps):
    term, crossed = kernels.rk4_terminal(float(lam), float(q), float(p), sign, slopes, int(steps))
    return np.asarray(term), np.asarray(crossed, dtype=bool)


def solution_count(lam, q, p, variant, s_grid, steps=4000):
    """Roots of the terminal map over the slope grid, refined to 1e-10 in s.

    All brackets are narrowed in lockstep (one batched integration per
    bisection level), and each root is reported from its nonnegative-
    terminal side; profiles that still cross zero in the interior are
    dropped as sign-changing spectators.  Returns a list of ShootingResult.
    """
    sign = _sign_of(variant)
    s = np.asarray(list(s_grid), dtype=np.float64)
    if s.size == 0:
        return []
    if np.any(s <= 0.0) or np.any(np.diff(s) <= 0.0):
        raise ValueError("slope grid must be positive and increasing")
    term, _ = _terminal_batch(lam, q, p, sign, s, steps)
    flips = np.nonzero(np.signbit(term[:-1]) != np.signbit(term[1:]))[0]
    if flips.size == 0:
        return []
    lo = s[flips].copy()
    hi = s[flips + 1].copy()
    flo = term[flips].copy()
    while np.max(hi - lo) > _REFINE_TOL:
        mid = 0.5 * (lo + hi)
        fmid, _ = _terminal_batch(lam, q, p, sign, mid, steps)
        take_lo = np.signbit(fmid) == np.signbit(flo)
        lo = np.where(take_lo, mid, lo)
        flo = np.where(take_lo, fmid, flo)
        hi = np.where(take_lo, hi, mid)
    roots = []
    flo_final, _ = _terminal_batch(lam, q, p, sign, lo, steps)
    for a, b, fa in zip(lo, hi, flo_final):
        root_s = a if fa >= 0.0 else b
        result = shoot(lam, q, p, variant, root_s, steps)
        if not result.crossed_zero and float(np.max(np.abs(result.profile))) < _AMP_CAP:
            roots.append(result)
    return roots


def _exists(lam, q, p, variant, s_grid, steps, nontrivial_floor):
    if variant == "plus":
        # A sign flip of the terminal map is already a root certificate
        # (positive-hump profiles never cross zero), so skip refinement.
        s = np.asarray(list(s_grid), dtype=np.float64)
        term, _ = _terminal_batch(lam, q, p, _sign_of(variant), s, steps)
        return bool(np.any(np.signbit(term[:-1]) != np.signbit(term[1:])))
    roots = solution_count(lam, q, p, variant, s_grid, steps)
    if nontrivial_floor is None:
        return len(roots) > 0
    return any(float(np.max(r.profile)) > nontrivial_floor for r in roots)


def oracle_lambda_star(
    q,
    p,
    variant,
    tol_lambda=1e-2,
    s_grid=None,
    steps=4000,
    nontrivial_floor=1e-4,
):
    """Bracket the existence threshold by bisection on the root count.

    For the plus variant existence holds below the threshold; for minus it
    holds above (with the same sup-norm floor the grid solver uses).  The
    initial bracket is grown geometrically from lambda = 1; BracketInvalid
    if no existence flip shows up across 18 orders of magnitude.
    """
    if tol_lambda <= 0.0:
        raise ValueError("tol_lambda must be positive")
    if s_grid is None:
        # The minus threshold sits where a root's amplitude crosses the
        # floor, so its slope ladder must reach well below the floor scale
        # or the ladder edge (not the floor) would decide existence.
        s_grid = (
            default_slope_grid()
            if variant == "plus"
            else default_slope_grid(96, min(1e-6, nontrivial_floor * 1e-2), 1e3)
        )
    floor = nontrivial_floor if variant == "minus" else None

    def exists(lam):
        return _exists(lam, q, p, variant, s_grid, steps, floor)

    # Orient so pred flips False -> True at the threshold from lo to hi.
    if variant == "plus":
        def pred(lam):
            return not exists(lam)
    else:
        pred = exists

    lam = 1.0
    if pred(lam):
        hi = lam
        lo = lam / 2.0
        while pred(lo):
            hi = lo
            lo /= 2.0
            if lo < 1e-9:
                raise BracketInvalid("no existence flip found down to 1e-9")
    else:
        lo = lam
        hi = lam * 2.0
        while not pred(hi):
            lo = hi
            hi *= 2.0
            if hi > 1e9:
                raise BracketInvalid("no existence flip found up to 1e9")
    while hi - lo > tol_lambda:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return (lo, hi)


def profile_field(result: ShootingResult, grid: Grid) -> Field:
    """Sample a root's profile onto an interval grid by stride (the step
    count must be a multiple of the cell count, so no interpolation happens;
    the terminal root residue lands on the boundary condition)."""
    if grid.kind != INTERVAL:
        raise ValueError("profiles transfer to interval grids only")
    cells = grid.counts[0] - 1
    if result.steps % cells != 0:
        raise ValueError(
            f"step count {result.steps} is not a multiple of the {cells} grid cells"
        )
    values = result.profile[:: result.steps // cells].copy()
    values[0] = 0.0
    values[-1] = 0.0
    return make_field(grid, values, dirichlet=True)


def oracle_sweep(q, p, variant, lambdas, s_grid=None, steps=4000) -> BifurcationDiagram:
    """Branch diagram from the shooting side (constant unit weights).

    Records the smallest-slope root per lambda — the minimal branch — with
    norms, energy and the quadratic-form stability slack evaluated on the
    fine trajectory mesh; ``iterations`` holds the RK step count and rows
    carry source=oracle.
    """
    if s_grid is None:
        s_grid = default_slope_grid()
    sign = _sign_of(variant)
    lams = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("sweep needs strictly increasing lambdas")
    dx = 1.0 / steps
    records = []
    nan = float("nan")
    for lam in lams:
        roots = solution_count(lam, q, p, variant, s_grid, steps)
        if roots:
            u = roots[0].profile
            du = np.diff(u)
            g2 = float(du @ du) / dx
            uq = float(np.trapezoid(np.abs(u) ** (q + 1.0), dx=dx))
            up = float(np.trapezoid(np.abs(u) ** (p + 1.0), dx=dx))
            energy = 0.5 * g2 - lam / (q + 1.0) * uq - sign / (p + 1.0) * up
            records.append(
                DiagramRecord(
                    lam=lam,
                    sup_norm=float(np.max(u)),
                    h1_norm=float(np.sqrt(g2)),
                    energy=energy,
                    stability_slack=g2 - (lam * q * uq + sign * p * up),
                    iterations=steps,
                    converged=True,
                    source="oracle",
                )
            )
        else:
            records.append(
                DiagramRecord(
                    lam=lam,
                    sup_norm=nan,
                    h1_norm=nan,
                    energy=nan,
                    stability_slack=nan,
                    iterations=steps,
                    converged=False,
                    source="oracle",
                )
            )
    return assemble_diagram(records)
