import math

import numpy as np
import pytest

from leflab import branch_plus as bp
from leflab import mesh
from leflab import shooting as sh
from leflab.errors import BracketInvalid
from leflab.potentials import unit_pair
from leflab.problem import ProblemSpec

Q, P = 0.5, 3.0


def test_constant_source_closed_form():
    """-u'' = 1 integrates to s*x - x^2/2; RK4 is exact for polynomials."""
    res = sh.shoot(0.0, Q, P, "plus", s=0.5, steps=2000, rhs=lambda u: np.ones_like(u))
    x = res.x()
    np.testing.assert_allclose(res.profile, 0.5 * x - 0.5 * x**2, atol=1e-12)
    assert res.terminal == pytest.approx(0.0, abs=1e-12)


def test_linear_eigenmode_terminal():
    """q = p = 1 turns the source into (lam+1) u; at lam = pi^2 - 1 the
    trajectory is a sine arch and u(1) vanishes."""
    res = sh.shoot(math.pi**2 - 1.0, 1.0, 1.0, "plus", s=2.0, steps=4000)
    assert abs(res.terminal) <= 1e-8
    x = res.x()
    np.testing.assert_allclose(res.profile, 2.0 / math.pi * np.sin(math.pi * x), atol=1e-9)


def test_rk4_convergence_order():
    # measured on the smooth linear source; the concave term's sqrt kink at
    # u = 0 would otherwise cap the observable order near the left endpoint
    ref = sh.shoot(5.0, 1.0, 1.0, "plus", s=0.4, steps=16000).terminal
    errs = [
        abs(sh.shoot(5.0, 1.0, 1.0, "plus", s=0.4, steps=n).terminal - ref) for n in (1000, 2000)
    ]
    order = math.log2(errs[0] / errs[1])
    assert order >= 3.7


def test_shoot_validation():
    with pytest.raises(ValueError):
        sh.shoot(1.0, Q, P, "plus", s=-1.0)
    with pytest.raises(ValueError):
        sh.shoot(1.0, Q, P, "plus", s=1.0, steps=100)
    with pytest.raises(ValueError):
        sh.shoot(1.0, Q, P, "both", s=1.0)


def test_two_roots_at_moderate_lambda():
    roots = sh.solution_count(3.0, Q, P, "plus", sh.default_slope_grid())
    assert len(roots) == 2
    assert roots[0].s == pytest.approx(0.390512, abs=1e-4)
    assert roots[1].s == pytest.approx(9.226230, abs=1e-4)
    for r in roots:
        assert abs(r.terminal) <= 1e-6
        assert not r.crossed_zero
        assert np.min(r.profile) >= 0.0


def test_no_roots_past_the_fold():
    assert sh.solution_count(12.0, Q, P, "plus", sh.default_slope_grid()) == []


def test_solution_count_input_handling():
    assert sh.solution_count(3.0, Q, P, "plus", []) == []
    with pytest.raises(ValueError):
        sh.solution_count(3.0, Q, P, "plus", [2.0, 1.0])
    with pytest.raises(ValueError):
        sh.solution_count(3.0, Q, P, "plus", [-1.0, 2.0])


def test_oracle_brackets_nest():
    wide = sh.oracle_lambda_star(Q, P, "plus", tol_lambda=0.1)
    tight = sh.oracle_lambda_star(Q, P, "plus", tol_lambda=0.02)
    assert wide[0] - 1e-12 <= tight[0] and tight[1] <= wide[1] + 1e-12
    assert tight == (pytest.approx(9.03125, abs=1e-9), pytest.approx(9.046875, abs=1e-9))


def test_oracle_minus_threshold_positive():
    lo, hi = sh.oracle_lambda_star(Q, P, "minus", tol_lambda=0.01)
    assert 0.0 < lo < hi
    assert 0.5 * (lo + hi) == pytest.approx(0.089355, abs=2e-3)


def test_oracle_bracket_invalid_when_floor_unreachable():
    with pytest.raises(BracketInvalid):
        sh.oracle_lambda_star(Q, P, "minus", tol_lambda=0.1, nontrivial_floor=1e9)


def test_profile_transfers_to_grid(fine_interval):
    spec = ProblemSpec(Q, P, "plus", unit_pair(fine_interval))
    pde = bp.minimal_solution(fine_interval, spec, 3.0)
    roots = sh.solution_count(3.0, Q, P, "plus", sh.default_slope_grid(), steps=4000)
    prof = sh.profile_field(roots[0], fine_interval)
    rel = np.max(np.abs(prof.values - pde.solution.values)) / pde.sup_norm
    assert rel <= 1e-3
    # the transferred profile nearly satisfies the grid weak form
    assert bp.weak_residual(fine_interval, spec, 3.0, prof) <= 1e-4


def test_profile_field_validation(interval_grid, square_grid):
    root = sh.solution_count(3.0, Q, P, "plus", sh.default_slope_grid(), steps=4000)[0]
    with pytest.raises(ValueError):
        sh.profile_field(root, square_grid)
    with pytest.raises(ValueError):
        # 4000 steps do not stride onto 64 cells
        sh.profile_field(root, interval_grid)


def test_default_slope_grid():
    s = sh.default_slope_grid()
    assert s[0] == pytest.approx(1e-3) and s[-1] == pytest.approx(1e3)
    assert np.all(np.diff(s) > 0)
    with pytest.raises(ValueError):
        sh.default_slope_grid(1)


def test_oracle_sweep_diagram():
    lams = [0.5, 1.0, 3.0, 12.0]
    d = sh.oracle_sweep(Q, P, "plus", lams)
    assert [r.converged for r in d.records] == [True, True, True, False]
    assert math.isnan(d.records[-1].energy)
    w1 = d.records[1]
    assert w1.sup_norm == pytest.approx(0.0125567, abs=1e-6)
    assert w1.source == "oracle"
    assert w1.energy < 0.0
    with pytest.raises(ValueError):
        sh.oracle_sweep(Q, P, "plus", [2.0, 1.0])
