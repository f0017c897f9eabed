import numpy as np
import pytest

from leflab import mesh
from leflab.errors import GridMismatch, NonPositivePotential
from leflab.potentials import UNIT, PotentialSpec, make_potential, pair_stats, unit_pair


def test_spec_validation():
    with pytest.raises(ValueError):
        PotentialSpec("parabola", (1.0,))
    with pytest.raises(ValueError):
        PotentialSpec("file")
    with pytest.raises(ValueError):
        PotentialSpec("constant", (float("nan"),))
    with pytest.raises(ValueError):
        PotentialSpec("constant", ())


def test_constant(interval_grid):
    f = make_potential(interval_grid, PotentialSpec("constant", (2.5,)))
    assert np.all(f.values == 2.5)


def test_affine_interval(interval_grid):
    f = make_potential(interval_grid, PotentialSpec("affine", (1.0, 0.5)))
    x = interval_grid.axes[0]
    np.testing.assert_allclose(f.values, 1.0 + 0.5 * x, rtol=1e-15)


def test_affine_square(square_grid):
    f = make_potential(square_grid, PotentialSpec("affine", (2.0, -0.5, 1.0)))
    coords = square_grid.node_coords()
    np.testing.assert_allclose(f.values, 2.0 - 0.5 * coords[:, 0] + coords[:, 1], rtol=1e-15)


def test_affine_arity(square_grid):
    with pytest.raises(ValueError):
        make_potential(square_grid, PotentialSpec("affine", (1.0, 0.5)))


def test_gaussian_bump(interval_grid):
    f = make_potential(interval_grid, PotentialSpec("gaussian-bump", (1.0, 2.0, 0.5, 0.1)))
    x = interval_grid.axes[0]
    want = 1.0 + 2.0 * np.exp(-((x - 0.5) ** 2) / 0.02)
    np.testing.assert_allclose(f.values, want, rtol=1e-15)
    with pytest.raises(ValueError):
        make_potential(interval_grid, PotentialSpec("gaussian-bump", (1.0, 2.0, 0.5, 0.0)))
    with pytest.raises(ValueError):
        # a 1d grid wants exactly one center coordinate
        make_potential(interval_grid, PotentialSpec("gaussian-bump", (1.0, 2.0, 0.5, 0.5, 0.1)))


def test_positivity_enforced(interval_grid):
    with pytest.raises(NonPositivePotential):
        make_potential(interval_grid, PotentialSpec("affine", (0.5, -1.0)))
    with pytest.raises(NonPositivePotential):
        make_potential(interval_grid, PotentialSpec("constant", (0.0,)))


def test_file_roundtrip(tmp_path, interval_grid):
    base = make_potential(interval_grid, PotentialSpec("gaussian-bump", (1.0, 1.0, 0.3, 0.2)))
    path = tmp_path / "weight.dat"
    mesh.write_field(base, path)
    again = make_potential(interval_grid, PotentialSpec("file", path=str(path)))
    assert np.array_equal(again.values, base.values)


def test_file_grid_mismatch(tmp_path, interval_grid):
    other = mesh.build_grid("interval", 33)
    path = tmp_path / "weight.dat"
    mesh.write_field(mesh.constant_field(other, 1.0), path)
    with pytest.raises(GridMismatch):
        make_potential(interval_grid, PotentialSpec("file", path=str(path)))


def test_file_negative_values(tmp_path, interval_grid):
    path = tmp_path / "weight.dat"
    mesh.write_field(mesh.constant_field(interval_grid, -1.0), path)
    with pytest.raises(NonPositivePotential):
        make_potential(interval_grid, PotentialSpec("file", path=str(path)))


def test_pair_stats(interval_grid):
    k = make_potential(interval_grid, PotentialSpec("affine", (1.0, 1.0)))
    h = make_potential(interval_grid, PotentialSpec("constant", (0.25,)))
    pair = pair_stats(k, h)
    assert pair.m == 0.25  # joint minimum of both weights
    assert pair.sup_k == 2.0
    assert pair.sup_h == 0.25


def test_pair_stats_grid_mismatch(interval_grid):
    other = mesh.build_grid("interval", 33)
    with pytest.raises(GridMismatch):
        pair_stats(
            make_potential(interval_grid, UNIT),
            make_potential(other, UNIT),
        )


def test_unit_pair(interval_grid):
    pair = unit_pair(interval_grid)
    assert pair.m == pair.sup_k == pair.sup_h == 1.0
    assert np.all(pair.k.values == 1.0)
