"""Strictly positive weight fields for the two nonlinear terms.

Both weights (conventionally ``k`` for the sublinear term and ``h`` for the
superlinear one) must stay bounded away from zero; every constructor checks
this at build time so downstream code never branches on degenerate weights.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, NonPositivePotential
from .mesh import Field, Grid, make_field, read_field

SHAPES = ("constant", "affine", "gaussian-bump", "file")


@dataclass(frozen=True)
class PotentialSpec:
    """Recipe for a weight field.

    shape      one of constant | affine | gaussian-bump | file
    params     shape parameters:
                 constant:       (value,)
                 affine:         (base, slope_x[, slope_y])
                 gaussian-bump:  (base, amplitude, center..., width)
                                 one center coordinate per grid axis
                 file:           ()
    path       source file for the "file" shape
    """

    shape: str
    params: tuple = field(default_factory=tuple)
    path: str | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown potential shape {self.shape!r}")
        if self.shape == "file":
            if not self.path:
                raise ValueError("file-shaped potential needs a path")
        else:
            vals = np.asarray(self.params, dtype=np.float64)
            if vals.size == 0 or not np.all(np.isfinite(vals)):
                raise ValueError("potential parameters must be finite reals")


UNIT = PotentialSpec("constant", (1.0,))


def _evaluate(grid: Grid, spec: PotentialSpec) -> np.ndarray:
    coords = grid.node_coords()
    if spec.shape == "constant":
        (value,) = spec.params
        return np.full(grid.npoints, float(value))
    if spec.shape == "affine":
        base, *slopes = spec.params
        if len(slopes) != grid.ndim:
            raise ValueError(
                f"affine potential on a {grid.ndim}d grid needs {grid.ndim} slope(s)"
            )
        out = np.full(grid.npoints, float(base))
        for axis, slope in enumerate(slopes):
            out += float(slope) * coords[:, axis]
        return out
    # gaussian-bump: base + amplitude * exp(-|x-c|^2 / (2 width^2))
    base, amplitude, *rest = spec.params
    if len(rest) != grid.ndim + 1:
        raise ValueError(
            f"gaussian-bump on a {grid.ndim}d grid needs {grid.ndim} center "
            "coordinate(s) and a width"
        )
    *center, width = rest
    if width <= 0:
        raise ValueError("gaussian-bump width must be positive")
    r2 = np.zeros(grid.npoints)
    for axis, c in enumerate(center):
        r2 += (coords[:, axis] - float(c)) ** 2
    return float(base) + float(amplitude) * np.exp(-r2 / (2.0 * float(width) ** 2))


def make_potential(grid: Grid, spec: PotentialSpec) -> Field:
    """Evaluate a spec on the grid; raises NonPositivePotential if any node
    value fails strict positivity."""
    if spec.shape == "file":
        f = read_field(spec.path)
        if not f.grid.matches(grid):
            raise GridMismatch(
                f"potential file {spec.path!r} was written on a different grid"
            )
        values = f.values.copy()
    else:
        values = _evaluate(grid, spec)
    low = float(values.min())
    if not low > 0.0:
        raise NonPositivePotential(
            f"potential ({spec.shape}) has minimum {low:g}; must be > 0 everywhere"
        )
    return make_field(grid, values, dirichlet=False)


@dataclass(frozen=True)
class PotentialPair:
    """The two weights plus the extrema the existence theory runs on."""

    k: Field
    h: Field
    m: float
    sup_k: float
    sup_h: float


def pair_stats(k: Field, h: Field) -> PotentialPair:
    """Bundle two positive weights with their joint minimum and sup-norms."""
    if not k.grid.matches(h.grid):
        raise GridMismatch("k and h live on different grids")
    min_k = float(k.values.min())
    min_h = float(h.values.min())
    if min_k <= 0.0 or min_h <= 0.0:
        raise NonPositivePotential(
            f"weights must be strictly positive (min k = {min_k:g}, min h = {min_h:g})"
        )
    return PotentialPair(
        k=k,
        h=h,
        m=min(min_k, min_h),
        sup_k=float(k.values.max()),
        sup_h=float(h.values.max()),
    )


def unit_pair(grid: Grid) -> PotentialPair:
    """k = h = 1, the configuration every analytic cross-check uses."""
    one = make_potential(grid, UNIT)
    return pair_stats(one, one)
