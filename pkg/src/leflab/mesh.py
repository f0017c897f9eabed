"""Uniform Dirichlet grids on the unit interval and unit square.

Provides the discrete building blocks every other module relies on:

* ``Grid`` / ``Field`` containers (immutable after construction),
* the negative Laplacian ``-lap_h`` (3-point / 5-point central stencil,
  exact on quadratics),
* a conjugate-gradient Poisson solver with zero initial guess,
* inverse-power eigensolvers for ``-lap_h`` and ``-lap_h - diag(c)``,
* composite-trapezoid quadrature and the discrete norms,
* a plain-text field file format (``x,value`` / ``x,y,value`` records).

The gradient quadrature behind ``norm_h1`` uses one-sided differences on
cells (in 2-D each cell contributes the average of its two parallel edge
differences per axis).  With that convention summation by parts is exact:
``grad_inner(u, v) == integrate(apply_laplacian(u) * v)`` for Dirichlet
fields, which is what makes the discrete energy identities in the branch
modules hold to solver accuracy.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .errors import (
    FileFormat,
    GridMismatch,
    GridTooCoarse,
    NoConvergence,
    UnsupportedKind,
)

INTERVAL = "interval"
RECTANGLE = "rectangle"

EIGEN_MAX_ITER = 10_000
POISSON_ITER_FACTOR = 20

_FMT = ".17g"


# ---------------------------------------------------------------------------
# containers


@dataclasses.dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid on [0,1] (interval) or [0,1]^2 (rectangle).

    ``counts`` are node counts per axis including both boundary nodes, so the
    spacing per axis is ``1/(count-1)``.  Rectangle nodes are stored
    row-major: flat index ``iy*nx + ix``, coordinates ``(ix*hx, iy*hy)``.
    """

    kind: str
    counts: tuple[int, ...]
    spacing: tuple[float, ...]
    axes: tuple[np.ndarray, ...]
    interior: np.ndarray
    quad_weights: np.ndarray

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.counts))

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(self.interior))

    def matches(self, other: "Grid") -> bool:
        return self.kind == other.kind and self.counts == other.counts

    def shape2d(self) -> tuple[int, int]:
        """Array shape (ny, nx) for viewing flat rectangle values as 2-D."""
        nx, ny = self.counts
        return (ny, nx)

    def node_coords(self) -> np.ndarray:
        """Coordinates of every node, shape (npoints, ndim), row-major."""
        if self.kind == INTERVAL:
            return self.axes[0][:, None]
        xs, ys = np.meshgrid(self.axes[0], self.axes[1])
        return np.column_stack([xs.ravel(), ys.ravel()])


@dataclasses.dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a :class:`Grid`; ``dirichlet`` fields vanish on the
    boundary exactly.  The value array is copied and write-protected."""

    grid: Grid
    values: np.ndarray
    dirichlet: bool

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if values.size != self.grid.npoints:
            raise GridMismatch(
                f"field has {values.size} values for a grid of {self.grid.npoints} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if self.dirichlet and np.any(values[~self.grid.interior] != 0.0):
            raise ValueError("dirichlet field has nonzero boundary values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def values2d(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape2d())

    def with_values(self, values: np.ndarray, dirichlet: bool | None = None) -> "Field":
        return Field(self.grid, values, self.dirichlet if dirichlet is None else dirichlet)


@dataclasses.dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue with its sup-normalized eigenfunction."""

    eigenvalue: float
    eigenfunction: Field

    def __post_init__(self):
        peak = np.max(np.abs(self.eigenfunction.values))
        if abs(peak - 1.0) > 1e-12:
            raise ValueError("eigenfunction must have unit sup-norm")


# ---------------------------------------------------------------------------
# construction


def build_grid(kind: str, counts) -> Grid:
    """Build a grid of the given kind; ``counts`` is an int (interval, or
    both rectangle axes) or a pair of ints (rectangle)."""
    if kind == INTERVAL:
        counts = (int(counts),) if np.isscalar(counts) else tuple(int(c) for c in counts)
        if len(counts) != 1:
            raise UnsupportedKind("interval grids take a single node count")
    elif kind == RECTANGLE:
        if np.isscalar(counts):
            counts = (int(counts), int(counts))
        else:
            counts = tuple(int(c) for c in counts)
            if len(counts) == 1:
                counts = (counts[0], counts[0])
        if len(counts) != 2:
            raise UnsupportedKind("rectangle grids take one or two node counts")
    else:
        raise UnsupportedKind(f"unknown grid kind {kind!r}")

    if any(c < 5 for c in counts):
        raise GridTooCoarse(f"counts {counts} leave fewer than 3 interior nodes per axis")

    spacing = tuple(1.0 / (c - 1) for c in counts)
    axes = tuple(np.linspace(0.0, 1.0, c) for c in counts)

    def axis_weights(c, h):
        w = np.full(c, h)
        w[0] = w[-1] = 0.5 * h
        return w

    if kind == INTERVAL:
        (n,) = counts
        interior = np.zeros(n, dtype=bool)
        interior[1:-1] = True
        quad = axis_weights(n, spacing[0])
    else:
        nx, ny = counts
        ix = np.zeros(nx, dtype=bool)
        ix[1:-1] = True
        iy = np.zeros(ny, dtype=bool)
        iy[1:-1] = True
        interior = (iy[:, None] & ix[None, :]).ravel()
        quad = np.outer(axis_weights(ny, spacing[1]), axis_weights(nx, spacing[0])).ravel()

    for arr in axes + (interior, quad):
        arr.flags.writeable = False
    return Grid(kind=kind, counts=counts, spacing=spacing, axes=axes, interior=interior, quad_weights=quad)


def make_field(grid: Grid, values, dirichlet: bool) -> Field:
    return Field(grid, np.asarray(values, dtype=np.float64), dirichlet)


def constant_field(grid: Grid, value: float) -> Field:
    return Field(grid, np.full(grid.npoints, float(value)), dirichlet=False)


def zero_field(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.npoints), dirichlet=True)


def random_dirichlet_field(grid: Grid, rng: np.random.Generator) -> Field:
    """Uniform(-1,1) interior values, zero boundary."""
    values = np.where(grid.interior, rng.uniform(-1.0, 1.0, grid.npoints), 0.0)
    return Field(grid, values, dirichlet=True)


def _require_same_grid(a: Field | Grid, b: Field | Grid):
    ga = a if isinstance(a, Grid) else a.grid
    gb = b if isinstance(b, Grid) else b.grid
    if not ga.matches(gb):
        raise GridMismatch(f"grids differ: {ga.kind}{ga.counts} vs {gb.kind}{gb.counts}")


# ---------------------------------------------------------------------------
# stencil and linear solves


def _neg_laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    if grid.kind == INTERVAL:
        kernels.neg_laplacian_1d(values, 1.0 / grid.spacing[0] ** 2, out)
    else:
        shape = grid.shape2d()
        kernels.neg_laplacian_2d(
            values.reshape(shape),
            1.0 / grid.spacing[0] ** 2,
            1.0 / grid.spacing[1] ** 2,
            out.reshape(shape),
        )
    return out


def apply_laplacian(grid: Grid, u: Field) -> Field:
    """-lap_h u with the central stencil; zero at boundary nodes."""
    _require_same_grid(grid, u)
    if not u.dirichlet:
        raise ValueError("apply_laplacian expects a dirichlet field")
    return Field(grid, _neg_laplacian_values(grid, u.values), dirichlet=True)


class _IndefiniteDirection(Exception):
    """CG met a direction of nonpositive curvature (matrix not SPD)."""


def _cg(
    grid: Grid,
    rhs: np.ndarray,
    tol_abs: float,
    max_iter: int,
    diag: np.ndarray | None = None,
    guard_indefinite: bool = False,
    best_effort: bool = False,
) -> tuple[np.ndarray, int]:
    """Conjugate gradients for (-lap_h - diag)(x) = rhs on interior nodes.

    Zero initial guess; stops when the interior residual sup-norm drops to
    ``tol_abs``.  Boundary entries of the iterate stay exactly zero.  With
    ``best_effort`` the best iterate seen is returned once the residual
    stagnates (used by the eigensolver, whose outer residual test is the
    honest convergence gate); otherwise missing the tolerance raises
    :class:`NoConvergence`.
    """
    interior = grid.interior
    b = np.where(interior, rhs, 0.0)
    x = np.zeros_like(b)
    r = b.copy()
    res = float(np.max(np.abs(r)))
    if res <= tol_abs:
        return x, 0
    p = r.copy()
    rho = float(r @ r)
    best_res = res
    best_x = x.copy()
    since_improved = 0
    for it in range(1, max_iter + 1):
        ap = _neg_laplacian_values(grid, p)
        if diag is not None:
            ap -= diag * p
            ap[~interior] = 0.0
        pap = float(p @ ap)
        if pap <= 0.0:
            if guard_indefinite:
                raise _IndefiniteDirection
            raise NoConvergence("CG broke down (matrix not positive definite)", iterations=it)
        alpha = rho / pap
        x += alpha * p
        r -= alpha * ap
        res = float(np.max(np.abs(r)))
        if res <= tol_abs:
            return x, it
        if res < 0.999 * best_res:
            best_res = res
            best_x[...] = x
            since_improved = 0
        else:
            since_improved += 1
            # Past the exact-termination dimension CG is in its roundoff
            # regime; a long run without improvement means the requested
            # tolerance is below the attainable floor.
            if best_effort and it >= grid.n_interior and since_improved >= 100:
                return best_x, it
        rho_new = float(r @ r)
        p = r + (rho_new / rho) * p
        rho = rho_new
    if best_effort:
        return best_x, max_iter
    raise NoConvergence(
        f"CG did not reach tolerance {tol_abs:.3e} in {max_iter} iterations",
        iterations=max_iter,
    )


def solve_poisson(grid: Grid, rhs: Field, tol: float = 1e-10) -> Field:
    """Solve -lap_h u = rhs with zero Dirichlet data.

    The interior residual satisfies ``sup|(-lap_h u) - rhs| <= tol * max(1,
    sup|rhs|)``; the iteration cap is 20 times the interior node count.
    """
    _require_same_grid(grid, rhs)
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.where(grid.interior, rhs.values, 0.0)
    tol_abs = tol * max(1.0, float(np.max(np.abs(b))))
    x, _ = _cg(grid, b, tol_abs, POISSON_ITER_FACTOR * grid.n_interior)
    return Field(grid, x, dirichlet=True)


def _solve_correction(grid: Grid, residual: np.ndarray, rel_tol: float, max_iter: int) -> np.ndarray:
    """Solve -lap_h d = residual to a tolerance relative to the residual size.

    Used by the fixed-point loops: the correction's signed error then scales
    with the update itself rather than with an absolute floor.
    """
    sup = float(np.max(np.abs(residual)))
    if sup == 0.0:
        return np.zeros_like(residual)
    x, _ = _cg(grid, residual, rel_tol * sup, max_iter)
    return x


# ---------------------------------------------------------------------------
# eigenpairs


def _smallest_eig(
    grid: Grid,
    c: np.ndarray | None,
    tol: float,
) -> tuple[float, np.ndarray, int]:
    """Shifted inverse power iteration for the smallest eigenvalue of
    B = -lap_h - diag(c) on interior nodes.

    Starts from a shift certified below the spectrum (lambda_1(-lap_h) -
    max(c)) and moves it up adaptively as the eigenvalue estimate sharpens;
    a curvature guard inside CG backs the shift off if it ever overshoots.
    """
    interior = grid.interior
    cvals = None
    if c is not None:
        cvals = np.where(interior, c, 0.0)

    def apply_b(v: np.ndarray) -> np.ndarray:
        out = _neg_laplacian_values(grid, v)
        if cvals is not None:
            out -= cvals * v
            out[~interior] = 0.0
        return out

    # Certified lower bound: lambda_min(B) >= lambda_min(-lap_h) - max(c) > -max(c).
    c_max = float(np.max(cvals[interior])) if cvals is not None else 0.0
    sigma_good = -c_max - 1.0
    sigma = sigma_good

    x = np.where(interior, 1.0, 0.0)
    x /= np.linalg.norm(x)
    cg_cap = POISSON_ITER_FACTOR * grid.n_interior

    inner_tol = max(1e-3 * tol, 1e-13)
    bad_solves = 0
    for it in range(1, EIGEN_MAX_ITER + 1):
        diag_arr = np.where(interior, sigma if cvals is None else cvals + sigma, 0.0)
        try:
            y = _cg(
                grid, x, inner_tol, cg_cap, diag=diag_arr, guard_indefinite=True, best_effort=True
            )[0]
        except _IndefiniteDirection:
            # Shift crept above the spectrum; back off halfway to the last
            # certified value and retry with the same iterate.
            sigma = 0.5 * (sigma + sigma_good)
            continue
        ynorm = float(np.linalg.norm(y))
        if ynorm == 0.0:
            # The inner solve produced nothing even in best-effort mode;
            # backing off the shift is the only lever, and it is a dead end
            # once the shift sits at its certified floor.
            bad_solves += 1
            if sigma == sigma_good or bad_solves >= 40:
                raise NoConvergence(
                    "inverse power iteration stalled: shifted solves return zero",
                    iterations=it,
                )
            sigma = 0.5 * (sigma + sigma_good)
            continue
        bad_solves = 0
        sigma_good = sigma
        y = y / ynorm
        by = apply_b(y)
        mu = float(y @ by)
        res = float(np.linalg.norm(by - mu * y))
        if res <= tol * max(1.0, abs(mu)):
            return mu, y, it
        sigma_new = mu - max(4.0 * res, 1e-3 * abs(mu) + 1e-9)
        if sigma_new > sigma:
            sigma = sigma_new
        x = y
    raise NoConvergence(
        f"inverse power iteration did not converge in {EIGEN_MAX_ITER} iterations",
        iterations=EIGEN_MAX_ITER,
    )


def _finalize_eigenfunction(grid: Grid, values: np.ndarray) -> Field:
    peak_idx = int(np.argmax(np.abs(values)))
    values = values / values[peak_idx]
    values[~grid.interior] = 0.0
    return Field(grid, values, dirichlet=True)


def principal_eigenpair(grid: Grid, tol: float = 1e-8) -> EigenPair:
    """Principal Dirichlet eigenpair of -lap_h (inverse power iteration).

    The eigenfunction is normalized to unit sup-norm and strictly positive at
    interior nodes.
    """
    mu, y, _ = _smallest_eig(grid, None, tol)
    phi = _finalize_eigenfunction(grid, y)
    if np.any(phi.values[grid.interior] <= 0.0):
        raise NoConvergence("principal eigenfunction failed interior positivity")
    return EigenPair(mu, phi)


def smallest_eigenvalue_shifted(grid: Grid, c: Field, tol: float = 1e-8) -> EigenPair:
    """Smallest eigenvalue of -lap_h - diag(c), c evaluated at interior nodes."""
    _require_same_grid(grid, c)
    mu, y, _ = _smallest_eig(grid, c.values, tol)
    return EigenPair(mu, _finalize_eigenfunction(grid, y))


_principal_cache: dict[tuple, EigenPair] = {}


def principal_eigenpair_cached(grid: Grid, tol: float = 1e-8) -> EigenPair:
    key = (grid.kind, grid.counts, tol)
    pair = _principal_cache.get(key)
    if pair is None:
        pair = principal_eigenpair(grid, tol)
        _principal_cache[key] = pair
    return pair


# ---------------------------------------------------------------------------
# quadrature and norms


def integrate(grid: Grid, f: Field) -> float:
    """Composite trapezoid rule over the domain."""
    _require_same_grid(grid, f)
    return float(grid.quad_weights @ f.values)


def norm_sup(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def norm_lp(grid: Grid, f: Field, r: float) -> float:
    """Trapezoid L^r norm, r >= 1."""
    if r < 1:
        raise ValueError("norm_lp requires r >= 1")
    _require_same_grid(grid, f)
    return float(grid.quad_weights @ np.abs(f.values) ** r) ** (1.0 / r)


def _grad_inner_values(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    if grid.kind == INTERVAL:
        h = grid.spacing[0]
        return float(np.diff(u) @ np.diff(v)) / h
    nx, ny = grid.counts
    hx, hy = grid.spacing
    u2 = u.reshape(ny, nx)
    v2 = v.reshape(ny, nx)

    def t_weights(n):
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        return w

    dux = np.diff(u2, axis=1)
    dvx = np.diff(v2, axis=1)
    sx = float(t_weights(ny) @ (dux * dvx).sum(axis=1)) * (hy / hx)
    duy = np.diff(u2, axis=0)
    dvy = np.diff(v2, axis=0)
    sy = float(t_weights(nx) @ (duy * dvy).sum(axis=0)) * (hx / hy)
    return sx + sy


def grad_inner(grid: Grid, u: Field, v: Field) -> float:
    """Discrete  integral of grad u . grad v  (one-sided differences on cells,
    trapezoid-weighted across each cell's parallel edges)."""
    _require_same_grid(grid, u)
    _require_same_grid(u, v)
    return _grad_inner_values(grid, u.values, v.values)


def norm_h1(grid: Grid, f: Field) -> float:
    """Dirichlet energy seminorm  (integral of |grad f|^2)^(1/2)."""
    return np.sqrt(max(_grad_inner_values(grid, f.values, f.values), 0.0))


# ---------------------------------------------------------------------------
# field file format


def write_field(f: Field, path) -> None:
    """Write a field as text: '#' header lines carrying kind/counts/h, then
    one ``x,value`` (interval) or ``x,y,value`` (rectangle) record per node,
    row-major, 17 significant digits."""
    grid = f.grid
    lines = [
        f"# kind: {grid.kind}",
        "# counts: " + " ".join(str(c) for c in grid.counts),
        "# h: " + " ".join(format(h, _FMT) for h in grid.spacing),
    ]
    coords = grid.node_coords()
    for node, value in zip(coords, f.values):
        parts = [format(c, _FMT) for c in node] + [format(value, _FMT)]
        lines.append(",".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path) -> Field:
    """Read a field written by :func:`write_field`.

    The grid is rebuilt from the header; coordinates in the records are
    checked against it.  A field whose boundary values are all exactly zero
    is flagged dirichlet.
    """
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    header[key.strip()] = val.strip()
                continue
            parts = line.split(",")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise FileFormat(f"line {lineno}: non-numeric record {line!r}") from exc

    for key in ("kind", "counts", "h"):
        if key not in header:
            raise FileFormat(f"missing '# {key}:' header")
    kind = header["kind"]
    try:
        counts = tuple(int(c) for c in header["counts"].split())
        spacing = tuple(float(h) for h in header["h"].split())
    except ValueError as exc:
        raise FileFormat("counts/h headers must be numeric") from exc
    try:
        grid = build_grid(kind, counts)
    except (UnsupportedKind, GridTooCoarse) as exc:
        raise FileFormat(str(exc)) from exc
    if len(spacing) != grid.ndim or any(
        abs(a - b) > 1e-12 * max(1.0, abs(b)) for a, b in zip(spacing, grid.spacing)
    ):
        raise FileFormat(f"header spacing {spacing} inconsistent with counts {counts}")

    if len(rows) != grid.npoints:
        raise FileFormat(f"expected {grid.npoints} records, found {len(rows)}")
    width = grid.ndim + 1
    if any(len(r) != width for r in rows):
        raise FileFormat(f"records must have {width} comma-separated columns")

    data = np.asarray(rows)
    coords = grid.node_coords()
    if np.max(np.abs(data[:, : grid.ndim] - coords)) > 1e-9:
        raise FileFormat("record coordinates do not match the row-major grid ordering")
    values = data[:, -1]
    dirichlet = bool(np.all(values[~grid.interior] == 0.0))
    return Field(grid, values, dirichlet)


# ---------------------------------------------------------------------------


def dirichlet_test_fields(grid: Grid, count: int, seed: int) -> list[Field]:
    """Deterministic bundle of random dirichlet fields (shared by the weak
    residual and the probe-based coercivity estimates)."""
    rng = np.random.default_rng(seed)
    return [random_dirichlet_field(grid, rng) for _ in range(count)]
