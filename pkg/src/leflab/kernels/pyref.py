"""NumPy reference implementation of the hot kernels.

Used when the compiled extension is unavailable (or forced via the
``LEFLAB_KERNELS`` environment variable).  The arithmetic is written in the
same operation order as the compiled version so the stencil results agree
bit for bit.
"""

import numpy as np

BACKEND = "python"

_CAP = 1e100


def neg_laplacian_1d(u, inv_h2, out):
    """out <- -u'' by the 3-point stencil; zero at the two boundary nodes."""
    out[0] = 0.0
    out[-1] = 0.0
    out[1:-1] = (2.0 * u[1:-1] - u[:-2] - u[2:]) * inv_h2


def neg_laplacian_2d(u, inv_hx2, inv_hy2, out):
    """out <- -(u_xx + u_yy) by the 5-point stencil on a (ny, nx) array."""
    out[...] = 0.0
    core = u[1:-1, 1:-1]
    out[1:-1, 1:-1] = (2.0 * core - u[1:-1, :-2] - u[1:-1, 2:]) * inv_hx2 + (
        2.0 * core - u[:-2, 1:-1] - u[2:, 1:-1]
    ) * inv_hy2


def _rhs(u, lam, q, p, sign):
    up = np.maximum(u, 0.0)
    return -(lam * up**q + sign * up**p)


def rk4_terminal(lam, q, p, sign, slopes, steps):
    """Integrate u'' = -(lam*u+^q + sign*u+^p) from (0, s) for a batch of s.

    Returns ``(terminal, crossed)`` where ``terminal`` holds u(1) for every
    slope and ``crossed`` flags trajectories that dipped below zero.  Values
    are clamped to +-1e100 so runaway convex trajectories stay finite.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    h = 1.0 / steps
    u = np.zeros_like(slopes)
    v = slopes.copy()
    crossed = np.zeros(slopes.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            k1u = v
            k1v = _rhs(u, lam, q, p, sign)
            k2u = v + 0.5 * h * k1v
            k2v = _rhs(u + 0.5 * h * k1u, lam, q, p, sign)
            k3u = v + 0.5 * h * k2v
            k3v = _rhs(u + 0.5 * h * k2u, lam, q, p, sign)
            k4u = v + h * k3v
            k4v = _rhs(u + h * k3u, lam, q, p, sign)
            u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            np.nan_to_num(u, copy=False, nan=_CAP, posinf=_CAP, neginf=-_CAP)
            np.nan_to_num(v, copy=False, nan=_CAP, posinf=_CAP, neginf=-_CAP)
            np.clip(u, -_CAP, _CAP, out=u)
            np.clip(v, -_CAP, _CAP, out=v)
            crossed |= u < 0.0
    return u, crossed


def rk4_profile(lam, q, p, sign, s, steps, out, rhs=None):
    """Single-trajectory variant of :func:`rk4_terminal` recording u at every
    node.  ``rhs`` optionally overrides the nonlinearity (testing hook).

    Returns True when the trajectory crossed below zero.
    """
    if rhs is None:
        def rhs(val):  # noqa: E731 - local closure mirrors the batch kernel
            up = val if val > 0.0 else 0.0
            return -(lam * up**q + sign * up**p)

    h = 1.0 / steps
    u = 0.0
    v = float(s)
    out[0] = 0.0
    crossed = False
    for i in range(steps):
        k1u = v
        k1v = rhs(u)
        k2u = v + 0.5 * h * k1v
        k2v = rhs(u + 0.5 * h * k1u)
        k3u = v + 0.5 * h * k2v
        k3v = rhs(u + 0.5 * h * k2u)
        k4u = v + h * k3v
        k4v = rhs(u + h * k3u)
        u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not np.isfinite(u):
            u = -_CAP if u < 0 else _CAP
        if not np.isfinite(v):
            v = -_CAP if v < 0 else _CAP
        u = min(max(u, -_CAP), _CAP)
        v = min(max(v, -_CAP), _CAP)
        if u < 0.0:
            crossed = True
        out[i + 1] = u
    return crossed
