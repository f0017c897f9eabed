"""Small numeric helpers shared by the solver modules and the test oracles."""

import math


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, a, b, tol=1e-12, max_iter=400):
    """Minimize a unimodal scalar function on [a, b].

    Golden-section alone locates an argmin only to about sqrt(eps) because
    the function is flat at the bottom, so the final bracket midpoint is
    polished with one symmetric three-point parabolic fit at a width where
    curvature still dominates roundoff.  Returns ``(x, f(x))``.  Used as an
    independent check on closed-form minimizers, so it deliberately shares
    no algebra with them.
    """
    if not b > a:
        raise ValueError("golden_section_min needs a < b")
    a0, b0 = a, b
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    d = 1e-5 * (1.0 + abs(x))
    if a0 <= x - d and x + d <= b0:
        fl, fm, fr = f(x - d), f(x), f(x + d)
        denom = fl - 2.0 * fm + fr
        if denom > 0.0:
            shift = 0.5 * d * (fl - fr) / denom
            if abs(shift) < d:
                x = x + shift
    return x, f(x)


def golden_section_max(f, a, b, tol=1e-12, max_iter=400):
    """Maximize a unimodal scalar function on [a, b]; see golden_section_min."""
    x, fx = golden_section_min(lambda t: -f(t), a, b, tol, max_iter)
    return x, -fx


def bisect_root(f, a, b, tol):
    """Root of a sign-changing continuous function by plain bisection."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise ValueError("bisect_root needs a sign change on [a, b]")
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)
