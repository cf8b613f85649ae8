"""Adaptive Simpson quadrature."""

from __future__ import annotations

from collections.abc import Callable

from .errors import DomainError, IntegrationError

MAX_DEPTH = 50


def integrate(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Integrate f over [a, b] to an estimated absolute error <= tol.

    Classic adaptive Simpson with Richardson extrapolation; each bisection
    halves the tolerance budget.  Raises IntegrationError (carrying the best
    available estimate) if any panel hits the depth cap unconverged.
    """
    if not tol > 0:
        raise DomainError(f"integrate() needs tol > 0, got {tol}")
    if a > b:
        raise DomainError(f"integrate() needs a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0

    failed = False

    def simpson(fa: float, fm: float, fb: float, h: float) -> float:
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(lo: float, hi: float, flo: float, fm: float, fhi: float,
                whole: float, eps: float, depth: int) -> float:
        nonlocal failed
        m = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + m), 0.5 * (m + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(flo, flm, fm, m - lo)
        right = simpson(fm, frm, fhi, hi - m)
        err = (left + right - whole) / 15.0
        if abs(err) <= eps:
            return left + right + err
        if depth >= MAX_DEPTH:
            failed = True
            return left + right + err
        return (recurse(lo, m, flo, flm, fm, left, 0.5 * eps, depth + 1)
                + recurse(m, hi, fm, frm, fhi, right, 0.5 * eps, depth + 1))

    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fmid = f(mid)
    result = recurse(a, b, fa, fmid, fb, simpson(fa, fmid, fb, b - a), tol, 0)
    if failed:
        raise IntegrationError(
            f"adaptive Simpson hit depth {MAX_DEPTH} before reaching tol={tol}", result)
    return result
