"""Composite adaptive Simpson quadrature on a sample grid."""

from __future__ import annotations

from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    pass


def _simpson(fa, fm, fb, h):
    return h / 6.0 * (fa + 4.0 * fm + fb)


def cumulative_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    ts: np.ndarray,
    tol: float = 1e-10,
    max_depth: int = 30,
    rtol: float = 1e-12,
    max_active: int = 1_000_000,
) -> np.ndarray:
    """Return ``I[k] = integral of f from ts[0] to ts[k]``.

    Each grid interval gets its own adaptive Simpson recursion with a share of
    ``tol`` proportional to its length; a piece is also accepted when its
    error estimate is below ``rtol`` times its own magnitude, so large
    integrands do not chase an unreachable absolute accuracy. All active
    subintervals are refined together, so ``f`` is always called on arrays.
    ``f`` may be real or complex valued.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1 or ts.size < 2:
        return np.zeros(ts.shape, dtype=float)
    span = ts[-1] - ts[0]
    a, b = ts[:-1], ts[1:]
    m = 0.5 * (a + b)
    fab = f(ts)
    fa, fb = fab[:-1], fab[1:]
    fm = f(m)
    dtype = np.result_type(fab, fm, float)
    pieces = np.zeros(a.size, dtype=dtype)
    owner = np.arange(a.size)
    whole = _simpson(fa, fm, fb, b - a)
    tols = tol * (b - a) / span if span > 0 else np.full(a.size, tol)
    depth = 0
    while owner.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flr = f(np.concatenate([lm, rm]))
        flm, frm = flr[: a.size], flr[a.size :]
        left = _simpson(fa, flm, fm, m - a)
        right = _simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if not np.all(np.isfinite(delta)):
            bad = a[~np.isfinite(delta)][0]
            raise QuadratureError(f"non-finite integrand near t={bad:.6g}")
        done = np.abs(delta) <= 15.0 * np.maximum(tols, rtol * np.abs(left + right))
        if depth >= max_depth and not np.all(done):
            # endpoint singularities converge slower than the shrinking share;
            # accept what is left if it is negligible against the total budget
            if np.sum(np.abs(delta[~done])) > tol:
                bad = a[~done][0]
                raise QuadratureError(f"adaptive Simpson did not converge near t={bad:.6g}")
            done[:] = True
        np.add.at(pieces, owner[done], (left + right + delta / 15.0)[done])
        keep = ~done
        if not np.any(keep):
            break
        lm, rm = lm[keep], rm[keep]
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        flm, frm = flm[keep], frm[keep]
        half_tol = tols[keep] / 2.0
        owner = owner[keep]
        # children: [a, m] with midpoint lm and [m, b] with midpoint rm
        a, m, b = np.concatenate([a, m]), np.concatenate([lm, rm]), np.concatenate([m, b])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([half_tol, half_tol])
        owner = np.concatenate([owner, owner])
        depth += 1
        if owner.size > max_active:
            raise QuadratureError(f"adaptive Simpson needs more than {max_active} subintervals")
    out = np.zeros(ts.size, dtype=dtype)
    out[1:] = np.cumsum(pieces)
    return out


def integrate(
    f: Callable[[np.ndarray], np.ndarray], a: float, b: float, tol: float = 1e-10, panels: int = 16
) -> float | complex:
    """Definite integral over [a, b] by adaptive Simpson.

    The range starts as ``panels`` equal pieces; a single coarse panel can
    sample an oscillating integrand only where it is small and stop early.
    """
    return cumulative_simpson(f, np.linspace(a, b, panels + 1), tol)[-1]


def cumulative_samples(values: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Cumulative integral of values already sampled on ``ts``.

    Composite Simpson on consecutive interval pairs, trapezoid for a trailing
    odd interval. Used for integrands that only exist on the grid.
    """
    ts = np.asarray(ts, dtype=float)
    v = np.asarray(values)
    out = np.zeros(ts.size, dtype=np.result_type(v, float))
    if ts.size < 2:
        return out
    h = np.diff(ts)
    trap = 0.5 * h * (v[:-1] + v[1:])
    out[1:] = np.cumsum(trap)
    # refine even-indexed points with Simpson over pairs of intervals
    if ts.size >= 3:
        h0, h1 = h[0:-1:2], h[1::2]
        n = min(h0.size, h1.size)
        h0, h1 = h0[:n], h1[:n]
        f0, f1, f2 = v[0 : 2 * n : 2], v[1 : 2 * n + 1 : 2], v[2 : 2 * n + 2 : 2]
        hs = h0 + h1
        simp = hs / 6.0 * ((2 - h1 / h0) * f0 + hs * hs / (h0 * h1) * f1 + (2 - h0 / h1) * f2)
        even = np.concatenate([[0], np.cumsum(simp)])
        out[0 : 2 * n + 1 : 2] = even
        # odd points: even value plus trapezoid over the following half interval
        out[1 : 2 * n : 2] = even[:-1] + trap[0 : 2 * n : 2]
        if ts.size % 2 == 0:
            out[-1] = out[-2] + trap[-1]
    return out
