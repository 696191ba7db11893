"""Dormand-Prince 5(4) integrator with PI step control and dense output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Butcher tableau
C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# difference between 5th and embedded 4th order weights
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# dense output: y(t + s h) = y + h * K^T P [s, s^2, s^3, s^4]
P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI controller exponents (Hairer & Wanner, dopri5 defaults)
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA


class IntegrationError(RuntimeError):
    """Step size underflow or a non-finite right-hand side."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} at t={t:.10g}")


@dataclass
class Segment:
    t: float
    h: float
    y: np.ndarray
    Q: np.ndarray  # (n, 4)

    def __call__(self, t):
        s = (np.asarray(t, dtype=float) - self.t) / self.h
        powers = np.stack([s, s**2, s**3, s**4])
        return self.y[:, None] + self.h * (self.Q @ powers)

    def derivative(self, t):
        s = (np.asarray(t, dtype=float) - self.t) / self.h
        powers = np.stack([np.ones_like(s), 2 * s, 3 * s**2, 4 * s**3])
        return self.Q @ powers


@dataclass
class Solution:
    """Samples of an integration on a requested time grid.

    ``status`` is ``"complete"`` when ``t_end`` was reached, ``"escaped"`` when
    the stop predicate fired first (``t_stop`` then holds the bracketed
    crossing time). Samples past the stop are not populated.
    """

    ts: np.ndarray
    ys: np.ndarray  # (len(ts), n)
    dys: np.ndarray
    status: str
    t_stop: Optional[float]
    n_steps: int
    n_rejected: int
    segments: list[Segment] = field(repr=False, default_factory=list)

    @property
    def valid(self) -> np.ndarray:
        if self.t_stop is None:
            return np.ones(self.ts.size, dtype=bool)
        return self.ts <= self.t_stop

    def dense(self, t: float) -> np.ndarray:
        seg = self._segment(t)
        return seg(t)[:, 0] if np.ndim(t) == 0 else seg(t)

    def dense_derivative(self, t: float) -> np.ndarray:
        seg = self._segment(t)
        return seg.derivative(np.atleast_1d(t))[:, 0]

    def evaluate(self, t, derivative: bool = False) -> np.ndarray:
        """Dense output at an array of times, shape ``(len(t), n)``.

        Needs ``keep_segments=True`` at integration time.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.array([s.t for s in self.segments])
        k = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        hs = np.array([s.h for s in self.segments])[k]
        Qs = np.stack([s.Q for s in self.segments])[k]  # (m, n, 4)
        s = (t - starts[k]) / hs
        if derivative:
            powers = np.stack([np.ones_like(s), 2 * s, 3 * s**2, 4 * s**3], -1)
            return np.einsum("mnk,mk->mn", Qs, powers)
        powers = np.stack([s, s**2, s**3, s**4], -1)
        y0 = np.stack([seg.y for seg in self.segments])[k]
        return y0 + hs[:, None] * np.einsum("mnk,mk->mn", Qs, powers)

    def _segment(self, t: float) -> Segment:
        starts = np.array([s.t for s in self.segments])
        k = int(np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1))
        return self.segments[k]


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, direction, rtol, atol) -> float:
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t_span: tuple[float, float],
    y0: np.ndarray,
    t_eval: np.ndarray,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    stop: Optional[Callable[[np.ndarray], bool]] = None,
    stop_tol: float = 1e-6,
    keep_segments: bool = False,
    max_steps: int = 2_000_000,
) -> Solution:
    """Integrate ``y' = fun(t, y)`` for a real state vector over ``t_span``.

    The 5th order solution is propagated (local extrapolation) and the step
    is chosen by a PI controller on the RMS-normed embedded error estimate.
    ``stop(y)`` is checked after every accepted step; when it becomes true the
    crossing time is bisected on the dense interpolant to ``stop_tol``.
    Integration runs forward only.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got ({t0}, {t1})")
    y = np.array(y0, dtype=float)
    n = y.size
    t_eval = np.asarray(t_eval, dtype=float)
    ys = np.full((t_eval.size, n), np.nan)
    dys = np.full((t_eval.size, n), np.nan)
    segments: list[Segment] = []

    f = fun(t0, y)
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite right-hand side", t0)
    h = _initial_step(fun, t0, y, f, 1.0, rtol, atol)
    t = t0
    k_eval = 0
    while k_eval < t_eval.size and t_eval[k_eval] <= t0:
        ys[k_eval], dys[k_eval] = y, f
        k_eval += 1

    K = np.empty((7, n))
    err_prev = 1e-4
    n_steps = n_rejected = 0
    status, t_stop = "complete", None
    while t < t1:
        if n_steps >= max_steps:
            raise IntegrationError("maximum number of steps exceeded", t)
        h = min(h, t1 - t)
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        K[0] = f
        for i in range(1, 7):
            K[i] = fun(t + C[i] * h, y + h * (np.asarray(A[i]) @ K[:i]))
        y_new = y + h * (B @ K)
        f_new = K[6]
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
            h *= MIN_FACTOR
            n_rejected += 1
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(h * (E @ K) / scale)
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** (-ALPHA))
            n_rejected += 1
            continue
        n_steps += 1
        seg = Segment(t, h, y.copy(), K.T @ P)
        if keep_segments:
            segments.append(seg)
        t_next = t + h if t1 - (t + h) > 1e-14 * max(1.0, abs(t1)) else t1
        escaped = stop is not None and stop(y_new)
        if escaped:
            lo, hi = t, t_next
            while hi - lo > stop_tol:
                mid = 0.5 * (lo + hi)
                if stop(seg(mid)[:, 0]):
                    hi = mid
                else:
                    lo = mid
            t_stop = 0.5 * (lo + hi)
            status = "escaped"
            limit = lo
        else:
            limit = t_next
        j = k_eval
        while j < t_eval.size and t_eval[j] <= limit:
            j += 1
        if j > k_eval:
            window = t_eval[k_eval:j]
            ys[k_eval:j] = seg(window).T
            dys[k_eval:j] = seg.derivative(window).T
            if not escaped and t_next == t1 and window[-1] == t1:
                ys[j - 1], dys[j - 1] = y_new, f_new
            k_eval = j
        if escaped:
            break
        fac = err ** ALPHA / err_prev**BETA if err > 0 else 1.0 / MAX_FACTOR
        h_factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY / fac)) if fac > 0 else MAX_FACTOR
        err_prev = max(err, 1e-4)
        t, y, f = t_next, y_new, f_new
        h *= h_factor
    return Solution(t_eval, ys, dys, status, t_stop, n_steps, n_rejected, segments)


def as_real(z: np.ndarray) -> np.ndarray:
    """Pack a complex vector as [re..., im...]."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag])


def as_complex(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`as_real` along the last axis."""
    y = np.asarray(y)
    m = y.shape[-1] // 2
    return y[..., :m] + 1j * y[..., m:]
