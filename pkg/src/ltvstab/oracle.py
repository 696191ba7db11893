"""Direct numerical integration used as an independent reference.

Covers the 2x2 system, second-order scalar equations, the Riccati equations
for the solution ratios, reconstruction of system solutions from a pair of
Riccati trajectories, and an empirical stability class from the growth of
the fundamental matrix.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import CriterionConfig, Grid, Trace
from .expr import compile_expr
from .quadrature import cumulative_simpson
from .reduction import ReducedSystem, ScalarEquation, SystemSpec, reduce
from .rk import IntegrationError, Solution, as_complex, as_real, dopri5
from .traces import LimitKind, estimate_limit

__all__ = [
    "FundamentalMatrix",
    "RiccatiTrajectory",
    "EmpiricalClass",
    "Empirical",
    "CouplingError",
    "IntegrationError",
    "integrate_fundamental",
    "integrate_scalar",
    "integrate_riccati",
    "reconstruct_solution",
    "empirical_classify",
    "spectral_norm",
    "liouville_residual",
    "empirical_for",
]

DEFAULT = CriterionConfig()


def _scalar_fns(sys: SystemSpec):
    return [compile_expr(e, scalar=True) for e in sys.coefficients]


def spectral_norm(phi: np.ndarray) -> np.ndarray:
    """Largest singular value of each 2x2 matrix in ``phi[..., 2, 2]``."""
    phi = np.asarray(phi)
    scale = np.max(np.abs(phi), axis=(-2, -1))
    safe = np.where(scale > 0, scale, 1.0)
    x = phi / safe[..., None, None]  # entries in [-1, 1] so squares cannot overflow
    fro2 = np.sum(np.abs(x) ** 2, axis=(-2, -1))
    det = x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0]
    disc = np.sqrt(np.maximum(fro2**2 - 4.0 * np.abs(det) ** 2, 0.0))
    return safe * np.sqrt(0.5 * (fro2 + disc))


@dataclass
class FundamentalMatrix:
    """``Phi(t)`` with ``Phi(t0) = I`` sampled on a grid.

    Stored as ``Phi = exp(sigma) Psi`` with ``sigma = (1/2) int S`` and
    ``Psi`` the solution of the trace-free system ``Psi' = (M - S/2 I) Psi``.
    The split keeps rapidly decaying or growing scalar factors out of the
    integrated entries, so ``det Psi = 1`` is a sharp accuracy check and
    ``log ||Phi||`` stays meaningful far below the absolute tolerance.

    ``status`` is ``"complete"`` or ``"capped"`` when the run stopped because
    ``log ||Phi||`` exceeded ``max_log_norm``; samples after ``t_stop`` are NaN.
    """

    ts: np.ndarray
    psi: np.ndarray  # (n, 2, 2) complex
    dpsi: np.ndarray
    sigma: np.ndarray  # (n,) complex, half the integral of the trace
    half_trace: np.ndarray  # (n,) complex, S/2 on the grid
    status: str
    t_stop: Optional[float]
    solution: Solution  # solution of the trace-free system

    @property
    def valid(self) -> np.ndarray:
        return np.all(np.isfinite(self.psi), axis=(1, 2)) & np.isfinite(self.sigma)

    @property
    def phi(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return np.exp(self.sigma)[:, None, None] * self.psi

    @property
    def dphi(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return np.exp(self.sigma)[:, None, None] * (self.dpsi + self.half_trace[:, None, None] * self.psi)

    def log_norms(self) -> np.ndarray:
        """``log ||Phi(t)||_2`` without forming ``Phi``."""
        with np.errstate(divide="ignore"):
            return self.sigma.real + np.log(spectral_norm(self.psi))

    def norms(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_norms())

    def det_psi(self) -> np.ndarray:
        p = self.psi
        return p[:, 0, 0] * p[:, 1, 1] - p[:, 0, 1] * p[:, 1, 0]

    def det(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return np.exp(2.0 * self.sigma) * self.det_psi()


def _matrix_rhs(sys: SystemSpec):
    fa, fb, fc, fd = _scalar_fns(sys)

    def rhs(t, y):
        z = y[:5] + 1j * y[5:]
        a, b, c, d = fa(t), fb(t), fc(t), fd(t)
        h = 0.5 * (a + d)
        a, d = a - h, d - h
        # columns of Psi stored as (psi11, psi21, psi12, psi22), then sigma
        out = np.array(
            [
                a * z[0] + b * z[1],
                c * z[0] + d * z[1],
                a * z[2] + b * z[3],
                c * z[2] + d * z[3],
                h,
            ]
        )
        return np.concatenate([out.real, out.imag])

    return rhs


def _unpack(z: np.ndarray) -> np.ndarray:
    """(n, 4) column-major entries -> (n, 2, 2) matrices."""
    out = np.empty((z.shape[0], 2, 2), dtype=complex)
    out[:, 0, 0], out[:, 1, 0], out[:, 0, 1], out[:, 1, 1] = z[:, 0], z[:, 1], z[:, 2], z[:, 3]
    return out


def _half_trace(sys: SystemSpec, ts: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """``S/2`` and ``(1/2) int_{t0}^t S`` on ``ts`` (the latter by adaptive quadrature)."""
    S = compile_expr(sys.a + sys.d)
    f = lambda t: 0.5 * np.asarray(S(t), dtype=complex) * np.ones(np.size(t))
    return f(ts), cumulative_simpson(f, ts, tol=tol)


def integrate_fundamental(
    sys: SystemSpec,
    grid: Grid,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_log_norm: float = 300.0,
    keep_segments: bool = False,
) -> FundamentalMatrix:
    """Integrate ``Phi' = M(t) Phi`` from the identity over ``grid``.

    Raises :class:`IntegrationError` with the location on step-size underflow.
    """
    y0 = as_real(np.array([1, 0, 0, 1, 0], dtype=complex))

    def too_large(y):
        with np.errstate(divide="ignore"):
            log_psi = float(np.log(np.max(np.hypot(y[:4], y[5:9]))))
        return log_psi > max_log_norm or log_psi + y[4] > max_log_norm

    sol = dopri5(
        _matrix_rhs(sys),
        (grid.t0, grid.T),
        y0,
        grid.ts,
        rtol=rtol,
        atol=atol,
        stop=too_large,
        keep_segments=keep_segments,
    )
    z, dz = as_complex(sol.ys), as_complex(sol.dys)
    status = "capped" if sol.status == "escaped" else "complete"
    half, sigma = _half_trace(sys, sol.ts)
    sigma = np.where(np.isfinite(z[:, 4]), sigma, np.nan)
    return FundamentalMatrix(sol.ts, _unpack(z), _unpack(dz), sigma, half, status, sol.t_stop, sol)


def liouville_residual(fm: FundamentalMatrix, sys: SystemSpec | None = None) -> np.ndarray:
    """``|det Phi - exp(int S)| / exp(int Re S)`` on the grid.

    With ``Phi = exp(sigma) Psi`` and ``2 sigma = int S`` this equals
    ``|det Psi - 1|``, evaluated in that form to avoid overflow.
    """
    return np.abs(fm.det_psi() - 1.0)


def integrate_scalar(
    eq: ScalarEquation, init: tuple[complex, complex], grid: Grid, rtol: float = 1e-10, atol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve ``phi'' + p phi' + q phi = 0``; returns ``(ts, phi, phi')``."""
    fp, fq = compile_expr(eq.p, scalar=True), compile_expr(eq.q, scalar=True)

    def rhs(t, y):
        x, v = y[0] + 1j * y[2], y[1] + 1j * y[3]
        dv = -fq(t) * x - fp(t) * v
        return np.array([v.real, dv.real, v.imag, dv.imag])

    sol = dopri5(rhs, (grid.t0, grid.T), as_real(np.array(init, dtype=complex)), grid.ts, rtol=rtol, atol=atol)
    z = as_complex(sol.ys)
    return sol.ts, z[:, 0], z[:, 1]


# ---------------------------------------------------------------------------
# Riccati equations

RICCATI_KINDS = ("eq23", "eq24", "eq28", "eq210", "eq218")


@dataclass
class RiccatiTrajectory:
    kind: str
    ts: np.ndarray
    values: np.ndarray  # complex, NaN after blow-up
    derivatives: np.ndarray
    blow_up_at: Optional[float]
    solution: Solution

    def __call__(self, t) -> np.ndarray:
        """Dense value at arbitrary times inside the integrated range."""
        return as_complex(self.solution.evaluate(t))[:, 0]

    def derivative(self, t) -> np.ndarray:
        return as_complex(self.solution.evaluate(t, derivative=True))[:, 0]


def _riccati_rhs(kind: str, red: ReducedSystem):
    sys = red.system
    if kind == "eq23":  # y' = -b y^2 - A y + c
        fb, fA, fc = (compile_expr(e, scalar=True) for e in (sys.b, red.A, sys.c))
        return lambda t, y: -fb(t) * y * y - fA(t) * y + fc(t)
    if kind == "eq24":  # z' = -c z^2 + A z + a
        fc, fA, fa = (compile_expr(e, scalar=True) for e in (sys.c, red.A, sys.a))
        return lambda t, z: -fc(t) * z * z + fA(t) * z + fa(t)
    if kind in ("eq28", "eq210"):  # u' = -u^2 + P u - D
        k = 1 if kind == "eq28" else 2
        fP, fD = compile_expr(red.P(k), scalar=True), compile_expr(red.D(k), scalar=True)
        return lambda t, u: -u * u + fP(t) * u - fD(t)
    if kind == "eq218":  # w' = -w^2 - G1
        fG = compile_expr(red.G1, scalar=True)
        return lambda t, w: -w * w - fG(t)
    raise ValueError(f"unknown Riccati equation {kind!r}; expected one of {RICCATI_KINDS}")


def integrate_riccati(
    kind: str,
    data: Union[ReducedSystem, SystemSpec],
    y0: complex,
    grid: Grid,
    escape_radius: float = 1e8,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> RiccatiTrajectory:
    """Integrate one Riccati equation until the grid end or ``|y| > escape_radius``."""
    if not np.isfinite(complex(y0)):
        raise ValueError("initial value must be finite")
    red = data if isinstance(data, ReducedSystem) else reduce(data)
    f = _riccati_rhs(kind, red)

    def rhs(t, y):
        v = f(t, complex(y[0], y[1]))
        return np.array([v.real, v.imag])

    sol = dopri5(
        rhs,
        (grid.t0, grid.T),
        np.array([complex(y0).real, complex(y0).imag]),
        grid.ts,
        rtol=rtol,
        atol=atol,
        stop=lambda y: bool(np.hypot(y[0], y[1]) > escape_radius),
        keep_segments=True,
    )
    vals, ders = as_complex(sol.ys)[:, 0], as_complex(sol.dys)[:, 0]
    blow = sol.t_stop if sol.status == "escaped" else None
    return RiccatiTrajectory(kind, sol.ts, vals, ders, blow, sol)


class CouplingError(ValueError):
    """Initial Riccati data do not satisfy ``(u - a)(v - d) = b c``."""


@dataclass
class ReconstructedPair:
    ts: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    residual: np.ndarray  # |system residual| / (|phi| + |psi|)


def reconstruct_solution(
    sys: SystemSpec,
    u: RiccatiTrajectory,
    v: RiccatiTrajectory,
    phi1: complex,
    psi1: complex,
    tol: float = 1e-10,
) -> ReconstructedPair:
    """Build ``phi = phi1 exp(int u)``, ``psi = psi1 exp(int v)``.

    ``u`` solves the first-component Riccati equation and ``v`` the second;
    both must start at the same ``t1`` with coupled values. The residual of
    the system is reported using ``phi' = u phi`` and ``psi' = v psi``.
    """
    t1 = float(u.ts[0])
    if v.ts[0] != t1:
        raise CouplingError("trajectories must start at the same time")
    fa, fb, fc, fd = _scalar_fns(sys)
    u1, v1 = complex(u.values[0]), complex(v.values[0])
    gap = abs((u1 - fa(t1)) * (v1 - fd(t1)) - fb(t1) * fc(t1))
    if gap > tol * max(1.0, abs(fb(t1) * fc(t1))):
        raise CouplingError(f"(u - a)(v - d) differs from b c by {gap:.3g} at t1 = {t1:g}")
    if abs(psi1 - (u1 - fa(t1)) / fb(t1) * phi1) > tol * max(1.0, abs(psi1)):
        raise CouplingError("psi1 must equal (u(t1) - a(t1)) phi1 / b(t1)")
    ends = [x.blow_up_at for x in (u, v) if x.blow_up_at is not None]
    ts = u.ts if not ends else u.ts[u.ts < min(ends)]
    Iu = cumulative_simpson(u, ts, tol=1e-13)
    Iv = cumulative_simpson(v, ts, tol=1e-13)
    phi, psi = phi1 * np.exp(Iu), psi1 * np.exp(Iv)
    uu, vv = u.values[: ts.size], v.values[: ts.size]
    M = sys.matrix(ts)
    r1 = uu * phi - (M[:, 0, 0] * phi + M[:, 0, 1] * psi)
    r2 = vv * psi - (M[:, 1, 0] * phi + M[:, 1, 1] * psi)
    res = np.hypot(np.abs(r1), np.abs(r2)) / (np.abs(phi) + np.abs(psi))
    return ReconstructedPair(ts, phi, psi, res)


# ---------------------------------------------------------------------------
# empirical classification


class Empirical(str, enum.Enum):
    VANISHING = "Vanishing"
    BOUNDED = "Bounded"
    UNBOUNDED = "Unbounded"
    AMBIGUOUS = "Ambiguous"


@dataclass(frozen=True)
class EmpiricalClass:
    kind: Empirical
    growth_rate: float
    note: str = ""


def empirical_classify(fm: FundamentalMatrix, cfg: CriterionConfig = DEFAULT) -> EmpiricalClass:
    """Growth class of ``m(t) = ||Phi(t)||_2`` from its tail behaviour.

    Unbounded when log m trends upward past the divergence threshold (or the
    run hit the growth cap), Vanishing when the tail falls below
    ``vanish_tol`` with a negative trend, Bounded when log m settles or
    oscillates inside ``[log vanish_tol, divergence]``.
    """
    ok = fm.valid
    ts, logm = fm.ts[ok], fm.log_norms()[ok]
    lam, tol = cfg.divergence, cfg.tol_trend
    if fm.status == "capped":
        rate = float(logm[-1] / max(ts[-1] - ts[0], 1e-300))
        return EmpiricalClass(Empirical.UNBOUNDED, rate, f"norm exceeded the growth cap before t={fm.t_stop:.6g}")
    est = estimate_limit(Trace(ts, logm, "log ||Phi||"), cfg)
    rate = est.slope
    log_vanish = float(np.log(cfg.vanish_tol))
    if est.slope > tol and est.tail_max > lam:
        return EmpiricalClass(Empirical.UNBOUNDED, rate, "log norm grows past the divergence threshold")
    if est.tail_max < log_vanish and (est.slope < -tol or est.tail_max < -lam):
        return EmpiricalClass(Empirical.VANISHING, rate, "norm decays below the vanishing tolerance")
    if est.kind in (LimitKind.FINITE, LimitKind.BOUNDED) and est.tail_min >= log_vanish and logm.max() <= lam:
        return EmpiricalClass(Empirical.BOUNDED, rate, "")
    return EmpiricalClass(Empirical.AMBIGUOUS, rate, f"tail trend {est.kind.value}, slope {rate:.3g}")


def empirical_for(sys: SystemSpec, grid: Grid, cfg: CriterionConfig = DEFAULT) -> tuple[EmpiricalClass, FundamentalMatrix]:
    """Integrate on the longest horizon of ``grid`` and classify."""
    longest = grid.horizons()[-1]
    fm = integrate_fundamental(sys, longest, cfg.rtol, cfg.atol, cfg.max_log_norm)
    return empirical_classify(fm, cfg), fm
