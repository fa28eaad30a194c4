"""Closed-form cubic step sizes and line-search baselines.

Along the ray ``theta + tau * rho * g`` the objective is expanded to third
order,

    Obj(rho) ~= tau*lam*rho**3 + mu*rho**2 + tau*upsilon*rho + Obj(0),

and the step is the positive stationary point of the cubic of the right
type (minimum for descent, maximum for ascent).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    Case,
    ProblemInstance,
    _check_dim,
    _require,
    common_s_case1,
    matvec,
    phases_to_vector,
    rmatvec,
)


@dataclass(frozen=True)
class StepCoeffs:
    lam: float
    mu: float
    upsilon: float
    obj: float

    def __post_init__(self) -> None:
        vals = (self.lam, self.mu, self.upsilon, self.obj)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite step coefficients {vals}")
        if self.upsilon < 0.0:
            raise ValueError(f"upsilon must be nonnegative, got {self.upsilon}")

    def model(self, rho, tau: int):
        """Cubic model of the objective along the ray."""
        return tau * self.lam * rho ** 3 + self.mu * rho ** 2 + tau * self.upsilon * rho + self.obj


class StepSource(str, enum.Enum):
    INIT = "Init"
    CUBIC_ROOT = "CubicRoot"
    QUADRATIC_FALLBACK = "QuadraticFallback"
    BACKUP = "Backup"
    FIXED = "Fixed"
    BACKTRACKING = "Backtracking"
    EXHAUSTIVE = "Exhaustive"
    POWER = "PowerMethod"


@dataclass(frozen=True)
class StepDecision:
    rho: float
    source: StepSource

    def __post_init__(self) -> None:
        if not self.rho > 0.0:
            raise ValueError(f"step size must be positive, got {self.rho}")


# --------------------------------------------------------------------------
# Taylor coefficients, shared-vector forms

def coeffs_case1(inst: ProblemInstance, x: np.ndarray, g: np.ndarray, *,
                 ax: Optional[np.ndarray] = None,
                 ahx: Optional[np.ndarray] = None) -> StepCoeffs:
    """Cubic coefficients for ``|x^H A x|**2`` along the phase direction ``g``.

    ``ax`` and ``ahx`` (``A x`` and ``A^H x``) may be passed in when the
    caller already has them from the gradient; two further products,
    ``A (g*x)`` and ``A^H (g*x)``, are always needed.
    """
    _require(inst, Case.A1)
    _check_dim(inst, x)
    if ax is None:
        ax = matvec(inst.a, x)
    if ahx is None:
        ahx = rmatvec(inst.a, x)
    f0 = np.vdot(x, ax)
    xc = np.conj(x)
    s = common_s_case1(x, ax, ahx)
    v = g * x
    av = matvec(inst.a, v)
    ahv = rmatvec(inst.a, v)
    t = np.conj(f0) * av * xc + f0 * ahv * xc
    g2 = g * g
    g3 = g2 * g
    # first-order change of f along g (up to a factor -1j)
    c = np.dot(ax * xc - np.conj(ahx) * x, g)
    # -2 * conj(second-order change of f)
    w = np.dot(ahx * xc + np.conj(ax) * x, g2) - 2.0 * np.dot(np.conj(av) * x, g)
    lam = np.imag(np.dot(t, g2) - np.dot(s, g3) / 3.0 - w * c)
    mu = np.real(np.dot(t, g) - np.dot(s, g2)) + abs(c) ** 2
    return StepCoeffs(float(lam), float(mu), float(np.dot(g, g)), float(abs(f0) ** 2))


def coeffs_case2(inst: ProblemInstance, x: np.ndarray, g: np.ndarray, *,
                 ax: Optional[np.ndarray] = None) -> StepCoeffs:
    """Cubic coefficients for ``x^H A x`` (Hermitian ``A``) along ``g``.

    One product ``A (g*x)`` beyond ``A x``.
    """
    _require(inst, Case.A2)
    _check_dim(inst, x)
    if ax is None:
        ax = matvec(inst.a, x)
    xc = np.conj(x)
    s = ax * xc
    t = matvec(inst.a, g * x) * xc
    g2 = g * g
    lam = np.imag(np.dot(t, g2) - np.dot(s, g2 * g) / 3.0)
    mu = np.real(np.dot(t, g) - np.dot(s, g2))
    return StepCoeffs(float(lam), float(mu), float(np.dot(g, g)), float(np.real(s.sum())))


def coeffs(inst: ProblemInstance, x: np.ndarray, g: np.ndarray) -> StepCoeffs:
    if inst.case is Case.A1:
        return coeffs_case1(inst, x, g)
    return coeffs_case2(inst, x, g)


# --------------------------------------------------------------------------
# Taylor coefficients, stacked real block forms (oracles)

def _block_matrices(a: np.ndarray):
    ar, ai = a.real, a.imag
    a_r = np.block([[ar, -ai], [ai, ar]])
    a_i = np.block([[ai, ar], [-ar, ai]])
    return a_r, a_i


def _stacked(theta: np.ndarray, g: np.ndarray):
    big_theta = np.concatenate([np.cos(theta), np.sin(theta)])
    gg = np.concatenate([g, g])
    return big_theta, gg


def block_taylor_terms(inst: ProblemInstance, theta: np.ndarray, g: np.ndarray):
    """Expansion ``f(rho) = eta + tau*ups*rho + mu*rho**2 + tau*lam*rho**3`` of ``x^H A x``.

    Returns the complex tuple ``(lam, mu, ups, eta)`` computed from the
    stacked trigonometric vector ``[cos(theta); sin(theta)]`` and the real
    block matrices.
    """
    theta = np.asarray(theta, dtype=float)
    _check_dim(inst, theta)
    a_r, a_i = _block_matrices(inst.a)
    b = a_r + 1j * a_i
    b_rot = a_i - 1j * a_r
    th, gg = _stacked(theta, g)
    p1 = gg * th
    p2 = gg ** 2 * th
    p3 = gg ** 3 * th
    lam = (0.5 * p2 @ b_rot @ p1 - 0.5 * p1 @ b_rot @ p2
           - p3 @ b_rot @ th / 6.0 + th @ b_rot @ p3 / 6.0)
    mu = p1 @ b @ p1 - 0.5 * p2 @ b @ th - 0.5 * th @ b @ p2
    ups = p1 @ b_rot @ th - th @ b_rot @ p1
    eta = th @ b @ th
    return complex(lam), complex(mu), complex(ups), complex(eta)


def coeffs_case1_blockform(inst: ProblemInstance, theta: np.ndarray, g: np.ndarray) -> StepCoeffs:
    """Case A1 coefficients by squaring the block-form expansion of ``f``."""
    _require(inst, Case.A1)
    lam_t, mu_t, ups_t, eta = block_taylor_terms(inst, theta, g)
    lam = 2.0 * (np.conj(eta) * lam_t + np.conj(mu_t) * ups_t).real
    mu = (2.0 * np.conj(eta) * mu_t + np.conj(ups_t) * ups_t).real
    ups = 2.0 * (np.conj(eta) * ups_t).real
    return StepCoeffs(float(lam), float(mu), float(ups), float(abs(eta) ** 2))


def coeffs_case2_blockform(inst: ProblemInstance, theta: np.ndarray, g: np.ndarray) -> StepCoeffs:
    """Case A2 coefficients using the antisymmetry of the imaginary block."""
    _require(inst, Case.A2)
    theta = np.asarray(theta, dtype=float)
    _check_dim(inst, theta)
    a_r, a_i = _block_matrices(inst.a)
    th, gg = _stacked(theta, g)
    p1 = gg * th
    p2 = gg ** 2 * th
    p3 = gg ** 3 * th
    lam = p2 @ a_i @ p1 - p3 @ a_i @ th / 3.0
    mu = p1 @ a_r @ p1 - p2 @ a_r @ th
    ups = 2.0 * p1 @ a_i @ th
    return StepCoeffs(float(lam), float(mu), float(ups), float(th @ a_r @ th))


def upsilon_case2_complex(inst: ProblemInstance, x: np.ndarray, g: np.ndarray) -> float:
    """``2 Im{(g*x)^H A x}``; equals ``g.g`` when ``g`` is the case A2 gradient."""
    return float(2.0 * np.imag(np.vdot(g * x, matvec(inst.a, x))))


# --------------------------------------------------------------------------
# step rules

def step_from_cubic(c: StepCoeffs, tau: int) -> Optional[StepDecision]:
    """Positive stationary point of the cubic model, or None if there is none.

    With ``|lam|`` negligible the model is quadratic and its vertex is used
    instead.  The returned point is always a minimum of the model for
    ``tau = -1`` and a maximum for ``tau = +1``.
    """
    lam, mu, ups = c.lam, c.mu, c.upsilon
    eps = 1e-14 * max(1.0, abs(mu), abs(ups))
    if abs(lam) > eps:
        disc = mu * mu - 3.0 * lam * ups
        if disc < 0.0:
            return None
        root = math.sqrt(disc)
        if tau * mu < 0.0:
            # same root via the product of roots; avoids cancellation
            rho = tau * ups / (-mu + tau * root)
        else:
            rho = (-mu - tau * root) / (3.0 * tau * lam)
        curvature = 6.0 * tau * lam * rho + 2.0 * mu
        if math.isfinite(rho) and rho > 0.0 and tau * curvature < 0.0:
            return StepDecision(rho, StepSource.CUBIC_ROOT)
        return None
    if mu == 0.0:
        return None
    rho = -tau * ups / (2.0 * mu)
    if math.isfinite(rho) and rho > 0.0 and tau * mu < 0.0:
        return StepDecision(rho, StepSource.QUADRATIC_FALLBACK)
    return None


def estimate_max_curvature(grad: Callable[[np.ndarray], np.ndarray], theta: np.ndarray, *,
                           sign: float = 1.0, h: float = 1e-5, iters: int = 20,
                           seed: int = 0) -> float:
    """Largest eigenvalue of ``sign * Hessian`` by power iteration.

    Hessian-vector products are central differences of ``grad``.  When the
    dominant eigenvalue is negative a second, shifted power iteration
    recovers the algebraically largest one.
    """
    theta = np.asarray(theta, dtype=float)
    rng = np.random.Generator(np.random.Philox(seed))

    def hvp(v):
        return sign * (grad(theta + h * v) - grad(theta - h * v)) / (2.0 * h)

    def power(op, v):
        v = v / np.linalg.norm(v)
        est = 0.0
        for _ in range(iters):
            w = op(v)
            est = float(v @ w)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0, v
            v = w / nw
        return est, v

    v0 = rng.standard_normal(theta.shape[0])
    est, v = power(hvp, v0)
    if est >= 0.0:
        return est
    shift = abs(est)
    shifted, _ = power(lambda u: hvp(u) + shift * u, v0)
    return shifted - shift


def backup_step(grad: Callable[[np.ndarray], np.ndarray], theta: np.ndarray,
                g: np.ndarray, tau: int, *, seed: int = 0,
                safety: float = 1.1) -> StepDecision:
    """Conservative ``2 / beta`` step, ``beta`` the top curvature of the minimized function.

    For ascent the minimized function is ``-Obj``.  If it has no positive
    curvature the step falls back to ``1e-3 / ||g||``.
    """
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        raise ValueError("backup step needs a nonzero gradient")
    beta = safety * estimate_max_curvature(grad, theta, sign=-float(tau), seed=seed)
    if beta <= 0.0 or not math.isfinite(beta):
        return StepDecision(1e-3 / gnorm, StepSource.BACKUP)
    return StepDecision(2.0 / beta, StepSource.BACKUP)


def backup_step_for(inst: ProblemInstance, theta: np.ndarray, g: np.ndarray, *,
                    seed: int = 0) -> StepDecision:
    """``backup_step`` for a quadratic-form instance in its own direction."""
    from .core import gradient

    return backup_step(lambda th: gradient(inst, phases_to_vector(th)), theta, g,
                       inst.tau, seed=seed)


# --------------------------------------------------------------------------
# line searches

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def exhaustive_line_search(evaluate: Callable[[float], float], tau: int,
                           rho_max: float, grid: int = 2000,
                           refine_iters: int = 30, vectorized: bool = False) -> float:
    """Best step on a uniform grid over ``(0, rho_max]``, golden-section refined.

    ``evaluate`` is the objective along the ray (any additive constant is
    irrelevant).  ``tau = -1`` minimizes, ``tau = +1`` maximizes.  With
    ``vectorized`` the whole grid is passed to ``evaluate`` in one call.
    """
    if not rho_max > 0.0:
        raise ValueError("rho_max must be positive")
    if grid < 3:
        raise ValueError("grid must hold at least 3 points")

    def loss(r):
        return -tau * evaluate(r)

    rhos = rho_max * np.arange(1, grid + 1) / grid
    if vectorized:
        vals = np.asarray(loss(rhos), dtype=float)
    else:
        vals = np.array([loss(r) for r in rhos])
    i = int(np.argmin(vals))
    lo = rhos[i - 1] if i > 0 else 0.0
    hi = rhos[i + 1] if i + 1 < grid else rho_max
    best_rho, best_val = float(rhos[i]), float(vals[i])

    a, b = lo, hi
    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    fc, fd = loss(c), loss(d)
    for _ in range(refine_iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = loss(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = loss(d)
    rho, val = (c, fc) if fc < fd else (d, fd)
    if val <= best_val and rho > 0.0:
        return float(rho)
    return best_rho


def backtracking_line_search(evaluate: Callable[[float], float], g: np.ndarray, tau: int,
                             alpha0: float = 1.0, shrink: float = 0.5, c1: float = 1e-4,
                             max_halvings: int = 50) -> tuple[float, bool]:
    """Armijo backtracking along ``tau * g``.

    Returns ``(alpha, satisfied)``; when no trial passes, ``alpha`` is
    ``alpha0 * shrink**max_halvings`` and ``satisfied`` is False.
    """
    if not alpha0 > 0.0 or not 0.0 < shrink < 1.0 or not 0.0 < c1 < 1.0:
        raise ValueError("need alpha0 > 0, 0 < shrink < 1 and 0 < c1 < 1")
    f0 = evaluate(0.0)
    slope = float(np.dot(g, g))
    alpha = alpha0
    for _ in range(max_halvings + 1):
        gain = tau * (evaluate(alpha) - f0)
        if gain >= c1 * alpha * slope:
            return alpha, True
        alpha *= shrink
    return alpha0 * shrink ** max_halvings, False
