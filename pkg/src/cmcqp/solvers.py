"""Phase-domain steepest descent/ascent solvers and comparison baselines.

All solvers share one engine that drives a small *model* object (objective,
cached gradient, cubic coefficients, ray evaluation).  The quadratic-form
models live here; the waveform model lives in ``applications.waveform``.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .core import (
    Case,
    Direction,
    ProblemInstance,
    _real_part_checked,
    matvec,
    matvec_count,
    phases_to_vector,
    random_phases,
    rmatvec,
    wrap_phases,
)
from .stepsize import (
    StepCoeffs,
    StepSource,
    backtracking_line_search,
    backup_step,
    coeffs_case1,
    coeffs_case2,
    exhaustive_line_search,
    step_from_cubic,
)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"


class Verdict(str, enum.Enum):
    ACCEPT = "Accept"
    TRIGGER_BACKUP = "TriggerBackup"


@dataclass(frozen=True)
class SolverConfig:
    direction: Direction = Direction.MIN
    tol: float = 1e-9
    max_iters: int = 100_000
    accelerate: bool = False
    seed: int = 0
    jitter: float = 1e-8
    # secondary stop on ||g||_2 <= grad_tol * max(1, |Obj|); None means tol
    grad_tol: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    @property
    def tau(self) -> int:
        return self.direction.tau


@dataclass
class IterationTrace:
    """Per-iteration record; row 0 is the starting point."""

    direction: Direction
    iters: List[int] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    step_size: List[float] = field(default_factory=list)
    step_source: List[str] = field(default_factory=list)
    grad_norm: List[float] = field(default_factory=list)
    elapsed_ns: List[int] = field(default_factory=list)
    matvecs: Optional[List[int]] = None
    status: Status = Status.MAX_ITERS
    map_evals: int = 0
    monotone_enforced: bool = True

    def append(self, obj: float, rho: float, source, gnorm: float, elapsed: int,
               matvecs: Optional[int] = None) -> None:
        self.iters.append(len(self.iters))
        self.objective.append(float(obj))
        self.step_size.append(float(rho))
        self.step_source.append(StepSource(source).value)
        self.grad_norm.append(float(gnorm))
        self.elapsed_ns.append(int(elapsed))
        if matvecs is not None:
            if self.matvecs is None:
                self.matvecs = []
            self.matvecs.append(int(matvecs))

    @property
    def n_iters(self) -> int:
        return max(len(self.iters) - 1, 0)

    @property
    def initial_objective(self) -> float:
        return self.objective[0]

    @property
    def final_objective(self) -> float:
        return self.objective[-1]

    @property
    def elapsed_s(self) -> float:
        return self.elapsed_ns[-1] * 1e-9 if self.elapsed_ns else 0.0

    def is_monotone(self, slack: float = 1e-12) -> bool:
        tau = self.direction.tau
        obj = self.objective
        return all(tau * (b - a) >= -slack * max(1.0, abs(a)) for a, b in zip(obj, obj[1:]))


class Solution(NamedTuple):
    theta: np.ndarray
    x: np.ndarray
    trace: IterationTrace


def monotonicity_guard(prev_obj: float, new_obj: float, direction: Direction) -> Verdict:
    """Reject a step that moved the objective the wrong way beyond round-off slack."""
    tau = Direction(direction).tau
    if tau * (new_obj - prev_obj) < -1e-12 * max(1.0, abs(prev_obj)):
        return Verdict.TRIGGER_BACKUP
    return Verdict.ACCEPT


# --------------------------------------------------------------------------
# models

class Probe:
    """Objective at a point plus whatever the model caches for reuse."""

    __slots__ = ("theta", "x", "obj", "cache", "_g")

    def __init__(self, theta, x, obj, cache):
        self.theta = theta
        self.x = x
        self.obj = obj
        self.cache = cache
        self._g = None


def _phase_delta(x: np.ndarray, dphi: np.ndarray) -> np.ndarray:
    # x * (exp(1j*dphi) - 1) without cancellation for small dphi
    return x * (2j * np.sin(0.5 * dphi) * np.exp(0.5j * dphi))


class QuadraticModel:
    """Model for a case A1 or A2 instance, reusing ``A x`` between steps."""

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self.n = inst.n
        self.a = inst.a
        self.case = inst.case

    def probe(self, theta: np.ndarray) -> Probe:
        x = phases_to_vector(theta)
        ax = matvec(self.a, x)
        if self.case is Case.A2:
            prod = np.conj(x) * ax
            obj = _real_part_checked(complex(prod.sum()), float(np.abs(prod).sum()))
            return Probe(theta, x, obj, (ax,))
        ahx = rmatvec(self.a, x)
        obj = abs(np.vdot(x, ax)) ** 2
        return Probe(theta, x, float(obj), (ax, ahx))

    def gradient(self, p: Probe) -> np.ndarray:
        if p._g is None:
            xc = np.conj(p.x)
            if self.case is Case.A2:
                p._g = 2.0 * np.imag(p.cache[0] * xc)
            else:
                ax, ahx = p.cache
                f = np.vdot(p.x, ax)
                p._g = 2.0 * np.imag((np.conj(f) * ax + f * ahx) * xc)
        return p._g

    def coeffs(self, p: Probe, g: np.ndarray) -> StepCoeffs:
        if self.case is Case.A2:
            return coeffs_case2(self.inst, p.x, g, ax=p.cache[0])
        return coeffs_case1(self.inst, p.x, g, ax=p.cache[0], ahx=p.cache[1])

    def grad_at(self, theta: np.ndarray) -> np.ndarray:
        return self.gradient(self.probe(theta))

    def ray(self, p: Probe, g: np.ndarray, tau: int) -> Callable:
        """``rho -> Obj(theta + tau*rho*g) - Obj(theta)``, evaluated stably.

        ``rho`` may be a scalar or a 1-D array of step sizes.
        """
        x, ax = p.x, p.cache[0]
        a = self.a
        f0 = None if self.case is Case.A2 else np.vdot(x, ax)
        ahx = None if self.case is Case.A2 else p.cache[1]

        def delta(rho):
            r = np.asarray(rho, dtype=float)
            d = _phase_delta(x[:, None], tau * np.atleast_1d(r)[None, :] * g[:, None])
            ad = matvec(a, d)
            if self.case is Case.A2:
                out = 2.0 * np.real(d.conj().T @ ax) + np.real(np.sum(np.conj(d) * ad, axis=0))
            else:
                df = d.conj().T @ ax + np.conj(ahx) @ d + np.sum(np.conj(d) * ad, axis=0)
                out = 2.0 * np.real(np.conj(f0) * df) + np.abs(df) ** 2
            return float(out[0]) if r.ndim == 0 else out
        return delta


# --------------------------------------------------------------------------
# engine

StepFn = Callable[[Probe, int], tuple]


def _proposed_step(model, cfg: SolverConfig) -> StepFn:
    """One full iteration: gradient, cubic step, guard, backup."""
    tau = cfg.tau

    def step(p: Probe, k: int):
        g = model.gradient(p)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            return p, 0.0, StepSource.BACKUP
        dec = step_from_cubic(model.coeffs(p, g), tau)
        if dec is not None:
            q = model.probe(p.theta + tau * dec.rho * g)
            if monotonicity_guard(p.obj, q.obj, cfg.direction) is Verdict.ACCEPT:
                return q, dec.rho, dec.source
        rho = backup_step(model.grad_at, p.theta, g, tau, seed=cfg.seed + k).rho
        for _ in range(60):
            q = model.probe(p.theta + tau * rho * g)
            if monotonicity_guard(p.obj, q.obj, cfg.direction) is Verdict.ACCEPT:
                return q, rho, StepSource.BACKUP
            rho *= 0.5
        # no improving step at any scale: treat as stationary
        return p, 0.0, StepSource.BACKUP

    return step


def squarem_accelerate(step: Callable[[np.ndarray], np.ndarray],
                       evaluate: Callable[[np.ndarray], float],
                       theta: np.ndarray, direction: Direction) -> np.ndarray:
    """Squared extrapolation around a monotone fixed-point map ``step``.

    Falls back to ``step(step(theta))`` whenever the extrapolated point,
    after one more map application, is not at least as good.
    """
    tau = Direction(direction).tau
    t1 = step(theta)
    t2 = step(t1)
    r = t1 - theta
    v = t2 - 2.0 * t1 + theta
    nv = np.linalg.norm(v)
    if nv < 1e-30:
        return t2
    alpha = min(-np.linalg.norm(r) / nv, -1.0)
    cand = step(theta - 2.0 * alpha * r + alpha * alpha * v)
    if tau * (evaluate(cand) - evaluate(t2)) >= 0.0:
        return cand
    return t2


def _squarem_probe(model, step: StepFn, p0: Probe, k: int, tau: int, trace: IterationTrace):
    """SQUAREM on probes (keeps cached products); returns probe, rho, source."""
    p1, rho1, src1 = step(p0, k)
    p2, rho2, src2 = step(p1, k)
    trace.map_evals += 2
    if rho1 == 0.0 or rho2 == 0.0:
        return p2, rho2, src2
    r = p1.theta - p0.theta
    v = p2.theta - 2.0 * p1.theta + p0.theta
    nv = np.linalg.norm(v)
    if nv < 1e-30:
        return p2, rho2, src2
    alpha = min(-np.linalg.norm(r) / nv, -1.0)
    pe = model.probe(p0.theta - 2.0 * alpha * r + alpha * alpha * v)
    p3, rho3, src3 = step(pe, k)
    trace.map_evals += 1
    if tau * (p3.obj - p2.obj) >= 0.0:
        return p3, rho3, src3
    return p2, rho2, src2


def run_engine(model, theta0: np.ndarray, cfg: SolverConfig, step: StepFn, *,
               monotone_enforced: bool = True) -> tuple:
    """Iterate ``step`` from ``theta0`` until the stopping rules fire.

    Returns ``(final probe, trace)``.
    """
    t_start = time.perf_counter_ns()
    theta = np.array(theta0, dtype=float, copy=True)
    if theta.ndim != 1 or theta.shape[0] != model.n:
        raise ValueError(f"theta0 must have length {model.n}")
    trace = IterationTrace(cfg.direction, monotone_enforced=monotone_enforced)
    mv0 = matvec_count()
    p = model.probe(theta)
    g = model.gradient(p)
    if np.linalg.norm(g) < 1e-14 * model.n:
        rng = np.random.Generator(np.random.Philox(cfg.seed ^ 0x5EED))
        pj = model.probe(theta + rng.uniform(-cfg.jitter, cfg.jitter, size=model.n))
        # keep the jittered start only if it actually escapes the stationary point
        if np.linalg.norm(model.gradient(pj)) >= 1e-14 * model.n:
            p = pj
            g = model.gradient(p)
    gnorm = float(np.linalg.norm(g))

    def mv_delta():
        nonlocal mv0
        now = matvec_count()
        if now is None:
            return None
        d, mv0 = now - mv0, now
        return d

    trace.append(p.obj, 0.0, StepSource.INIT, gnorm, time.perf_counter_ns() - t_start, mv_delta())
    if gnorm < 1e-14 * model.n:
        trace.status = Status.CONVERGED
        return p, trace

    obj0 = abs(p.obj) if p.obj != 0.0 else 1.0
    grad_tol = cfg.tol if cfg.grad_tol is None else cfg.grad_tol
    tau = cfg.tau
    for k in range(1, cfg.max_iters + 1):
        if cfg.accelerate:
            q, rho, src = _squarem_probe(model, step, p, k, tau, trace)
        else:
            q, rho, src = step(p, k)
            trace.map_evals += 1
        gq = float(np.linalg.norm(model.gradient(q)))
        trace.append(q.obj, rho, src, gq, time.perf_counter_ns() - t_start, mv_delta())
        change = abs(q.obj - p.obj) / obj0
        p = q
        if rho == 0.0 or change < cfg.tol or gq <= grad_tol * max(1.0, abs(q.obj)):
            trace.status = Status.CONVERGED
            break
    return p, trace


def _finish(p: Probe, trace: IterationTrace) -> Solution:
    return Solution(wrap_phases(p.theta), p.x, trace)


def _check_case(inst: ProblemInstance, case: Case) -> None:
    if inst.case is not case:
        raise ValueError(f"expected a case {case.name} instance, got {inst.case.name}")


def solve(inst: ProblemInstance, theta0: Optional[np.ndarray] = None,
          cfg: Optional[SolverConfig] = None) -> Solution:
    """Proposed solver for either case; direction taken from ``cfg``."""
    cfg = cfg or SolverConfig(direction=inst.direction)
    if theta0 is None:
        theta0 = random_phases(inst.n, cfg.seed)
    model = QuadraticModel(inst)
    p, trace = run_engine(model, theta0, cfg, _proposed_step(model, cfg))
    return _finish(p, trace)


def solve_case1(inst: ProblemInstance, theta0: Optional[np.ndarray] = None,
                cfg: Optional[SolverConfig] = None) -> Solution:
    """Steepest descent/ascent with cubic steps on ``|x^H A x|**2``."""
    _check_case(inst, Case.A1)
    return solve(inst, theta0, cfg)


def solve_case2(inst: ProblemInstance, theta0: Optional[np.ndarray] = None,
                cfg: Optional[SolverConfig] = None) -> Solution:
    """Steepest descent/ascent with cubic steps on ``x^H A x``, Hermitian PSD ``A``."""
    _check_case(inst, Case.A2)
    return solve(inst, theta0, cfg)


# --------------------------------------------------------------------------
# baselines

def fixed_step_baseline(inst: ProblemInstance, theta0: np.ndarray, cfg: SolverConfig,
                        rho_fixed: float) -> Solution:
    """Plain gradient steps of constant size; no monotonicity safeguard."""
    if rho_fixed < 0.0:
        raise ValueError("rho_fixed must be nonnegative")
    model = QuadraticModel(inst)
    tau = cfg.tau

    def step(p: Probe, k: int):
        if rho_fixed == 0.0:
            return p, 0.0, StepSource.FIXED
        return model.probe(p.theta + tau * rho_fixed * model.gradient(p)), rho_fixed, StepSource.FIXED

    p, trace = run_engine(model, theta0, cfg, step, monotone_enforced=False)
    return _finish(p, trace)


def line_search_baseline(inst: ProblemInstance, theta0: np.ndarray, cfg: SolverConfig,
                         method: str = "backtracking") -> Solution:
    """Gradient steps sized by Armijo backtracking or exhaustive search."""
    model = QuadraticModel(inst)
    tau = cfg.tau
    if method not in ("backtracking", "exhaustive"):
        raise ValueError(f"unknown line search {method!r}")

    def step(p: Probe, k: int):
        g = model.gradient(p)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            return p, 0.0, StepSource.BACKTRACKING
        ray = model.ray(p, g, tau)
        if method == "exhaustive":
            rho = exhaustive_line_search(ray, tau, 10.0 / gnorm, vectorized=True)
            src = StepSource.EXHAUSTIVE
        else:
            rho, _ = backtracking_line_search(ray, g, tau)
            src = StepSource.BACKTRACKING
        q = model.probe(p.theta + tau * rho * g)
        if monotonicity_guard(p.obj, q.obj, cfg.direction) is Verdict.TRIGGER_BACKUP:
            return p, 0.0, src
        return q, rho, src

    p, trace = run_engine(model, theta0, cfg, step)
    return _finish(p, trace)


def pml_baseline(inst: ProblemInstance, theta0: np.ndarray, cfg: SolverConfig) -> Solution:
    """Power-method-like iteration ``x <- exp(1j*arg(B x))`` with PSD ``B``.

    ``B = A + sigma I`` for maximization and ``B = (lambda_max + eps) I - A``
    for minimization, so that both become maximizations of a PSD form.
    """
    _check_case(inst, Case.A2)
    t_start = time.perf_counter_ns()
    n = inst.n
    eig = np.linalg.eigvalsh(inst.a)
    eps = 1e-9 * max(1.0, abs(eig[-1]))
    if cfg.direction is Direction.MAX:
        sigma = max(0.0, -eig[0]) + eps
        b = inst.a + sigma * np.eye(n)
        # Obj = x^H B x - sigma N
        to_obj = lambda q: q - sigma * n
    else:
        sigma = eig[-1] + eps
        b = sigma * np.eye(n) - inst.a
        to_obj = lambda q: sigma * n - q
    trace = IterationTrace(cfg.direction)
    mv0 = matvec_count()
    theta = np.array(theta0, dtype=float, copy=True)
    x = phases_to_vector(theta)
    bx = matvec(b, x)
    obj = to_obj(float(np.real(np.vdot(x, bx))))
    gnorm = float(np.linalg.norm(2.0 * np.imag(-bx * np.conj(x))))

    def mv_delta():
        nonlocal mv0
        now = matvec_count()
        if now is None:
            return None
        d, mv0 = now - mv0, now
        return d

    trace.append(obj, 0.0, StepSource.POWER, gnorm, time.perf_counter_ns() - t_start, mv_delta())
    obj0 = abs(obj) if obj != 0.0 else 1.0
    for _ in range(cfg.max_iters):
        theta = np.angle(bx)
        x = phases_to_vector(theta)
        bx = matvec(b, x)
        new = to_obj(float(np.real(np.vdot(x, bx))))
        gnorm = float(np.linalg.norm(2.0 * np.imag(bx * np.conj(x))))
        trace.map_evals += 1
        trace.append(new, 0.0, StepSource.POWER, gnorm, time.perf_counter_ns() - t_start, mv_delta())
        change = abs(new - obj) / obj0
        obj = new
        if change < cfg.tol:
            trace.status = Status.CONVERGED
            break
    return Solution(wrap_phases(theta), x, trace)
