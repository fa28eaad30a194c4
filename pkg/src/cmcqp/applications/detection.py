"""Code design for optimum detection in colored interference.

With an MVDR receive filter the output SNR is proportional to
``y^H R^{-1} y`` where ``y = z * d`` combines the transmitted code ``z``
with the Doppler steering vector ``d``.  Because ``|d_n| = 1``, maximizing
over unimodular ``z`` is the case A2 maximization with ``A = R^{-1}``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core import Case, Direction, ProblemInstance, objective_case2, random_phases
from ..solvers import IterationTrace, SolverConfig, solve_case2


class SingularCovarianceError(ValueError):
    """Covariance matrix failed the positive-definiteness check."""


@dataclass(frozen=True, eq=False)
class DetectionScenario:
    r: np.ndarray
    d: np.ndarray
    doppler: float = 0.0

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=complex)
        d = np.asarray(self.d, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1] or d.shape != (r.shape[0],):
            raise ValueError("R must be N x N and d of length N")
        if np.linalg.norm(r - r.conj().T) > 1e-10 * max(np.linalg.norm(r), 1.0):
            raise ValueError("R must be Hermitian")
        if np.max(np.abs(np.abs(d) - 1.0)) > 1e-12:
            raise ValueError("steering vector must be unit modulus")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.r.shape[0]

    @functools.cached_property
    def r_inv(self) -> np.ndarray:
        """``R^{-1}`` from a Cholesky factor, symmetrized; computed once."""
        n = self.n
        floor = 1e-12 * float(np.real(np.trace(self.r))) / n
        try:
            chol = np.linalg.cholesky(self.r)
        except np.linalg.LinAlgError as exc:
            raise SingularCovarianceError("R is not positive definite") from exc
        if np.min(np.real(np.diag(chol)) ** 2) <= floor:
            raise SingularCovarianceError("R is numerically singular")
        linv = np.linalg.solve(chol, np.eye(n))
        rinv = linv.conj().T @ linv
        return 0.5 * (rinv + rinv.conj().T)


def build_detection_scenario(n: int, doppler: float, corr: float) -> DetectionScenario:
    """Exponentially correlated interference ``R[i, k] = corr**|i - k|``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < corr < 1.0:
        raise ValueError(f"corr must lie in (0, 1), got {corr}")
    idx = np.arange(n)
    r = corr ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    d = np.exp(2j * math.pi * doppler * idx)
    return DetectionScenario(r.astype(complex), d, doppler)


def mvdr_weights(scn: DetectionScenario, z: np.ndarray) -> np.ndarray:
    """``w = R^{-1} s / (s^H R^{-1} s)`` with ``s = z * d``."""
    s = np.asarray(z) * scn.d
    ris = scn.r_inv @ s
    return ris / np.vdot(s, ris)


def snr_db(scn: DetectionScenario, z: np.ndarray) -> float:
    y = np.asarray(z) * scn.d
    return 10.0 * math.log10(float(np.real(np.vdot(y, scn.r_inv @ y))))


def detection_instance(scn: DetectionScenario) -> ProblemInstance:
    return ProblemInstance(scn.r_inv, Case.A2, Direction.MAX)


def solve_detection(scn: DetectionScenario, cfg: Optional[SolverConfig] = None,
                    theta0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float, IterationTrace]:
    """Maximize the MVDR output SNR over unimodular codes.

    Returns ``(z, snr_db, trace)`` with ``z = y * conj(d)``.
    """
    cfg = cfg or SolverConfig(direction=Direction.MAX)
    if cfg.direction is not Direction.MAX:
        raise ValueError("detection design is a maximization problem")
    inst = detection_instance(scn)
    if theta0 is None:
        theta0 = random_phases(scn.n, cfg.seed)
    sol = solve_case2(inst, theta0, cfg)
    y = sol.x
    value = objective_case2(inst, y)
    return y * np.conj(scn.d), 10.0 * math.log10(value), sol.trace
