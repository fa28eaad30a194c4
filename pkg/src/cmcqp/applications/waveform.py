"""Multi-waveform design by weighted integrated sidelobe level (WISL) minimization.

The WISL of a set of ``M`` unimodular waveforms of length ``P`` is

    sum_{m', m} sum_p w_p |r_{m'm}(p)|**2,   r_{m'm}(p) = y_{m'}^H J_p y_m,

with ``w_p = gamma_p**2``.  Each term is a case A1 quadratic form in the
stacked vector ``y = vec(Y)``, so the phase-domain machinery applies.  The
solve path works on correlations directly and never builds the ``MP x MP``
piece matrices; the materialized versions are kept as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from ..core import Direction, phases_to_vector, random_phases, wrap_phases
from ..solvers import IterationTrace, Probe, SolverConfig, _phase_delta, _proposed_step, run_engine
from ..stepsize import StepCoeffs

FFT_MIN_LENGTH = 32


@dataclass(frozen=True)
class WaveformSet:
    """``P x M`` unimodular waveform matrix plus lag weights ``gamma_p``.

    ``weights[p + P - 1]`` is ``gamma_p`` for ``p = -P+1 .. P-1``.
    """

    y_matrix: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.y_matrix, dtype=complex)
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise ValueError(f"waveform matrix must be P x M, got shape {y.shape}")
        if np.max(np.abs(np.abs(y) - 1.0)) > 1e-12:
            raise ValueError("waveform entries must be unit modulus")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (2 * y.shape[0] - 1,):
            raise ValueError(f"expected {2 * y.shape[0] - 1} lag weights, got shape {w.shape}")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("lag weights must be finite and nonnegative")
        object.__setattr__(self, "y_matrix", y)
        object.__setattr__(self, "weights", w)

    @property
    def length(self) -> int:
        return self.y_matrix.shape[0]

    @property
    def count(self) -> int:
        return self.y_matrix.shape[1]

    @property
    def theta(self) -> np.ndarray:
        """Phases of ``vec(Y)`` (column stacking), wrapped to ``[0, 2 pi)``."""
        return wrap_phases(np.angle(self.vec()))

    def vec(self) -> np.ndarray:
        return self.y_matrix.reshape(-1, order="F")

    @classmethod
    def from_phases(cls, theta: np.ndarray, length: int, weights: np.ndarray) -> "WaveformSet":
        return cls(unstack(phases_to_vector(theta), length), weights)

    @classmethod
    def random(cls, length: int, count: int, weights: np.ndarray, seed: int = 0) -> "WaveformSet":
        return cls.from_phases(random_phases(length * count, seed), length, weights)


def unstack(y: np.ndarray, length: int) -> np.ndarray:
    """Recover the ``P x M`` matrix from ``vec(Y)``."""
    y = np.asarray(y)
    if y.size % length:
        raise ValueError(f"vector of size {y.size} does not split into columns of {length}")
    return y.reshape(length, -1, order="F")


def lag_weights(length: int, lags: int) -> np.ndarray:
    """``gamma_p = 1`` for ``0 < |p| <= lags``, else 0."""
    if not 0 <= lags <= length - 1:
        raise ValueError(f"lags must lie in [0, {length - 1}]")
    p = np.arange(-length + 1, length)
    return ((p != 0) & (np.abs(p) <= lags)).astype(float)


def build_shift_matrix(length: int, p: int) -> np.ndarray:
    """``J_p``: ones on the ``p``-th super-diagonal (sub-diagonal for ``p < 0``)."""
    if abs(p) >= length:
        raise ValueError(f"|p| must be below {length}, got {p}")
    return np.eye(length, k=p)


# --------------------------------------------------------------------------
# correlations; rows of the (M, P) arrays below are waveforms

def _fft_len(n: int) -> int:
    return 1 << max(int(n - 1).bit_length(), 0)


def _use_fft(length: int, method: str) -> bool:
    if method == "auto":
        return length >= FFT_MIN_LENGTH
    if method not in ("fft", "naive"):
        raise ValueError(f"unknown method {method!r}")
    return method == "fft"


def correlations(a: np.ndarray, b: np.ndarray, method: str = "auto") -> np.ndarray:
    """``r[m', m, p + P - 1] = sum_i conj(a[m', i]) b[m, i + p]``."""
    m, n = a.shape
    if _use_fft(n, method):
        size = _fft_len(2 * n - 1)
        fa = np.fft.fft(a, size)
        fb = np.fft.fft(b, size)
        full = np.fft.ifft(np.conj(fa)[:, None, :] * fb[None, :, :], axis=-1)
        idx = np.r_[size - n + 1:size, 0:n]
        return full[:, :, idx]
    out = np.empty((m, b.shape[0], 2 * n - 1), dtype=complex)
    ac = np.conj(a)
    for p in range(-n + 1, n):
        lo, hi = max(0, -p), min(n, n - p)
        out[:, :, p + n - 1] = ac[:, lo:hi] @ b[:, lo + p:hi + p].T
    return out


def _lag_sum(kernel: np.ndarray, u: np.ndarray, method: str = "auto") -> np.ndarray:
    """``s[n, i] = sum_m sum_p kernel[n, m, p + P - 1] u[m, i + p]``."""
    m, n = u.shape
    if _use_fft(n, method):
        size = _fft_len(3 * n - 2)
        fk = np.fft.fft(kernel[:, :, ::-1], size, axis=-1)
        fu = np.fft.fft(u, size, axis=-1)
        conv = np.fft.ifft(np.einsum("abk,bk->ak", fk, fu), axis=-1)
        return conv[:, n - 1:2 * n - 1]
    s = np.zeros((kernel.shape[0], n), dtype=complex)
    for p in range(-n + 1, n):
        lo, hi = max(0, -p), min(n, n - p)
        s[:, lo:hi] += kernel[:, :, p + n - 1] @ u[:, lo + p:hi + p]
    return s


def _self_mask(count: int, length: int) -> np.ndarray:
    """Zero at the constant (m' = m, p = 0) pieces, one elsewhere."""
    mask = np.ones((count, count, 2 * length - 1))
    mask[np.arange(count), np.arange(count), length - 1] = 0.0
    return mask


def _rows(theta: np.ndarray, length: int) -> np.ndarray:
    return phases_to_vector(theta).reshape(-1, length)


# --------------------------------------------------------------------------
# model used by the generic engine

class WislModel:
    """WISL objective in operator form for the phase-domain engine."""

    def __init__(self, length: int, count: int, weights: np.ndarray, *,
                 include_self: bool = True, method: str = "auto"):
        self.length = length
        self.count = count
        self.n = length * count
        self.w = np.asarray(weights, dtype=float) ** 2
        self.include_self = include_self
        self.method = method
        self.mask = _self_mask(count, length)
        # kernel weight w_p + w_{-p}, self pieces removed
        self.wsym = (self.w + self.w[::-1])[None, None, :] * self.mask

    def _obj(self, r: np.ndarray) -> float:
        terms = np.abs(r) ** 2 * self.w
        if not self.include_self:
            terms = terms * self.mask
        return float(terms.sum())

    def probe(self, theta: np.ndarray) -> Probe:
        y = _rows(theta, self.length)
        r = correlations(y, y, self.method)
        return Probe(theta, y, self._obj(r), (r,))

    def _kernel(self, p: Probe) -> np.ndarray:
        return self.wsym * np.conj(p.cache[0])

    def gradient(self, p: Probe) -> np.ndarray:
        if p._g is None:
            s = _lag_sum(self._kernel(p), p.x, self.method) * np.conj(p.x)
            p._g = 2.0 * np.imag(s).reshape(-1)
        return p._g

    def grad_at(self, theta: np.ndarray) -> np.ndarray:
        return self.gradient(self.probe(theta))

    def coeffs(self, p: Probe, g: np.ndarray) -> StepCoeffs:
        y = p.x
        gm = g.reshape(y.shape)
        kern = self._kernel(p)
        yc = np.conj(y)
        s = _lag_sum(kern, y, self.method) * yc
        v = gm * y
        t = _lag_sum(kern, v, self.method) * yc
        q = gm * v
        c = correlations(v, y, self.method) - correlations(y, v, self.method)
        f2 = correlations(v, v, self.method) - 0.5 * (
            correlations(q, y, self.method) + correlations(y, q, self.method))
        wm = self.w * self.mask
        g2, g3 = gm ** 2, gm ** 3
        lam = np.imag(np.sum(t * g2) - np.sum(s * g3) / 3.0) + np.sum(wm * 2.0 * np.imag(np.conj(f2) * c))
        mu = np.real(np.sum(t * gm) - np.sum(s * g2)) + np.sum(wm * np.abs(c) ** 2)
        return StepCoeffs(float(lam), float(mu), float(g @ g), p.obj)

    def ray(self, p: Probe, g: np.ndarray, tau: int):
        y, r = p.x, p.cache[0]
        gm = g.reshape(y.shape)
        wm = self.w * self.mask

        def delta(rho):
            d = _phase_delta(y, tau * rho * gm)
            dr = (correlations(d, y, self.method) + correlations(y, d, self.method)
                  + correlations(d, d, self.method))
            return float(np.sum(wm * (2.0 * np.real(np.conj(r) * dr) + np.abs(dr) ** 2)))
        return delta


def _model(ws: WaveformSet, include_self: bool = True, method: str = "auto") -> WislModel:
    return WislModel(ws.length, ws.count, ws.weights, include_self=include_self, method=method)


def _probe(ws: WaveformSet, method: str = "auto", include_self: bool = True):
    model = _model(ws, include_self, method)
    return model, model.probe(np.angle(ws.vec()))


def wisl_objective(ws: WaveformSet, *, include_self: bool = True, method: str = "auto") -> float:
    """Weighted sum of squared auto- and cross-correlation magnitudes.

    ``method`` selects the correlation path: ``"naive"`` (explicit shifts),
    ``"fft"`` or ``"auto"`` (FFT for ``P >= 32``).
    """
    return _probe(ws, method, include_self)[1].obj


def wisl_gradient(ws: WaveformSet, *, method: str = "auto") -> np.ndarray:
    """Phase gradient of the WISL with respect to ``vec(Y)``."""
    model, p = _probe(ws, method)
    return model.gradient(p).copy()


def wisl_coeffs(ws: WaveformSet, g: Optional[np.ndarray] = None, *, method: str = "auto") -> StepCoeffs:
    """Cubic coefficients of the WISL along ``theta - rho * g``."""
    model, p = _probe(ws, method)
    if g is None:
        g = model.gradient(p)
    return model.coeffs(p, np.asarray(g, dtype=float))


# --------------------------------------------------------------------------
# materialized oracles

def iter_pieces(ws: WaveformSet) -> Iterator[Tuple[int, int, int, np.ndarray]]:
    """Yield ``(m', m, p, gamma_p * E_{m'm} kron J_p)`` for every nonzero weight."""
    n, m = ws.length, ws.count
    for mp in range(m):
        for mm in range(m):
            for p in range(-n + 1, n):
                gamma = ws.weights[p + n - 1]
                if gamma == 0.0:
                    continue
                e = np.zeros((m, m))
                e[mp, mm] = 1.0
                yield mp, mm, p, gamma * np.kron(e, build_shift_matrix(n, p))


def wisl_objective_materialized(ws: WaveformSet, include_self: bool = True) -> float:
    y = ws.vec()
    total = 0.0
    for mp, mm, p, a in iter_pieces(ws):
        if not include_self and mp == mm and p == 0:
            continue
        total += abs(np.vdot(y, a @ y)) ** 2
    return total


def wisl_gradient_materialized(ws: WaveformSet) -> np.ndarray:
    """Sum of per-piece ``2 Im{(conj(f) A y + f A^H y) * conj(y)}``."""
    y = ws.vec()
    g = np.zeros(y.size)
    for _, _, _, a in iter_pieces(ws):
        f = np.vdot(y, a @ y)
        g += 2.0 * np.imag((np.conj(f) * (a @ y) + f * (a.conj().T @ y)) * np.conj(y))
    return g


# --------------------------------------------------------------------------

def solve_wisl(ws0: WaveformSet, cfg: Optional[SolverConfig] = None, *,
               method: str = "auto") -> Tuple[WaveformSet, IterationTrace]:
    """Minimize the WISL from ``ws0`` with cubic-step steepest descent."""
    cfg = cfg or SolverConfig(direction=Direction.MIN)
    if cfg.direction is not Direction.MIN:
        raise ValueError("WISL design is a minimization problem")
    model = _model(ws0, method=method)
    p, trace = run_engine(model, np.angle(ws0.vec()), cfg, _proposed_step(model, cfg))
    if trace.n_iters == 0:
        return ws0, trace
    return WaveformSet(unstack(phases_to_vector(p.theta), ws0.length), ws0.weights), trace


__all__ = [
    "WaveformSet", "WislModel", "build_shift_matrix", "correlations", "iter_pieces",
    "lag_weights", "solve_wisl", "unstack", "wisl_coeffs", "wisl_gradient",
    "wisl_gradient_materialized", "wisl_objective", "wisl_objective_materialized",
]
