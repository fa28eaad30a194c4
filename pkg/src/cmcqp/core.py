"""Problem instances, objectives and phase-domain gradients.

The optimization variable is a real phase vector ``theta``; the unit-modulus
vector is ``x = exp(1j * theta)``.  Two problem classes are supported:

* Case A1: arbitrary complex ``A``, objective ``|x^H A x|**2``.
* Case A2: Hermitian PSD ``A``, objective ``x^H A x`` (real, nonnegative).

Both trigonometric (real/imaginary split) and complex closed forms of the
gradient are provided; the former exist mainly as independent oracles.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Union

import numpy as np

TWO_PI = 2.0 * math.pi


class Case(str, enum.Enum):
    A1 = "a1"
    A2 = "a2"


class Direction(str, enum.Enum):
    MIN = "min"
    MAX = "max"

    @property
    def tau(self) -> int:
        """Sign of the phase update: -1 for descent, +1 for ascent."""
        return -1 if self is Direction.MIN else 1


class InstanceError(ValueError):
    """Matrix does not satisfy the structural requirements of its case."""


class MatrixFileError(ValueError):
    """Malformed or non-finite complex matrix file."""


# --------------------------------------------------------------------------
# mat-vec accounting

class MatVecCounter:
    """Tally of dense matrix-vector products performed inside a context."""

    def __init__(self) -> None:
        self.total = 0

    def __repr__(self) -> str:
        return f"MatVecCounter(total={self.total})"


_COUNTER: contextvars.ContextVar[MatVecCounter | None] = contextvars.ContextVar(
    "cmcqp_matvec_counter", default=None)


@contextlib.contextmanager
def count_matvecs() -> Iterator[MatVecCounter]:
    """Count every ``A @ v`` and ``A^H @ v`` issued by this package.

    >>> with count_matvecs() as c:
    ...     _ = matvec(np.eye(2), np.ones(2))
    >>> c.total
    1
    """
    counter = MatVecCounter()
    token = _COUNTER.set(counter)
    try:
        yield counter
    finally:
        _COUNTER.reset(token)


def matvec_count() -> int | None:
    """Current tally, or None when no counting context is active."""
    c = _COUNTER.get()
    return None if c is None else c.total


def _tally() -> None:
    c = _COUNTER.get()
    if c is not None:
        c.total += 1


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    _tally()
    return a @ v


def rmatvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``A^H v`` without forming ``A^H``."""
    _tally()
    return np.conj(np.conj(v) @ a)


# --------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class ProblemInstance:
    """Matrix ``A`` tagged with its case and optimization direction.

    Case A2 matrices are validated as Hermitian PSD at construction.
    """

    a: np.ndarray
    case: Case = Case.A1
    direction: Direction = Direction.MIN
    hermitian: bool = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InstanceError(f"A must be a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InstanceError("A contains NaN or Inf")
        case = Case(self.case)
        object.__setattr__(self, "case", case)
        object.__setattr__(self, "direction", Direction(self.direction))
        if case is Case.A2:
            _validate_hermitian_psd(a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "hermitian", case is Case.A2)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def tau(self) -> int:
        return self.direction.tau

    def with_direction(self, direction: Direction | str) -> "ProblemInstance":
        return ProblemInstance(self.a, self.case, Direction(direction))


def _validate_hermitian_psd(a: np.ndarray) -> None:
    fro = np.linalg.norm(a)
    if fro == 0.0:
        return
    asym = np.linalg.norm(a - a.conj().T) / fro
    if asym > 1e-10:
        raise InstanceError(f"case A2 requires Hermitian A (relative asymmetry {asym:.3e})")
    eig = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    spec = max(abs(eig[0]), abs(eig[-1]))
    if eig[0] < -1e-8 * spec:
        raise InstanceError(f"case A2 requires PSD A (smallest eigenvalue {eig[0]:.3e})")


def _check_dim(inst: ProblemInstance, v: np.ndarray) -> None:
    if v.ndim != 1 or v.shape[0] != inst.n:
        raise ValueError(f"dimension mismatch: A is {inst.n}x{inst.n}, vector has shape {v.shape}")


def _require(inst: ProblemInstance, case: Case) -> None:
    if inst.case is not case:
        raise ValueError(f"expected a case {case.name} instance, got {inst.case.name}")


# --------------------------------------------------------------------------
# phases

def phases_to_vector(theta: np.ndarray) -> np.ndarray:
    """Map phases to the unit-modulus vector ``cos(theta) + 1j*sin(theta)``."""
    theta = np.asarray(theta, dtype=float)
    return np.cos(theta) + 1j * np.sin(theta)


def wrap_phases(theta: np.ndarray) -> np.ndarray:
    """Canonicalize phases into ``[0, 2*pi)``. Never changes ``exp(1j*theta)``."""
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def random_phases(n: int, seed: int) -> np.ndarray:
    """I.i.d. uniform phases on ``[0, 2*pi)`` from a Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.uniform(0.0, TWO_PI, size=n)


# --------------------------------------------------------------------------
# objectives

def quadratic_form(inst: ProblemInstance, x: np.ndarray) -> complex:
    """``x^H A x`` as a complex scalar."""
    _check_dim(inst, x)
    return complex(np.vdot(x, matvec(inst.a, x)))


def objective_case1(inst: ProblemInstance, x: np.ndarray) -> float:
    """``|x^H A x|**2``."""
    _require(inst, Case.A1)
    return abs(quadratic_form(inst, x)) ** 2


def _real_part_checked(f: complex, scale: float) -> float:
    # scale is sum |x_n^* (Ax)_n|, the floating-point magnitude of the sum
    if abs(f.imag) > 1e-10 * max(abs(f.real), scale):
        raise InstanceError(
            f"x^H A x has imaginary residue {f.imag:.3e}; A is not Hermitian")
    return f.real


def objective_case2(inst: ProblemInstance, x: np.ndarray) -> float:
    """``x^H A x`` for Hermitian PSD ``A`` (imaginary residue checked, then dropped)."""
    _require(inst, Case.A2)
    _check_dim(inst, x)
    prod = np.conj(x) * matvec(inst.a, x)
    return _real_part_checked(complex(prod.sum()), float(np.abs(prod).sum()))


def objective(inst: ProblemInstance, x: np.ndarray) -> float:
    if inst.case is Case.A1:
        return objective_case1(inst, x)
    return objective_case2(inst, x)


# --------------------------------------------------------------------------
# gradients

def gradient_case1(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Phase gradient of ``|x^H A x|**2``: ``2 Im{(conj(f) A x + f A^H x) * conj(x)}``."""
    _require(inst, Case.A1)
    _check_dim(inst, x)
    ax = matvec(inst.a, x)
    ahx = rmatvec(inst.a, x)
    return 2.0 * np.imag(common_s_case1(x, ax, ahx))


def common_s_case1(x: np.ndarray, ax: np.ndarray, ahx: np.ndarray) -> np.ndarray:
    """Shared vector ``conj(f) (Ax)*conj(x) + f (A^H x)*conj(x)``, ``f = x^H A x``."""
    f = np.vdot(x, ax)
    xc = np.conj(x)
    return np.conj(f) * ax * xc + f * ahx * xc


def gradient_case2(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Phase gradient of ``x^H A x``: ``2 Im{(A x) * conj(x)}``."""
    _require(inst, Case.A2)
    _check_dim(inst, x)
    return 2.0 * np.imag(matvec(inst.a, x) * np.conj(x))


def gradient(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    if inst.case is Case.A1:
        return gradient_case1(inst, x)
    return gradient_case2(inst, x)


def _trig_parts(inst: ProblemInstance, theta: np.ndarray):
    theta = np.asarray(theta, dtype=float)
    _check_dim(inst, theta)
    return np.cos(theta), np.sin(theta), inst.a.real, inst.a.imag


def gradient_case1_trig(inst: ProblemInstance, theta: np.ndarray) -> np.ndarray:
    """Case A1 gradient assembled from the real/imaginary split of ``f``.

    ``2 Re{f} grad Re{f} + 2 Im{f} grad Im{f}`` with every term written as
    real matrices acting on ``cos(theta)`` and ``sin(theta)``.
    """
    _require(inst, Case.A1)
    c, s, ar, ai = _trig_parts(inst, theta)
    re_f = c @ ar @ c - c @ ai @ s + s @ ai @ c + s @ ar @ s
    im_f = c @ ai @ c + c @ ar @ s - s @ ar @ c + s @ ai @ s
    ai_m, ai_p = ai - ai.T, ai + ai.T
    ar_m, ar_p = ar - ar.T, ar + ar.T
    grad_re = (ai_m @ c) * c + (ar_p @ s) * c - (ar_p @ c) * s + (ai_m @ s) * s
    grad_im = (ai_p @ s) * c - (ar_m @ c) * c - (ar_m @ s) * s - (ai_p @ c) * s
    return 2.0 * re_f * grad_re + 2.0 * im_f * grad_im


def gradient_case2_trig(inst: ProblemInstance, theta: np.ndarray) -> np.ndarray:
    """Case A2 gradient in separated real/imaginary form."""
    _require(inst, Case.A2)
    c, s, ar, ai = _trig_parts(inst, theta)
    return 2.0 * (ai @ c + ar @ s) * c + 2.0 * (ai @ s - ar @ c) * s


# --------------------------------------------------------------------------
# complex matrix text format

def save_complex_matrix(path: Union[str, Path], a: np.ndarray) -> None:
    """Write ``N M`` then one ``re im`` line per entry, row-major, full precision."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(f"{float(v.real)!r} {float(v.imag)!r}" for v in a.ravel(order="C"))
    Path(path).write_text("\n".join(lines) + "\n")


def load_complex_matrix(path: Union[str, Path]) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MatrixFileError(f"cannot read {path}: {exc}") from exc
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise MatrixFileError("first line must be 'N M'")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
    except ValueError as exc:
        raise MatrixFileError("first line must hold two integers") from exc
    if n < 1 or m < 1:
        raise MatrixFileError(f"invalid shape {n}x{m}")
    body = rows[1:]
    if len(body) != n * m:
        raise MatrixFileError(f"expected {n * m} entries, found {len(body)}")
    try:
        vals = np.array([[float(r[0]), float(r[1])] for r in body])
    except (ValueError, IndexError) as exc:
        raise MatrixFileError("entries must be 're im' float pairs") from exc
    if not np.all(np.isfinite(vals)):
        raise MatrixFileError("matrix file contains NaN or Inf")
    return (vals[:, 0] + 1j * vals[:, 1]).reshape(n, m)
