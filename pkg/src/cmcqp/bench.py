"""Random ensembles, multi-trial runs, summaries and CSV output."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from .core import Case, ProblemInstance, random_phases
from .solvers import (
    IterationTrace,
    Solution,
    SolverConfig,
    fixed_step_baseline,
    line_search_baseline,
    pml_baseline,
    solve,
)
from .stepsize import StepSource

TRACE_HEADER = ["iter", "objective", "step_size", "step_source", "grad_norm", "elapsed_ns"]
SUMMARY_HEADER = ["solver", "n", "trials", "mean_time_s", "mean_iters", "min_db", "max_db", "mean_db"]


class EnsembleKind(str, enum.Enum):
    CASE_A1_GAUSSIAN = "CaseA1Gaussian"
    CASE_A2_WISHART = "CaseA2Wishart"


@dataclass(frozen=True)
class Ensemble:
    kind: EnsembleKind
    n: int
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.n < 2:
            raise ValueError("ensemble dimension must be at least 2")

    @property
    def case(self) -> Case:
        return Case.A1 if self.kind is EnsembleKind.CASE_A1_GAUSSIAN else Case.A2


def _complex_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)


def gen_instance(e: Ensemble, direction="min") -> ProblemInstance:
    """Gaussian ``A`` for case A1, ``B B^H / n`` for case A2."""
    # tagged stream, so matrices are independent of random_phases(n, seed)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([e.seed, 1])))
    b = _complex_normal(rng, e.n)
    if e.kind is EnsembleKind.CASE_A1_GAUSSIAN:
        return ProblemInstance(b, Case.A1, direction)
    a = b @ b.conj().T / e.n
    return ProblemInstance(0.5 * (a + a.conj().T), Case.A2, direction)


# --------------------------------------------------------------------------
# named solvers: (instance, theta0, cfg) -> Solution

SolverFn = Callable[[ProblemInstance, np.ndarray, SolverConfig], Solution]

SOLVERS: Dict[str, SolverFn] = {
    "proposed": lambda inst, th, cfg: solve(inst, th, cfg),
    "squarem": lambda inst, th, cfg: solve(inst, th, replace(cfg, accelerate=True)),
    "pml": pml_baseline,
    "fixed": lambda inst, th, cfg: fixed_step_baseline(inst, th, cfg, 1e-3),
    "backtracking": lambda inst, th, cfg: line_search_baseline(inst, th, cfg, "backtracking"),
    "exhaustive": lambda inst, th, cfg: line_search_baseline(inst, th, cfg, "exhaustive"),
}


def get_solver(name: str) -> SolverFn:
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None


def to_db(value: float) -> float:
    return 10.0 * math.log10(value) if value > 0.0 else -math.inf


@dataclass(frozen=True)
class TrialSummary:
    trials: int
    mean_time_s: float
    mean_iters: float
    min_obj: float
    max_obj: float
    mean_obj: float
    min_db: float
    max_db: float
    mean_db: float

    @classmethod
    def from_traces(cls, traces: Sequence[IterationTrace], normalize: bool = False) -> "TrialSummary":
        if not traces:
            raise ValueError("need at least one trace")
        finals = np.array([t.final_objective / (t.initial_objective if normalize else 1.0)
                           for t in traces])
        dbs = np.array([to_db(v) for v in finals])
        return cls(
            trials=len(traces),
            mean_time_s=float(np.mean([t.elapsed_s for t in traces])),
            mean_iters=float(np.mean([t.n_iters for t in traces])),
            min_obj=float(finals.min()), max_obj=float(finals.max()), mean_obj=float(finals.mean()),
            min_db=float(dbs.min()), max_db=float(dbs.max()),
            # dB of the mean objective, so min <= mean <= max holds in both scales
            mean_db=to_db(float(finals.mean())),
        )


def run_trials(e: Ensemble, cfg: SolverConfig, solver: Union[str, SolverFn] = "proposed",
               trials: int = 1, normalize: bool = False) -> Tuple[TrialSummary, List[IterationTrace]]:
    """Run ``trials`` independent instances; trial ``i`` uses seed ``e.seed + i``."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    fn = get_solver(solver) if isinstance(solver, str) else solver
    traces = []
    for i in range(trials):
        seed = e.seed + i
        inst = gen_instance(replace(e, seed=seed), cfg.direction)
        sol = fn(inst, random_phases(e.n, seed), replace(cfg, seed=seed))
        traces.append(sol.trace)
    return TrialSummary.from_traces(traces, normalize), traces


# --------------------------------------------------------------------------
# CSV

def write_trace_csv(path: Union[str, Path], trace: IterationTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for row in zip(trace.iters, trace.objective, trace.step_size, trace.step_source,
                       trace.grad_norm, trace.elapsed_ns):
            w.writerow([row[0], repr(row[1]), repr(row[2]), row[3], repr(row[4]), row[5]])


def read_trace_csv(path: Union[str, Path], direction="min") -> IterationTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRACE_HEADER:
        raise ValueError(f"{path}: unexpected trace header")
    trace = IterationTrace(direction)
    for r in rows[1:]:
        trace.append(float(r[1]), float(r[2]), StepSource(r[3]), float(r[4]), int(r[5]))
    return trace


def summary_row(solver: str, n: int, s: TrialSummary) -> list:
    return [solver, n, s.trials, s.mean_time_s, s.mean_iters, s.min_db, s.max_db, s.mean_db]


def write_summary_csv(path: Union[str, Path], rows: Sequence[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)


def format_table(rows: Sequence[list]) -> str:
    """Aligned plain-text rendering of summary rows."""
    cells = [SUMMARY_HEADER] + [
        [str(r[0]), str(r[1]), str(r[2]), f"{r[3]:.4f}", f"{r[4]:.1f}",
         f"{r[5]:.3f}", f"{r[6]:.3f}", f"{r[7]:.3f}"] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(SUMMARY_HEADER))]
    lines = ["  ".join(c[i].rjust(widths[i]) for i in range(len(c))) for c in cells]
    return "\n".join(lines)
