"""Command-line entry point: ``cmcqp {solve,bench,wf,detect}``.

Exit status is 0 on success, 2 on bad arguments and 3 on numeric failure
(invalid matrix file, matrix failing its case validation, singular
covariance).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .bench import (
    SOLVERS,
    Ensemble,
    EnsembleKind,
    format_table,
    gen_instance,
    get_solver,
    run_trials,
    summary_row,
    to_db,
    write_summary_csv,
    write_trace_csv,
)
from .core import InstanceError, MatrixFileError, ProblemInstance, load_complex_matrix, random_phases, save_complex_matrix
from .solvers import SolverConfig, solve

log = logging.getLogger("cmcqp")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_list(text: str) -> List[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_solver_flags(p: argparse.ArgumentParser, direction: Optional[str] = "min") -> None:
    if direction is not None:
        p.add_argument("--dir", choices=["min", "max"], default=direction, dest="direction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iters", type=_positive_int, default=100_000)
    p.add_argument("--accelerate", action="store_true", help="SQUAREM acceleration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmcqp", description="Unit-modulus quadratic form optimizer")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--case", choices=["a1", "a2"], required=True)
    s.add_argument("--n", type=int, help="dimension of a random instance")
    s.add_argument("--matrix", type=Path, help="read A from a complex matrix file")
    s.add_argument("--trace-out", type=Path)
    s.add_argument("--x-out", type=Path, help="write the solution as an N x 1 matrix file")
    _add_solver_flags(s)

    b = sub.add_parser("bench", help="multi-trial benchmark")
    b.add_argument("--ensemble", required=True,
                   choices=[k.value for k in EnsembleKind] + ["a1", "a2"])
    b.add_argument("--n-list", type=_int_list, required=True)
    b.add_argument("--trials", type=_positive_int, default=50)
    b.add_argument("--solvers", default="proposed",
                   help=f"comma-separated subset of {','.join(sorted(SOLVERS))}")
    b.add_argument("--out-dir", type=Path)
    b.add_argument("--normalize", action="store_true",
                   help="report dB relative to the starting objective")
    _add_solver_flags(b)

    w = sub.add_parser("wf", help="WISL waveform design")
    w.add_argument("--waveforms", type=_positive_int, required=True, metavar="M")
    w.add_argument("--length", type=_positive_int, required=True, metavar="P")
    w.add_argument("--lags", type=int, required=True, metavar="K")
    w.add_argument("--trace-out", type=Path)
    w.add_argument("--out", type=Path, help="write the P x M waveform matrix")
    _add_solver_flags(w, direction=None)

    d = sub.add_parser("detect", help="SNR-optimal code for detection")
    d.add_argument("--n", type=_positive_int, required=True)
    d.add_argument("--doppler", type=float, default=0.2)
    d.add_argument("--corr", type=float, default=0.8)
    d.add_argument("--trace-out", type=Path)
    _add_solver_flags(d, direction=None)
    return ap


def _config(args, direction: str) -> SolverConfig:
    return SolverConfig(direction=direction, tol=args.tol, max_iters=args.max_iters,
                        accelerate=args.accelerate, seed=args.seed)


def _cmd_solve(args) -> int:
    if (args.matrix is None) == (args.n is None):
        raise UsageError("solve needs exactly one of --matrix or --n")
    if args.matrix is not None:
        inst = ProblemInstance(load_complex_matrix(args.matrix), args.case, args.direction)
    else:
        if args.n < 2:
            raise UsageError("--n must be at least 2")
        kind = EnsembleKind.CASE_A1_GAUSSIAN if args.case == "a1" else EnsembleKind.CASE_A2_WISHART
        inst = gen_instance(Ensemble(kind, args.n, args.seed), args.direction)
    sol = solve(inst, random_phases(inst.n, args.seed), _config(args, args.direction))
    tr = sol.trace
    print(f"case={inst.case.value} dir={tr.direction.value} n={inst.n}")
    print(f"status={tr.status.value} iters={tr.n_iters}")
    print(f"objective_initial={tr.initial_objective!r}")
    print(f"objective={tr.final_objective!r}")
    print(f"objective_db={to_db(tr.final_objective):.6f}")
    if args.trace_out:
        write_trace_csv(args.trace_out, tr)
    if args.x_out:
        save_complex_matrix(args.x_out, sol.x.reshape(-1, 1))
    return EXIT_OK


def _cmd_bench(args) -> int:
    kind = {"a1": EnsembleKind.CASE_A1_GAUSSIAN, "a2": EnsembleKind.CASE_A2_WISHART}.get(
        args.ensemble, args.ensemble)
    names = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for name in names:
        get_solver(name)
    if any(n < 2 for n in args.n_list):
        raise UsageError("every entry of --n-list must be at least 2")
    if "pml" in names and EnsembleKind(kind) is not EnsembleKind.CASE_A2_WISHART:
        raise UsageError("the pml baseline needs the CaseA2Wishart ensemble")
    cfg = _config(args, args.direction)
    rows, persisted = [], []
    for n in args.n_list:
        for name in names:
            summ, traces = run_trials(Ensemble(kind, n, args.seed), cfg, name, args.trials,
                                      normalize=args.normalize)
            rows.append(summary_row(name, n, summ))
            persisted.extend((name, n, i, t) for i, t in enumerate(traces))
            log.info("%s n=%d done", name, n)
    print(format_table(rows))
    if args.out_dir:
        tdir = args.out_dir / "traces"
        tdir.mkdir(parents=True, exist_ok=True)
        write_summary_csv(args.out_dir / "summary.csv", rows)
        for name, n, i, t in persisted:
            write_trace_csv(tdir / f"{name}_n{n}_t{i:03d}.csv", t)
    return EXIT_OK


def _cmd_wf(args) -> int:
    from .applications.waveform import WaveformSet, lag_weights, solve_wisl

    if not 0 <= args.lags < args.length:
        raise UsageError("--lags must lie in [0, P-1]")
    ws0 = WaveformSet.random(args.length, args.waveforms, lag_weights(args.length, args.lags), args.seed)
    ws, tr = solve_wisl(ws0, _config(args, "min"))
    init, final = tr.initial_objective, tr.final_objective
    print(f"status={tr.status.value} iters={tr.n_iters}")
    print(f"wisl_initial={init!r}")
    print(f"wisl={final!r}")
    if final > 0.0 and init > 0.0:
        print(f"reduction_db={to_db(init) - to_db(final):.4f}")
    if args.trace_out:
        write_trace_csv(args.trace_out, tr)
    if args.out:
        save_complex_matrix(args.out, ws.y_matrix)
    return EXIT_OK


def _cmd_detect(args) -> int:
    from .applications.detection import build_detection_scenario, solve_detection

    if not 0.0 < args.corr < 1.0:
        raise UsageError("--corr must lie in (0, 1)")
    scn = build_detection_scenario(args.n, args.doppler, args.corr)
    _, snr, tr = solve_detection(scn, _config(args, "max"))
    print(f"status={tr.status.value} iters={tr.n_iters}")
    print(f"snr_db={snr:.4f}")
    if args.trace_out:
        write_trace_csv(args.trace_out, tr)
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "wf": _cmd_wf, "detect": _cmd_detect}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from .applications.detection import SingularCovarianceError

    try:
        return COMMANDS[args.command](args)
    except (MatrixFileError, InstanceError, SingularCovarianceError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
