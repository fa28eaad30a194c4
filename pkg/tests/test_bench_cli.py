import csv
import subprocess
import sys

import numpy as np
import pytest

from cmcqp.bench import (
    SUMMARY_HEADER,
    TRACE_HEADER,
    Ensemble,
    EnsembleKind,
    TrialSummary,
    format_table,
    gen_instance,
    read_trace_csv,
    run_trials,
    write_trace_csv,
)
from cmcqp.cli import main
from cmcqp.core import Case, save_complex_matrix
from cmcqp.solvers import SolverConfig

from conftest import rand_complex


def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(EnsembleKind.CASE_A2_WISHART, 1)
    assert Ensemble("CaseA1Gaussian", 3).case is Case.A1


@pytest.mark.parametrize("seed", range(5))
def test_wishart_passes_validation(seed):
    inst = gen_instance(Ensemble(EnsembleKind.CASE_A2_WISHART, 12, seed))
    assert inst.case is Case.A2


def test_gen_deterministic():
    e = Ensemble(EnsembleKind.CASE_A1_GAUSSIAN, 6, 11)
    assert np.array_equal(gen_instance(e).a, gen_instance(e).a)
    assert not np.array_equal(gen_instance(e).a, gen_instance(Ensemble(e.kind, 6, 12)).a)


def test_wishart_marchenko_pastur_support():
    ev = np.linalg.eigvalsh(gen_instance(Ensemble(EnsembleKind.CASE_A2_WISHART, 200, 0)).a)
    assert ev[0] >= -1e-10 and ev[-1] <= 4.0 * 1.05


def test_single_trial_summary():
    s, traces = run_trials(Ensemble("CaseA2Wishart", 10, 3), SolverConfig(), "proposed", 1)
    t = traces[0]
    assert s.trials == 1
    assert s.min_obj == s.max_obj == s.mean_obj == t.final_objective
    assert s.mean_iters == t.n_iters


def test_summary_ordering():
    s, _ = run_trials(Ensemble("CaseA1Gaussian", 8, 0), SolverConfig(direction="max"), "proposed", 6)
    assert s.min_obj <= s.mean_obj <= s.max_obj
    assert s.min_db <= s.mean_db <= s.max_db


def test_normalized_summary():
    s, traces = run_trials(Ensemble("CaseA2Wishart", 8, 0), SolverConfig(), "proposed", 3, normalize=True)
    ratios = [t.final_objective / t.initial_objective for t in traces]
    assert s.max_obj == pytest.approx(max(ratios)) and s.max_db <= 0.0


def test_proposed_fewer_iterations_than_pml():
    e = Ensemble("CaseA2Wishart", 100, 0)
    cfg = SolverConfig(direction="min")
    ours, _ = run_trials(e, cfg, "proposed", 50)
    pml, _ = run_trials(e, cfg, "pml", 50)
    assert ours.mean_iters < pml.mean_iters


def test_trace_csv_roundtrip(tmp_path):
    _, traces = run_trials(Ensemble("CaseA2Wishart", 10, 1), SolverConfig(), "proposed", 3)
    loaded = []
    for i, t in enumerate(traces):
        p = tmp_path / f"t{i}.csv"
        write_trace_csv(p, t)
        with open(p) as fh:
            assert fh.readline().strip() == "iter,objective,step_size,step_source,grad_norm,elapsed_ns"
        back = read_trace_csv(p)
        assert back.objective == t.objective and back.step_source == t.step_source
        assert back.elapsed_ns == t.elapsed_ns and back.grad_norm == t.grad_norm
        loaded.append(back)
    assert TrialSummary.from_traces(loaded) == TrialSummary.from_traces(traces)


def test_trace_csv_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        read_trace_csv(p)


def test_table_format():
    text = format_table([["proposed", 10, 3, 0.01, 12.0, 1.0, 2.0, 1.5]])
    head, row = text.splitlines()
    assert head.split() == SUMMARY_HEADER
    assert len(head) == len(row)


def test_unknown_solver():
    with pytest.raises(ValueError):
        run_trials(Ensemble("CaseA2Wishart", 4, 0), SolverConfig(), "newton", 1)


# --- CLI --------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_solve_deterministic(capsys):
    a = run_cli(capsys, "solve", "--case", "a2", "--dir", "max", "--n", "8", "--seed", "1")
    b = run_cli(capsys, "solve", "--case", "a2", "--dir", "max", "--n", "8", "--seed", "1")
    assert a[0] == 0 and a[1] == b[1]
    assert "status=Converged" in a[1]


def test_cli_solve_matrix_file(tmp_path, capsys):
    p = tmp_path / "a.txt"
    save_complex_matrix(p, rand_complex(6, 2))
    code, out, _ = run_cli(capsys, "solve", "--case", "a1", "--matrix", str(p),
                           "--trace-out", str(tmp_path / "t.csv"), "--x-out", str(tmp_path / "x.txt"))
    assert code == 0
    assert read_trace_csv(tmp_path / "t.csv").objective[-1] == float(out.split("objective=")[1].split()[0])


def test_cli_missing_flag(capsys):
    code, _, err = run_cli(capsys, "solve", "--n", "4")
    assert code == 2 and "usage" in err


def test_cli_bad_matrix_file(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("2 2\n1 0\n")
    assert run_cli(capsys, "solve", "--case", "a1", "--matrix", str(p))[0] == 3


def test_cli_non_hermitian_a2(tmp_path, capsys):
    p = tmp_path / "a.txt"
    save_complex_matrix(p, rand_complex(3, 0))
    assert run_cli(capsys, "solve", "--case", "a2", "--matrix", str(p))[0] == 3


def test_cli_bad_values(capsys):
    assert run_cli(capsys, "detect", "--n", "8", "--corr", "1.5")[0] == 2
    assert run_cli(capsys, "wf", "--waveforms", "2", "--length", "8", "--lags", "9")[0] == 2
    assert run_cli(capsys, "bench", "--ensemble", "a1", "--n-list", "4", "--solvers", "pml")[0] == 2
    assert run_cli(capsys, "solve", "--case", "a1", "--n", "4", "--tol", "-1")[0] == 2


def test_cli_bench(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "bench", "--ensemble", "CaseA2Wishart", "--n-list", "6,8",
                           "--trials", "2", "--solvers", "proposed,pml", "--out-dir", str(tmp_path))
    assert code == 0
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == SUMMARY_HEADER and len(rows) == 5
    assert len(list((tmp_path / "traces").glob("*.csv"))) == 8
    assert out.splitlines()[0].split() == SUMMARY_HEADER


def test_cli_wf(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "wf", "--waveforms", "2", "--length", "16", "--lags", "5",
                           "--trace-out", str(tmp_path / "t.csv"), "--out", str(tmp_path / "y.txt"))
    assert code == 0 and "reduction_db=" in out
    assert (tmp_path / "y.txt").read_text().splitlines()[0] == "16 2"


def test_cli_detect(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "detect", "--n", "64", "--doppler", "0.2", "--corr", "0.8",
                           "--trace-out", str(tmp_path / "t.csv"))
    assert code == 0
    assert float(out.split("snr_db=")[1].split()[0]) == pytest.approx(27.54, abs=0.1)
    with open(tmp_path / "t.csv") as fh:
        assert fh.readline().strip().split(",") == TRACE_HEADER


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cmcqp", "detect", "--n", "8"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "snr_db=" in r.stdout
