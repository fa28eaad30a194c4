import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmcqp.core import (
    Case,
    Direction,
    InstanceError,
    MatrixFileError,
    ProblemInstance,
    count_matvecs,
    gradient_case1,
    gradient_case1_trig,
    gradient_case2,
    gradient_case2_trig,
    load_complex_matrix,
    objective_case1,
    objective_case2,
    phases_to_vector,
    random_phases,
    save_complex_matrix,
    wrap_phases,
)

from conftest import fd_gradient, loop_quadratic, rand_complex, rand_psd, rand_theta, rel_err


# --- phases -----------------------------------------------------------------

def test_zero_phases_give_ones():
    assert np.array_equal(phases_to_vector(np.zeros(3)), np.ones(3, dtype=complex))


def test_quarter_turn():
    assert abs(phases_to_vector([math.pi / 2])[0] - 1j) < 1e-15


def test_phases_elementwise():
    theta = np.array([0.7, 2.1, 4.9, 5.5])
    x = phases_to_vector(theta)
    assert np.max(np.abs(np.abs(x) - 1.0)) <= 1e-12
    expect = np.array([complex(math.cos(t), math.sin(t)) for t in theta])
    assert np.max(np.abs(x - expect)) <= 1e-12
    assert np.max(np.abs(np.mod(np.angle(x), 2 * math.pi) - theta)) <= 1e-12


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=20))
def test_wrap_keeps_vector(vals):
    theta = np.array(vals)
    w = wrap_phases(theta)
    assert np.all((w >= 0.0) & (w < 2 * math.pi))
    assert np.max(np.abs(phases_to_vector(w) - phases_to_vector(theta))) < 1e-9


def test_random_phases_deterministic():
    a, b = random_phases(16, 5), random_phases(16, 5)
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a < 2 * math.pi))
    assert not np.array_equal(a, random_phases(16, 6))


# --- instances --------------------------------------------------------------

def test_a2_rejects_non_hermitian():
    with pytest.raises(InstanceError):
        ProblemInstance(rand_complex(4, 0), Case.A2)


def test_a2_rejects_indefinite():
    with pytest.raises(InstanceError):
        ProblemInstance(np.diag([1.0, -1.0]), Case.A2)


def test_a1_accepts_anything_finite():
    ProblemInstance(rand_complex(3, 1), Case.A1)
    with pytest.raises(InstanceError):
        ProblemInstance(np.array([[np.nan]]), Case.A1)
    with pytest.raises(InstanceError):
        ProblemInstance(np.ones((2, 3)), Case.A1)


def test_direction_sign():
    assert Direction.MIN.tau == -1 and Direction.MAX.tau == 1


# --- objectives -------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 3, 8])
def test_case1_identity(n):
    inst = ProblemInstance(np.eye(n), Case.A1)
    x = phases_to_vector(rand_theta(n, n))
    assert objective_case1(inst, x) == pytest.approx(n * n, rel=1e-14)


def test_case1_zero():
    assert objective_case1(ProblemInstance(np.zeros((3, 3)), Case.A1), np.ones(3)) == 0.0


def test_case1_random_matches_loop():
    a = rand_complex(4, 42)
    x = phases_to_vector(rand_theta(4, 42))
    oracle = abs(loop_quadratic(a, x)) ** 2
    val = objective_case1(ProblemInstance(a, Case.A1), x)
    assert val == pytest.approx(oracle, rel=1e-12)
    # frozen from the loop oracle
    assert val == pytest.approx(4.25353091411959, rel=1e-12)


def test_case1_dimension_mismatch():
    with pytest.raises(ValueError):
        objective_case1(ProblemInstance(np.eye(3), Case.A1), np.ones(2))


def test_case2_identity_and_ones():
    n = 6
    assert objective_case2(ProblemInstance(np.eye(n), Case.A2), phases_to_vector(rand_theta(n, 0))) == pytest.approx(n)
    assert objective_case2(ProblemInstance(np.ones((n, n)), Case.A2), np.ones(n)) == pytest.approx(n * n)


def test_case2_random_matches_loop():
    a = rand_psd(5, 7)
    x = phases_to_vector(rand_theta(5, 7))
    val = objective_case2(ProblemInstance(a, Case.A2), x)
    assert val == pytest.approx(loop_quadratic(a, x).real, rel=1e-12)
    assert val == pytest.approx(4.6688646011763275, rel=1e-12)


def test_case_mismatch_raises():
    with pytest.raises(ValueError):
        objective_case2(ProblemInstance(np.eye(2), Case.A1), np.ones(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 16), st.integers(0, 10_000), st.floats(0, 2 * math.pi))
def test_global_phase_invariance(n, seed, phi):
    x = phases_to_vector(rand_theta(n, seed))
    y = np.exp(1j * phi) * x
    i1 = ProblemInstance(rand_complex(n, seed), Case.A1)
    i2 = ProblemInstance(rand_psd(n, seed), Case.A2)
    assert abs(objective_case1(i1, x) - objective_case1(i1, y)) <= 1e-10 * max(1.0, objective_case1(i1, x))
    assert abs(objective_case2(i2, x) - objective_case2(i2, y)) <= 1e-10 * max(1.0, objective_case2(i2, x))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 16), st.integers(0, 10_000))
def test_case1_adjoint_identity(n, seed):
    a = rand_complex(n, seed)
    x = phases_to_vector(rand_theta(n, seed))
    v1 = objective_case1(ProblemInstance(a, Case.A1), x)
    v2 = objective_case1(ProblemInstance(a.conj().T, Case.A1), x)
    assert abs(v1 - v2) <= 1e-12 * max(1.0, v1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 16), st.integers(0, 10_000))
def test_case2_nonnegative(n, seed):
    a = rand_psd(n, seed)
    val = objective_case2(ProblemInstance(a, Case.A2), phases_to_vector(rand_theta(n, seed)))
    assert val >= -1e-8 * np.linalg.norm(a, 2) * n


# --- gradients --------------------------------------------------------------

def test_gradients_vanish_on_phase_invariant_instances():
    x = phases_to_vector(rand_theta(4, 3))
    for a in (np.eye(4), np.diag([1.0, 2.0, -3.0, 0.5])):
        assert np.max(np.abs(gradient_case1(ProblemInstance(a, Case.A1), x))) < 1e-12
    for a in (np.eye(4), np.diag([1.0, 2.0, 3.0, 0.5])):
        assert np.max(np.abs(gradient_case2(ProblemInstance(a, Case.A2), x))) < 1e-12
        assert np.max(np.abs(gradient_case2_trig(ProblemInstance(a, Case.A2), rand_theta(4, 3)))) < 1e-12


def test_case1_gradient_fd():
    inst = ProblemInstance(rand_complex(4, 3), Case.A1)
    theta = rand_theta(4, 3)
    fd = fd_gradient(lambda t: objective_case1(inst, phases_to_vector(t)), theta)
    assert rel_err(gradient_case1(inst, phases_to_vector(theta)), fd) <= 1e-6


def test_case1_trig_symmetric_real_at_zero():
    r = np.random.Generator(np.random.Philox(0)).standard_normal((3, 3))
    inst = ProblemInstance(r + r.T, Case.A1)
    g = gradient_case1_trig(inst, np.zeros(3))
    fd = fd_gradient(lambda t: objective_case1(inst, phases_to_vector(t)), np.zeros(3))
    assert np.max(np.abs(g)) < 1e-12
    assert np.max(np.abs(fd)) < 1e-6


def test_case1_trig_matches_complex():
    inst = ProblemInstance(rand_complex(4, 3), Case.A1)
    theta = rand_theta(4, 3)
    assert rel_err(gradient_case1_trig(inst, theta), gradient_case1(inst, phases_to_vector(theta))) <= 1e-10
    assert np.max(np.abs(gradient_case1_trig(ProblemInstance(np.eye(4), Case.A1), theta))) < 1e-12


def test_case2_gradient_fd_and_trig():
    inst = ProblemInstance(rand_psd(6, 11), Case.A2)
    theta = rand_theta(6, 11)
    g = gradient_case2(inst, phases_to_vector(theta))
    fd = fd_gradient(lambda t: objective_case2(inst, phases_to_vector(t)), theta)
    assert rel_err(g, fd) <= 1e-6
    assert rel_err(gradient_case2_trig(inst, theta), g) <= 1e-10


def test_case2_trig_real_matrix_at_zero():
    inst = ProblemInstance(rand_psd(5, 2).real, Case.A2)
    assert np.max(np.abs(gradient_case2_trig(inst, np.zeros(5)))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 16), st.integers(0, 10_000))
def test_gradient_fd_property(n, seed):
    theta = rand_theta(n, seed)
    for inst, obj, grad in (
        (ProblemInstance(rand_complex(n, seed), Case.A1), objective_case1, gradient_case1),
        (ProblemInstance(rand_psd(n, seed), Case.A2), objective_case2, gradient_case2),
    ):
        fd = fd_gradient(lambda t: obj(inst, phases_to_vector(t)), theta)
        assert rel_err(grad(inst, phases_to_vector(theta)), fd) <= 1e-5


# --- mat-vec counting -------------------------------------------------------

def test_counter_scopes():
    inst = ProblemInstance(rand_complex(4, 0), Case.A1)
    x = np.ones(4, dtype=complex)
    with count_matvecs() as c:
        gradient_case1(inst, x)
        with count_matvecs() as inner:
            objective_case1(inst, x)
        assert inner.total == 1
    assert c.total == 2


# --- matrix files -----------------------------------------------------------

def test_matrix_roundtrip(tmp_path):
    a = rand_complex(5, 9)
    p = tmp_path / "a.txt"
    save_complex_matrix(p, a)
    assert p.read_text().splitlines()[0] == "5 5"
    assert np.array_equal(load_complex_matrix(p), a)


@pytest.mark.parametrize("text", [
    "", "2 2\n1 0\n", "2\n1 0\n", "1 1\nnan 0\n", "1 1\n1 inf\n", "1 1\nabc 0\n", "x y\n",
])
def test_matrix_file_rejects(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(MatrixFileError):
        load_complex_matrix(p)


def test_matrix_file_missing(tmp_path):
    with pytest.raises(MatrixFileError):
        load_complex_matrix(tmp_path / "nope.txt")
