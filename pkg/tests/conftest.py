import math

import numpy as np
import pytest

from cmcqp.core import Case, ProblemInstance


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def rand_complex(n, seed):
    r = philox(seed)
    return (r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))) / math.sqrt(2.0)


def rand_psd(n, seed):
    b = rand_complex(n, seed)
    a = b @ b.conj().T / n
    return 0.5 * (a + a.conj().T)


def inst_a1(n, seed, direction="min"):
    return ProblemInstance(rand_complex(n, seed), Case.A1, direction)


def inst_a2(n, seed, direction="min"):
    return ProblemInstance(rand_psd(n, seed), Case.A2, direction)


def rand_theta(n, seed):
    return philox(seed + 1000).uniform(0.0, 2.0 * math.pi, n)


def loop_quadratic(a, x):
    """x^H A x as an explicit double loop."""
    total = 0j
    n = len(x)
    for i in range(n):
        for k in range(n):
            total += x[i].conjugate() * a[i, k] * x[k]
    return total


def fd_gradient(f, theta, h=1e-5):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return out


def fit_ray(f, g, h=None, deg=6, k=4):
    """Polynomial coefficients c[0..3] of rho -> f(rho).

    Symmetric samples at rho = h*j, j = -k..k, fitted with a degree ``deg``
    polynomial in the scaled variable to keep the fit well conditioned.
    """
    if h is None:
        h = 0.01 / max(np.max(np.abs(g)), 1e-300)
    j = np.arange(-k, k + 1)
    vals = np.array([f(h * jj) for jj in j])
    c = np.polynomial.polynomial.polyfit(j.astype(float), vals, deg)
    return c[:4] / h ** np.arange(4)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# --------------------------------------------------------------------------
# acceptance reporting

ACCEPTANCE = {}


@pytest.fixture
def record_acceptance():
    def record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
