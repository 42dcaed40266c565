from fractions import Fraction
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bosedimer import _accel, kernels
from conftest import run_without_numba


def racah_oracle(j1, j2, j3, m1, m2, m3) -> float:
    """3j symbol from the Racah formula in exact rational arithmetic."""
    if m1 + m2 + m3 != 0 or not abs(j1 - j2) <= j3 <= j1 + j2:
        return 0.0
    if any(abs(m) > j for m, j in ((m1, j1), (m2, j2), (m3, j3))):
        return 0.0
    f = lambda x: math.factorial(int(round(x)))  # noqa: E731
    tri = Fraction(f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3), f(j1 + j2 + j3 + 1))
    pre = tri * f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3)
    kmin = int(round(max(0, j2 - j3 - m1, j1 - j3 + m2)))
    kmax = int(round(min(j1 + j2 - j3, j1 - m1, j2 + m2)))
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (f(k) * f(j1 + j2 - j3 - k) * f(j1 - m1 - k) * f(j2 + m2 - k)
               * f(j3 - j2 + m1 + k) * f(j3 - j1 - m2 + k))
        s += Fraction((-1) ** k, den)
    sign = (-1) ** int(round(j1 - j2 - m3))
    return sign * math.sqrt(pre) * float(s) if s >= 0 else -sign * math.sqrt(pre) * float(-s)


@pytest.mark.parametrize("method", ["auto", "ql", "lapack"])
def test_tridiag_matches_dense(rng, method):
    for n in (1, 2, 3, 7, 50, 300):
        d = rng.normal(size=n)
        e = rng.normal(size=n - 1)
        w, V = kernels.tridiag_eigh(d, e, method=method)
        A = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
        assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-12 * max(1, np.abs(A).max()))
        assert np.allclose(A @ V, V * w, atol=1e-11)
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)


def test_tridiag_rejects_bad_shapes():
    with pytest.raises(ValueError):
        kernels.tridiag_eigh(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        kernels.tridiag_eigh(np.zeros(3), np.zeros(2), method="jacobi")


@pytest.mark.parametrize("args", [
    (1, 1, 1, 0, 0, 0), (1, 1, 1, -1, 0, 1), (2, 2, 2, 0, 0, 0), (0.5, 0.5, 1, 0.5, -0.5, 0),
    (3, 2, 1, 1, -1, 0), (4.5, 4.5, 3, 1.5, -2.5, 1), (6, 6, 12, 3, -2, -1), (2, 3, 4, 2, -3, 1),
])
def test_threej_against_racah_oracle(args):
    assert kernels.threej(*args) == pytest.approx(racah_oracle(*args), abs=1e-13)


def test_threej_known_values():
    assert kernels.threej(1, 1, 1, 0, 0, 0) == 0.0
    assert kernels.threej(1, 1, 1, -1, 0, 1) == pytest.approx(1 / math.sqrt(6), abs=1e-14)
    assert kernels.threej(2, 2, 2, 0, 0, 0) == pytest.approx(-math.sqrt(2 / 35), abs=1e-14)


def test_threej_orthogonality():
    j1, j2 = 2.5, 1.5
    for j3 in (1, 2, 3, 4):
        for j3p in (1, 2, 3, 4):
            tot = 0.0
            for m1 in np.arange(-j1, j1 + 1):
                for m2 in np.arange(-j2, j2 + 1):
                    m3 = -(m1 + m2)
                    tot += kernels.threej(j1, j2, j3, m1, m2, m3) * kernels.threej(j1, j2, j3p, m1, m2, m3)
            expect = (1 / (2 * j3 + 1)) * (2 * j3 + 1) if j3 == j3p else 0.0
            # sum over m1, m2 at fixed j3 = sum over m3 of 1/(2 j3 + 1) = 1
            assert tot == pytest.approx(expect, abs=1e-12)


def test_multipole_table_entries():
    tj = 5
    tab = kernels.multipole_threej_table(tj)
    j = tj / 2
    assert tab.shape == (tj + 1, 2 * tj + 1, tj + 1)
    for l in range(tj + 1):
        for mu in range(-l, l + 1):
            for a in range(tj + 1):
                mp = a - j
                assert tab[l, l + mu, a] == pytest.approx(kernels.threej(j, l, j, -mp, mu, mp - mu), abs=1e-14)


def test_bloch_rk4_matches_scipy(rng):
    u, eps = 3.0, 0.4
    S0 = rng.normal(size=(5, 3))
    S0 /= np.linalg.norm(S0, axis=1)[:, None]
    S = S0.copy()
    kernels.bloch_rk4(S, u, eps, 0.001, 2000)

    def f(t, y):
        x, yy, z = y
        return [-u * z * yy + eps * yy, z * (1 + u * x) - eps * x, -yy]

    for k in range(5):
        ref = solve_ivp(f, (0, 2.0), S0[k], rtol=1e-12, atol=1e-12).y[:, -1]
        assert np.allclose(S[k], ref, atol=1e-9)


def test_numpy_fallback_agrees():
    code = """
import numpy as np
from bosedimer import _accel, kernels
assert _accel.backend() == 'numpy'
rng = np.random.default_rng(3)
d = rng.normal(size=40); e = rng.normal(size=39)
w, V = kernels.tridiag_eigh(d, e)
S = rng.normal(size=(4, 3)); S /= np.linalg.norm(S, axis=1)[:, None]
kernels.bloch_rk4(S, 2.0, 0.1, 0.01, 100)
print(repr(w.tolist())); print(repr(S.tolist()))
print(kernels.threej(2, 2, 2, 0, 0, 0))
print(float(kernels.multipole_threej_table(4).sum()))
"""
    res = run_without_numba(code)
    assert res.returncode == 0, res.stderr
    lines = res.stdout.strip().splitlines()
    rng = np.random.default_rng(3)
    d = rng.normal(size=40)
    e = rng.normal(size=39)
    w, _ = kernels.tridiag_eigh(d, e)
    S = rng.normal(size=(4, 3))
    S /= np.linalg.norm(S, axis=1)[:, None]
    kernels.bloch_rk4(S, 2.0, 0.1, 0.01, 100)
    assert np.allclose(eval(lines[0]), w, atol=1e-12)
    assert np.allclose(eval(lines[1]), S, atol=1e-12)
    assert float(lines[2]) == pytest.approx(-math.sqrt(2 / 35), abs=1e-14)
    assert float(lines[3]) == pytest.approx(float(kernels.multipole_threej_table(4).sum()), abs=1e-12)


def test_backend_flag_parsing(monkeypatch):
    for v in ("1", "true", "YES", "on"):
        monkeypatch.setenv("BOSEDIMER_DISABLE_NUMBA", v)
        assert _accel._disabled()
    monkeypatch.setenv("BOSEDIMER_DISABLE_NUMBA", "0")
    assert not _accel._disabled()
