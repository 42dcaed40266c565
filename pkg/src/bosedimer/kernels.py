"""Hot numerical kernels with numba and numpy/scipy implementations.

Every public function dispatches on ``_accel.HAVE_NUMBA``.  The numpy
variants are kept as the reference path and are exercised by the tests
with the environment flag set.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from . import _accel
from ._accel import njit


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _tqli(d, e, zt, maxit):
    # d: diagonal (n), e: off-diagonal padded to n with e[n-1] = 0.
    # zt rows are the eigenvectors (transposed accumulation keeps rows contiguous).
    n = d.shape[0]
    eps = 2.220446049250313e-16
    total = 0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            total += 1
            if it > maxit:
                return -1 - l, total
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            restart = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    restart = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = zt[i + 1, k]
                    zt[i + 1, k] = s * zt[i, k] + c * f
                    zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if restart:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0, total


QL_MAX_DIM = 256  # above this LAPACK's MRRR beats QL with vector accumulation


def tridiag_eigh(diag, off, maxit: int = 60, method: str = "auto"):
    """Eigen-decomposition of a real symmetric tridiagonal matrix.

    Returns ascending eigenvalues and a matrix whose columns are the
    orthonormal eigenvectors.  method: 'ql' (compiled implicit QL, needs
    numba), 'lapack', or 'auto' (QL up to QL_MAX_DIM when numba is present).
    """
    if method not in ("auto", "ql", "lapack"):
        raise ValueError(f"unknown method {method!r}")
    diag = np.asarray(diag, dtype=np.float64)
    off = np.asarray(off, dtype=np.float64)
    n = diag.size
    if off.size != max(n - 1, 0):
        raise ValueError("off-diagonal must have length n-1")
    if n == 1:
        return diag.copy(), np.ones((1, 1))
    if method == "ql" and not _accel.HAVE_NUMBA:
        raise ValueError("the QL kernel needs numba")
    if method == "auto":
        method = "ql" if _accel.HAVE_NUMBA and n <= QL_MAX_DIM else "lapack"
    if method == "lapack":
        try:
            return eigh_tridiagonal(diag, off)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"tridiagonal eigensolver failed for n={n}: {exc}") from exc
    d = diag.copy()
    e = np.zeros(n)
    e[: n - 1] = off
    zt = np.eye(n)
    status, total = _tqli(d, e, zt, maxit)
    if status != 0:
        raise ConvergenceError(
            f"implicit QL did not converge for n={n} (level {-status - 1}, {total} iterations)"
        )
    order = np.argsort(d, kind="stable")
    return d[order], np.ascontiguousarray(zt[order].T)


# ---------------------------------------------------------------------------
# classical Bloch equations, fixed-step RK4
# ---------------------------------------------------------------------------
# In tau = K t with H/K = (u/2) j Sz^2 - eps j Sz - j Sx (per unit spin length)
# the spin Poisson brackets give
#   dSx = -u Sz Sy + eps Sy,  dSy = Sz (1 + u Sx) - eps Sx,  dSz = -Sy.

@njit(cache=True, nogil=True)
def _rk4_numba(S, u, eps, dt, nsteps):
    n = S.shape[0]
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for p in range(n):
        x = S[p, 0]
        y = S[p, 1]
        z = S[p, 2]
        for _ in range(nsteps):
            k1x = -u * z * y + eps * y
            k1y = z * (1.0 + u * x) - eps * x
            k1z = -y
            x2 = x + h2 * k1x
            y2 = y + h2 * k1y
            z2 = z + h2 * k1z
            k2x = -u * z2 * y2 + eps * y2
            k2y = z2 * (1.0 + u * x2) - eps * x2
            k2z = -y2
            x3 = x + h2 * k2x
            y3 = y + h2 * k2y
            z3 = z + h2 * k2z
            k3x = -u * z3 * y3 + eps * y3
            k3y = z3 * (1.0 + u * x3) - eps * x3
            k3z = -y3
            x4 = x + dt * k3x
            y4 = y + dt * k3y
            z4 = z + dt * k3z
            k4x = -u * z4 * y4 + eps * y4
            k4y = z4 * (1.0 + u * x4) - eps * x4
            k4z = -y4
            x = x + h6 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y = y + h6 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            z = z + h6 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            r = math.sqrt(x * x + y * y + z * z)
            x /= r
            y /= r
            z /= r
        S[p, 0] = x
        S[p, 1] = y
        S[p, 2] = z


def _bloch_rhs(S, u, eps):
    x, y, z = S[:, 0], S[:, 1], S[:, 2]
    out = np.empty_like(S)
    out[:, 0] = -u * z * y + eps * y
    out[:, 1] = z * (1.0 + u * x) - eps * x
    out[:, 2] = -y
    return out


def _rk4_numpy(S, u, eps, dt, nsteps):
    for _ in range(nsteps):
        k1 = _bloch_rhs(S, u, eps)
        k2 = _bloch_rhs(S + 0.5 * dt * k1, u, eps)
        k3 = _bloch_rhs(S + 0.5 * dt * k2, u, eps)
        k4 = _bloch_rhs(S + dt * k3, u, eps)
        S += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        S /= np.sqrt(np.einsum("ij,ij->i", S, S))[:, None]


def bloch_rk4(S, u: float, eps: float, dt: float, nsteps: int):
    """Advance unit Bloch vectors S (shape (n, 3)) in place by nsteps RK4 steps."""
    if S.ndim != 2 or S.shape[1] != 3:
        raise ValueError("S must have shape (n, 3)")
    if nsteps <= 0:
        return S
    if _accel.HAVE_NUMBA:
        _rk4_numba(S, float(u), float(eps), float(dt), int(nsteps))
    else:
        _rk4_numpy(S, float(u), float(eps), float(dt), int(nsteps))
    return S


# ---------------------------------------------------------------------------
# Wigner 3j table for the multipole operators of spin j
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _threej_doubled(lf, a1, a2, a3, b1, b2, b3):
    # all arguments are doubled quantum numbers; lf[k] = log(k!)
    if b1 + b2 + b3 != 0:
        return 0.0
    if abs(b1) > a1 or abs(b2) > a2 or abs(b3) > a3:
        return 0.0
    if (a1 + b1) % 2 or (a2 + b2) % 2 or (a3 + b3) % 2:
        return 0.0
    if a3 > a1 + a2 or a3 < abs(a1 - a2) or (a1 + a2 + a3) % 2:
        return 0.0
    t1 = (a1 + a2 - a3) // 2
    t2 = (a1 - a2 + a3) // 2
    t3 = (-a1 + a2 + a3) // 2
    big = (a1 + a2 + a3) // 2 + 1
    pre = 0.5 * (lf[t1] + lf[t2] + lf[t3] - lf[big]
                 + lf[(a1 + b1) // 2] + lf[(a1 - b1) // 2]
                 + lf[(a2 + b2) // 2] + lf[(a2 - b2) // 2]
                 + lf[(a3 + b3) // 2] + lf[(a3 - b3) // 2])
    c1 = (a3 - a2 + b1) // 2
    c2 = (a3 - a1 - b2) // 2
    c3 = t1
    c4 = (a1 - b1) // 2
    c5 = (a2 + b2) // 2
    kmin = max(0, max(-c1, -c2))
    kmax = min(c3, min(c4, c5))
    if kmax < kmin:
        return 0.0
    # log-terms first, then a scaled sum to avoid overflow
    nk = kmax - kmin + 1
    logs = np.empty(nk)
    mx = -1e300
    for i in range(nk):
        k = kmin + i
        v = -(lf[k] + lf[c1 + k] + lf[c2 + k] + lf[c3 - k] + lf[c4 - k] + lf[c5 - k])
        logs[i] = v
        if v > mx:
            mx = v
    acc = 0.0
    comp = 0.0
    for i in range(nk):
        k = kmin + i
        term = math.exp(logs[i] - mx)
        if k % 2:
            term = -term
        # Neumaier compensated summation
        tot = acc + term
        if abs(acc) >= abs(term):
            comp += (acc - tot) + term
        else:
            comp += (term - tot) + acc
        acc = tot
    s = acc + comp
    phase = (a1 - a2 - b3) // 2
    sign = -1.0 if phase % 2 else 1.0
    return sign * s * math.exp(pre + mx)


def log_factorials(n: int) -> np.ndarray:
    return gammaln(np.arange(n + 1, dtype=np.float64) + 1.0)


def threej(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol for integer or half-integer arguments (Racah formula)."""
    args = [2.0 * float(x) for x in (j1, j2, j3, m1, m2, m3)]
    ints = [int(round(a)) for a in args]
    if any(abs(a - i) > 1e-9 for a, i in zip(args, ints)):
        raise ValueError("quantum numbers must be integers or half-integers")
    if min(ints[:3]) < 0:
        raise ValueError("angular momenta must be non-negative")
    lf = log_factorials(sum(ints[:3]) // 2 + 2)
    fn = _threej_doubled if _accel.HAVE_NUMBA else getattr(_threej_doubled, "py_func", _threej_doubled)
    return float(fn(lf, *ints))


@njit(cache=True, nogil=True)
def _multipole_table_numba(tj, lf):
    # table[l, l + mu, a] = 3j(j l j; -m' mu m'') with m' = a - j, m'' = m' - mu
    dim = tj + 1
    out = np.zeros((dim, 2 * dim - 1, dim))
    for l in range(dim):
        for mu in range(-l, l + 1):
            for a in range(dim):
                mp2 = 2 * a - tj
                mpp2 = mp2 - 2 * mu
                if mpp2 < -tj or mpp2 > tj:
                    continue
                out[l, l + mu, a] = _threej_doubled(lf, tj, 2 * l, tj, -mp2, 2 * mu, mpp2)
    return out


def _multipole_table_numpy(tj, lf):
    dim = tj + 1
    out = np.zeros((dim, 2 * dim - 1, dim))
    f = getattr(_threej_doubled, "py_func", _threej_doubled)
    for l in range(dim):
        for mu in range(-l, l + 1):
            for a in range(dim):
                mp2 = 2 * a - tj
                mpp2 = mp2 - 2 * mu
                if -tj <= mpp2 <= tj:
                    out[l, l + mu, a] = f(lf, tj, 2 * l, tj, -mp2, 2 * mu, mpp2)
    return out


def multipole_threej_table(two_j: int) -> np.ndarray:
    """3j values (j l j; -m' mu m'-mu) for all l <= 2j, |mu| <= l and m'.

    Shape (2j+1, 4j+1, 2j+1); the middle axis is offset by l.
    """
    lf = log_factorials(3 * two_j + 4)
    if _accel.HAVE_NUMBA:
        return _multipole_table_numba(int(two_j), lf)
    return _multipole_table_numpy(int(two_j), lf)
