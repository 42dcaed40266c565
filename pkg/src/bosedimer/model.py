"""Exact quantum mechanics of the two-site Bose-Hubbard dimer.

The N-boson problem is a spin j = N/2 with Hamiltonian

    H = U Jz^2 - E Jz - K Jx

written in the Jz eigenbasis m = -j..j, where m = (n1 - n2)/2.  Arrays
indexed by level are ordered by ascending m (index a = m + j).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import gammaln, xlogy

from .kernels import tridiag_eigh


class ParameterError(ValueError):
    """Invalid physical parameters or incompatible inputs."""


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimerParams:
    """Model parameters.

    N: particle number, U: on-site interaction, K: hopping,
    eps: bias (energy units, the coefficient of -Jz).
    """

    N: int
    U: float
    K: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if not (self.K > 0 and math.isfinite(self.K)):
            raise ParameterError(f"K must be positive and finite, got {self.K}")
        if not math.isfinite(self.U) or not math.isfinite(self.eps):
            raise ParameterError("U and eps must be finite")

    @classmethod
    def from_u(cls, N: int, u: float, K: float = 1.0, eps: float = 0.0) -> "DimerParams":
        """Build from the dimensionless interaction u = NU/K."""
        if int(N) != N or N < 1:
            raise ParameterError(f"N must be an integer >= 1, got {N!r}")
        return cls(N=int(N), U=u * K / N, K=K, eps=eps)

    @property
    def u(self) -> float:
        return self.N * self.U / self.K

    @property
    def j(self) -> float:
        return self.N / 2.0

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def h(self) -> float:
        """Planck cell area in steradians, 4 pi / (N + 1)."""
        return 4.0 * math.pi / self.dim

    @property
    def eps_scaled(self) -> float:
        return self.eps / self.K

    @property
    def E_minus(self) -> float:
        return -self.N * self.K / 2.0

    @property
    def E_x(self) -> float:
        return self.N * self.K / 2.0

    @property
    def E_plus(self) -> float:
        u = self.u
        if u == 0:
            return math.inf
        return 0.25 * (u + 1.0 / u) * self.N * self.K

    @property
    def omega_J(self) -> float:
        return math.sqrt(abs(self.N * self.U * self.K))

    @property
    def omega_K(self) -> float:
        return self.K

    @property
    def omega_plus(self) -> float:
        return math.sqrt((self.K + self.N * self.U) * self.K)

    @property
    def omega_minus(self) -> float:
        v = (self.K - self.N * self.U) * self.K
        return math.sqrt(v) if v >= 0 else math.nan

    @property
    def E_C(self) -> float:
        return self.U

    @property
    def E_J(self) -> float:
        return self.K * self.N / 2.0

    @property
    def regime(self) -> str:
        u = self.u
        if u < 1:
            return "Rabi"
        if u < self.N ** 2:
            return "Josephson"
        return "Fock"

    def derived(self) -> dict:
        """Derived constants as a plain dict (used in output metadata)."""
        out = {
            "u": self.u, "j": self.j, "dim": self.dim, "h": self.h,
            "eps_scaled": self.eps_scaled, "omega_J": self.omega_J,
            "omega_plus": self.omega_plus, "E_minus": self.E_minus,
            "E_x": self.E_x, "E_plus": self.E_plus, "regime": self.regime,
        }
        if self.u > 1:
            out["eps_c"] = (self.u ** (2.0 / 3.0) - 1.0) ** 1.5
        return out


# ---------------------------------------------------------------------------
# spin operators in the Jz basis
# ---------------------------------------------------------------------------

def m_values(j: float) -> np.ndarray:
    n = int(round(2 * j)) + 1
    return -j + np.arange(n, dtype=np.float64)


def jplus_elements(j: float) -> np.ndarray:
    """<m+1|J+|m> for m = -j..j-1."""
    m = m_values(j)[:-1]
    return np.sqrt((j - m) * (j + m + 1.0))


def spin_matrices(j: float):
    """Dense (Jx, Jy, Jz); Jy is complex."""
    m = m_values(j)
    n = m.size
    jp = np.zeros((n, n))
    jp[np.arange(1, n), np.arange(n - 1)] = jplus_elements(j)
    jx = 0.5 * (jp + jp.T)
    jy = -0.5j * (jp - jp.T)
    return jx, jy, np.diag(m)


@dataclass(frozen=True)
class Tridiagonal:
    """Real symmetric tridiagonal matrix."""

    diag: np.ndarray
    off: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        out = np.array(out, dtype=np.result_type(v, np.float64))
        if self.size > 1:
            o = self.off[:, None] if v.ndim == 2 else self.off
            out[:-1] += o * v[1:]
            out[1:] += o * v[:-1]
        return out


def build_hamiltonian(params: DimerParams) -> Tridiagonal:
    """H = U Jz^2 - eps Jz - K Jx in the Jz basis (c-number terms dropped)."""
    j = params.j
    m = m_values(j)
    diag = params.U * m ** 2 - params.eps * m
    off = -(params.K / 2.0) * jplus_elements(j)
    return Tridiagonal(diag, off)


def reflection_matrix(dim: int) -> np.ndarray:
    """Mirror n -> -n."""
    return np.eye(dim)[::-1].copy()


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with eigenvectors as columns.

    ``parity`` holds +1/-1 mirror labels at zero bias and is None otherwise.
    """

    params: DimerParams
    energies: np.ndarray
    vectors: np.ndarray
    parity: np.ndarray | None = None

    def __len__(self):
        return self.energies.size

    def overlaps(self, state: "QuantumState") -> np.ndarray:
        _check_same(state.params, self.params)
        return self.vectors.T @ state.amps

    def level_nearest(self, E: float, parity: int | None = None) -> int:
        idx = np.arange(len(self))
        if parity is not None and self.parity is not None:
            idx = idx[self.parity == parity]
        return int(idx[np.argmin(np.abs(self.energies[idx] - E))])


def _fix_sign(V: np.ndarray) -> np.ndarray:
    # deterministic gauge: largest component of every eigenvector positive
    k = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[k, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def _parity_blocks(H: Tridiagonal, N: int):
    d, off = H.diag, H.off
    r2 = math.sqrt(2.0)
    dim = N + 1
    if N % 2 == 0:
        i0 = N // 2
        de = d[i0:].copy()
        oe = off[i0:].copy()
        if oe.size:
            oe[0] *= r2
        Ee, Ve = tridiag_eigh(de, oe)
        Eo, Vo = (np.empty(0), np.empty((0, 0)))
        if N > 0:
            Eo, Vo = tridiag_eigh(d[i0 + 1:].copy(), off[i0 + 1:].copy())
        We = np.zeros((dim, Ee.size))
        We[i0] = Ve[0]
        We[i0 + 1:] = Ve[1:] / r2
        We[:i0] = Ve[1:][::-1] / r2
        Wo = np.zeros((dim, Eo.size))
        Wo[i0 + 1:] = Vo / r2
        Wo[:i0] = -Vo[::-1] / r2
    else:
        ih = (N + 1) // 2  # index of m = +1/2
        c = off[ih - 1]  # coupling between m = -1/2 and m = +1/2
        de = d[ih:].copy()
        do = d[ih:].copy()
        de[0] += c
        do[0] -= c
        Ee, Ve = tridiag_eigh(de, off[ih:].copy())
        Eo, Vo = tridiag_eigh(do, off[ih:].copy())
        We = np.zeros((dim, Ee.size))
        We[ih:] = Ve / r2
        We[:ih] = Ve[::-1] / r2
        Wo = np.zeros((dim, Eo.size))
        Wo[ih:] = Vo / r2
        Wo[:ih] = -Vo[::-1] / r2
    E = np.concatenate([Ee, Eo])
    W = np.concatenate([We, Wo], axis=1)
    par = np.concatenate([np.ones(Ee.size, dtype=np.int8), -np.ones(Eo.size, dtype=np.int8)])
    order = np.argsort(E, kind="stable")
    return E[order], W[:, order], par[order]


def diagonalize(H: Tridiagonal, params: DimerParams | None = None) -> Spectrum:
    """Full eigen-decomposition.

    At zero bias the Hamiltonian is block-diagonalized by mirror parity
    first, so near-degenerate doublets come out as parity eigenstates.
    """
    if params is None:
        raise ParameterError("diagonalize needs the params that produced H")
    if H.size != params.dim:
        raise ParameterError("matrix size does not match params")
    if params.eps == 0.0 and params.N >= 1:
        E, V, par = _parity_blocks(H, params.N)
        return Spectrum(params, E, _fix_sign(V), par)
    E, V = tridiag_eigh(H.diag, H.off)
    return Spectrum(params, E, _fix_sign(V), None)


def solve(params: DimerParams) -> Spectrum:
    return diagonalize(build_hamiltonian(params), params)


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantumState:
    params: DimerParams
    amps: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=np.complex128)
        if a.shape != (self.params.dim,):
            raise ParameterError(f"state needs {self.params.dim} amplitudes, got {a.shape}")
        object.__setattr__(self, "amps", a)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))


def _check_same(a: DimerParams, b: DimerParams):
    if a != b:
        raise ParameterError(f"params mismatch: {a} vs {b}")


def scs_amplitudes(j: float, theta: float, phi: float) -> np.ndarray:
    """Spin coherent state exp(-i phi Jz) exp(-i theta Jy)|j,j> up to a global phase.

    psi_m = sqrt(C(2j, j+m)) cos(theta/2)^(j+m) sin(theta/2)^(j-m) e^{i(j-m)phi}
    """
    m = m_values(j)
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    tj = 2.0 * j
    logb = 0.5 * (gammaln(tj + 1) - gammaln(j + m + 1) - gammaln(j - m + 1))
    # xlogy handles 0**0 = 1 at the poles; signs of c, s are restored below
    mag = np.exp(logb + xlogy(j + m, abs(c)) + xlogy(j - m, abs(s)))
    sign = np.where((c < 0) & ((j + m) % 2 == 1), -1.0, 1.0) * np.where((s < 0) & ((j - m) % 2 == 1), -1.0, 1.0)
    amps = mag * sign * np.exp(1j * (j - m) * phi)
    return amps / np.linalg.norm(amps)


PREPARATIONS = ("TwinFock", "Fock", "SCS", "Zero", "Pi", "Edge")


def prepare(params: DimerParams, kind: str, *, n: float | None = None,
            theta: float | None = None, phi: float | None = None) -> QuantumState:
    """Named initial preparations.

    TwinFock: n = 0; Fock(n); SCS(theta, phi); Zero = SCS(pi/2, 0);
    Pi = SCS(pi/2, pi); Edge = SCS(theta_edge, 0) on the separatrix.
    """
    j = params.j
    dim = params.dim
    key = kind.lower()
    if key == "twinfock":
        if params.N % 2:
            raise ParameterError("TwinFock needs even N")
        n = 0.0
        key = "fock"
    if key == "fock":
        if n is None:
            raise ParameterError("Fock preparation needs n")
        idx = n + j
        if abs(idx - round(idx)) > 1e-9 or not 0 <= round(idx) < dim:
            raise ParameterError(f"n={n} is not a valid occupation difference for N={params.N}")
        a = np.zeros(dim, dtype=np.complex128)
        a[int(round(idx))] = 1.0
        return QuantumState(params, a, kind)
    if key == "scs":
        if theta is None or phi is None:
            raise ParameterError("SCS preparation needs theta and phi")
        return QuantumState(params, scs_amplitudes(j, theta, phi), kind)
    if key == "zero":
        return QuantumState(params, scs_amplitudes(j, math.pi / 2, 0.0), kind)
    if key == "pi":
        return QuantumState(params, scs_amplitudes(j, math.pi / 2, math.pi), kind)
    if key == "edge":
        from .wkb import edge_theta

        return QuantumState(params, scs_amplitudes(j, edge_theta(params), 0.0), kind)
    raise ParameterError(f"unknown preparation {kind!r}; choose from {PREPARATIONS}")


def evolve(state: QuantumState, spectrum: Spectrum, tau: float) -> QuantumState:
    """psi(tau) = sum_nu exp(-i E_nu t) <E_nu|psi> |E_nu>, with tau = K t."""
    _check_same(state.params, spectrum.params)
    c = spectrum.vectors.T @ state.amps
    ph = np.exp(-1j * (spectrum.energies / state.params.K) * tau)
    return QuantumState(state.params, spectrum.vectors @ (ph * c), state.label)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlochVector:
    S: np.ndarray
    N: int

    @property
    def x(self) -> float:
        return float(self.S[0])

    @property
    def y(self) -> float:
        return float(self.S[1])

    @property
    def z(self) -> float:
        return float(self.S[2])

    @property
    def occupation_diff(self) -> float:
        return self.N * self.z

    @property
    def relative_phase(self) -> float:
        return math.atan2(self.y, self.x)

    @property
    def purity(self) -> float:
        return 0.5 * (1.0 + float(np.dot(self.S, self.S)))

    @property
    def visibility(self) -> float:
        return math.hypot(self.x, self.y)


def _jexp(amps: np.ndarray, j: float):
    jp = jplus_elements(j)
    m = m_values(j)
    # <J+> = sum_m conj(psi_{m+1}) sqrt(..) psi_m
    plus = np.sum(np.conj(amps[1:]) * jp * amps[:-1])
    return plus.real, plus.imag, float(np.sum(m * np.abs(amps) ** 2))


def bloch_vector(state: QuantumState) -> BlochVector:
    """S_i = (2/N) <J_i>."""
    nrm = state.norm
    if abs(nrm - 1.0) > 1e-8:
        raise ParameterError(f"state not normalized (norm={nrm})")
    jx, jy, jz = _jexp(state.amps, state.params.j)
    return BlochVector(np.array([jx, jy, jz]) * (2.0 / state.params.N), state.params.N)


def occupation_distribution(state: QuantumState) -> np.ndarray:
    """P(n) over n = -j..j."""
    return np.abs(state.amps) ** 2


def ldos_quantum(state: QuantumState, spectrum: Spectrum):
    """Exact LDOS p_nu = |<E_nu|psi>|^2."""
    from .analytics import LdosProfile

    p = np.abs(spectrum.overlaps(state)) ** 2
    return LdosProfile(spectrum.params, spectrum.energies.copy(), p, spectrum.parity)


def observable_matrix(spectrum: Spectrum, which: str = "x", levels=None) -> np.ndarray:
    """Matrix of (2/N) J_which in the eigenbasis, optionally restricted to a level subset."""
    V = spectrum.vectors if levels is None else spectrum.vectors[:, levels]
    j = spectrum.params.j
    scale = 2.0 / spectrum.params.N
    if which == "z":
        return scale * (V.T @ (m_values(j)[:, None] * V))
    jp = jplus_elements(j)
    JpV = np.zeros_like(V)
    JpV[1:] = jp[:, None] * V[:-1]
    P = V.T @ JpV  # <nu|J+|mu>, real
    if which == "x":
        return scale * 0.5 * (P + P.T)
    if which == "y":
        return scale * (-0.5j) * (P - P.T)
    raise ParameterError(f"unknown component {which!r}")


def significant_levels(c: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Indices of levels carrying probability above tol (never empty)."""
    p = np.abs(c) ** 2
    idx = np.nonzero(p > tol * p.max())[0]
    return idx


def expectation_series(state: QuantumState, spectrum: Spectrum, taus, which=("x", "y", "z"),
                       tol: float = 1e-14, chunk: int = 2048) -> dict:
    """Bloch components (2/N)<J_i>(tau) on a time grid, evaluated in the eigenbasis."""
    taus = np.asarray(taus, dtype=np.float64)
    c = spectrum.overlaps(state)
    lev = significant_levels(c, tol)
    cs = c[lev]
    Es = spectrum.energies[lev] / state.params.K
    out = {}
    for w in which:
        O = observable_matrix(spectrum, w, lev)
        vals = np.empty(taus.size)
        for s in range(0, taus.size, chunk):
            t = taus[s:s + chunk]
            A = cs[None, :] * np.exp(-1j * np.outer(t, Es))
            vals[s:s + chunk] = np.real(np.sum(np.conj(A) * (A @ O.T), axis=1))
        out[w] = vals
    return out
