"""Stratonovich-Wigner-Weyl correspondence for a spin j.

The kernel is P(Omega) = sqrt(4 pi / (2j+1)) sum_{l,m} Y^{lm}(Omega)^* T^{lm} with the
multipole operators

    T^{lm} = sum_{m'} (-1)^(j-m') sqrt(2l+1) (j l j; -m' m m'') |m'><m''|.

A_W(Omega) = tr[P(Omega) A] is used for states and observables alike.
With this single map the identity goes to 1, a normalized density matrix
integrates to 1 against dOmega/h, and tr[AB] = int A_W B_W dOmega/h.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.special import eval_legendre, gammaln, sph_harm_y

from .kernels import multipole_threej_table, threej
from .model import DimerParams, ParameterError, QuantumState, m_values

MAX_TWO_J = 200


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol (integer or half-integer arguments)."""
    return threej(j1, j2, j3, m1, m2, m3)


# ---------------------------------------------------------------------------
# multipole basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultipoleBasis:
    """3j data for the multipole operators of one spin j."""

    two_j: int
    table: np.ndarray = field(repr=False)  # [l, l+m, a] -> 3j(j l j; -m' m m'-m), m' = a - j

    @property
    def j(self) -> float:
        return self.two_j / 2.0

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def lmax(self) -> int:
        return self.two_j

    def _entries(self, l: int, m: int):
        dim = self.dim
        a = np.arange(dim)
        b = a - m
        ok = (b >= 0) & (b < dim)
        a, b = a[ok], b[ok]
        mp = a - self.j
        sign = np.where(np.rint(self.j - mp).astype(int) % 2, -1.0, 1.0)
        vals = sign * math.sqrt(2 * l + 1) * self.table[l, l + m, a]
        return a, b, vals

    def operator(self, l: int, m: int) -> np.ndarray:
        """Dense T^{lm}."""
        if not (0 <= l <= self.lmax and abs(m) <= l):
            raise ParameterError(f"invalid multipole ({l}, {m})")
        T = np.zeros((self.dim, self.dim))
        a, b, v = self._entries(l, m)
        T[a, b] = v
        return T

    def coefficients(self, A: np.ndarray) -> np.ndarray:
        """c[l, l+m] = tr[T^{lm} A] for a square operator A."""
        A = np.asarray(A)
        if A.shape != (self.dim, self.dim):
            raise ParameterError("operator has wrong dimension")
        c = np.zeros((self.lmax + 1, 2 * self.lmax + 1), dtype=np.complex128)
        for l in range(self.lmax + 1):
            for m in range(-l, l + 1):
                a, b, v = self._entries(l, m)
                c[l, l + m] = np.sum(v * A[b, a])
        return c


@lru_cache(maxsize=16)
def multipole_basis(two_j: int) -> MultipoleBasis:
    if two_j > MAX_TWO_J:
        raise ParameterError(f"full transform is limited to 2j <= {MAX_TWO_J}; use the closed forms")
    return MultipoleBasis(int(two_j), multipole_threej_table(int(two_j)))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereGrid:
    """Product grid over (cos theta, phi) with quadrature weights for dOmega."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray  # shape (n_theta,), multiply by dphi
    kind: str

    @property
    def dphi(self) -> float:
        return 2.0 * math.pi / self.phi.size

    @property
    def shape(self):
        return (self.theta.size, self.phi.size)

    def integrate(self, F: np.ndarray) -> float:
        """int F dOmega for F of shape (n_theta, n_phi)."""
        return float(np.sum(self.weights[:, None] * F) * self.dphi)


def gauss_grid(n_theta: int, n_phi: int) -> SphereGrid:
    """Gauss-Legendre in cos(theta) times uniform phi; exact for band limit < min(2 n_theta, n_phi)."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    x, w = x[::-1], w[::-1]
    phi = -math.pi + 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    return SphereGrid(np.arccos(x), phi, w, "gauss")


def uniform_grid(n_theta: int = 512, n_phi: int = 512) -> SphereGrid:
    """Midpoint grid uniform in (cos theta, phi), used for export."""
    x = 1.0 - (np.arange(n_theta) + 0.5) * (2.0 / n_theta)
    phi = -math.pi + 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    return SphereGrid(np.arccos(x), phi, np.full(n_theta, 2.0 / n_theta), "uniform")


def exact_grid(two_j: int, power: int = 2) -> SphereGrid:
    """Smallest Gauss grid that integrates products of `power` spin-j symbols exactly."""
    band = power * two_j
    return gauss_grid(band // 2 + 2, band + 2)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WignerField:
    j: float
    coeffs: np.ndarray | None
    grid: SphereGrid
    values: np.ndarray
    convention: str = "int rho_W dOmega/h = 1 for states; symbol of identity = 1"

    @property
    def h(self) -> float:
        return 4.0 * math.pi / (2 * self.j + 1)

    def integral(self) -> float:
        """int F dOmega / h."""
        return self.grid.integrate(self.values) / self.h

    def overlap(self, other: "WignerField") -> float:
        """int F G dOmega / h."""
        return self.grid.integrate(self.values * other.values) / self.h


@lru_cache(maxsize=32)
def _ylm_theta(lmax: int, theta_key: tuple):
    th = np.array(theta_key)
    Y = np.zeros((lmax + 1, 2 * lmax + 1, th.size))
    for l in range(lmax + 1):
        for m in range(-l, l + 1):
            Y[l, l + m] = np.real(sph_harm_y(l, m, th, 0.0))
    return Y


def synthesize(coeffs: np.ndarray, grid: SphereGrid, two_j: int) -> np.ndarray:
    """F(Omega) = sqrt(4 pi / (2j+1)) sum_lm c_lm Y^{lm}(Omega)^*."""
    lmax = coeffs.shape[0] - 1
    Y = _ylm_theta(lmax, tuple(np.round(grid.theta, 15)))
    out = np.zeros((grid.theta.size, grid.phi.size), dtype=np.complex128)
    for m in range(-lmax, lmax + 1):
        ls = np.arange(abs(m), lmax + 1)
        Fm = np.einsum("l,lt->t", coeffs[ls, ls + m], Y[ls, ls + m])
        out += Fm[:, None] * np.exp(-1j * m * grid.phi)[None, :]
    return math.sqrt(4.0 * math.pi / (two_j + 1)) * out


def _as_operator(obj, dim: int) -> np.ndarray:
    if isinstance(obj, QuantumState):
        a = obj.amps
        return np.outer(a, np.conj(a))
    A = np.asarray(obj)
    if A.ndim == 1:
        if A.size != dim:
            raise ParameterError("vector has wrong dimension")
        return np.outer(A, np.conj(A))
    return A


def weyl_symbol(A, j: float, grid: SphereGrid, check_real: bool = True) -> WignerField:
    """Symbol of an operator, density matrix, state vector or QuantumState."""
    two_j = int(round(2 * j))
    basis = multipole_basis(two_j)
    op = _as_operator(A, basis.dim)
    c = basis.coefficients(op)
    vals = synthesize(c, grid, two_j)
    herm = np.allclose(op, np.conj(op.T), atol=1e-12)
    if herm and check_real:
        if np.max(np.abs(vals.imag), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(vals.real))):
            raise ArithmeticError("symbol of a Hermitian operator is not real")
        vals = vals.real
    return WignerField(j, c, grid, vals)


def state_to_wigner(state, grid: SphereGrid | None = None, j: float | None = None) -> WignerField:
    if isinstance(state, QuantumState):
        j = state.params.j
    if j is None:
        raise ParameterError("j is required for raw arrays")
    grid = grid or exact_grid(int(round(2 * j)))
    return weyl_symbol(state, j, grid)


def coherent_wigner_profile(j: float, cos_gamma) -> np.ndarray:
    """Wigner function of a spin coherent state vs cos of the angle to its centre."""
    two_j = int(round(2 * j))
    x = np.asarray(cos_gamma, dtype=np.float64)
    out = np.zeros_like(x)
    lg = gammaln(two_j + 1)
    for l in range(two_j + 1):
        logc = lg - 0.5 * (gammaln(two_j + l + 2) + gammaln(two_j - l + 1))
        cl = math.exp(logc) * math.sqrt(4 * math.pi * (2 * l + 1) / (two_j + 1))
        # Y^{l0} = sqrt((2l+1)/4pi) P_l
        out += cl * math.sqrt((2 * l + 1) / (4 * math.pi)) * eval_legendre(l, x)
    return out


def coherent_wigner_closed_form(j: float, grid: SphereGrid, theta0: float = 0.0, phi0: float = 0.0) -> WignerField:
    """Closed-form l-sum for |j, j> rotated to (theta0, phi0)."""
    th = grid.theta[:, None]
    ph = grid.phi[None, :]
    cg = (np.cos(th) * math.cos(theta0) + np.sin(th) * math.sin(theta0) * np.cos(ph - phi0))
    return WignerField(j, None, grid, coherent_wigner_profile(j, cg))


# ---------------------------------------------------------------------------
# semiclassical approximations in the (n, phi) chart
# ---------------------------------------------------------------------------

def scs_widths(N: int, widths: str = "isotropic"):
    """(a, b): standard deviations of phi and n for an equatorial coherent state.

    'isotropic' matches the minimal Gaussian exp(-(N+1) theta^2 / 2) of the exact
    coherent state; 'chart' uses a = 1/sqrt(2(N+1)), b = sqrt((N+1)/2).
    """
    dim = N + 1
    if widths == "isotropic":
        return 1.0 / math.sqrt(dim), math.sqrt(dim) / 2.0
    if widths == "chart":
        return 1.0 / math.sqrt(2.0 * dim), math.sqrt(dim / 2.0)
    raise ParameterError(f"unknown width convention {widths!r}")


def scs_gaussian(n, phi, N: int, n0: float = 0.0, phi0: float = 0.0, widths: str = "isotropic"):
    """(1/ab) exp(-dphi^2/2a^2 - dn^2/2b^2), normalized against dn dphi / 2pi."""
    a, b = scs_widths(N, widths)
    dphi = np.angle(np.exp(1j * (np.asarray(phi) - phi0)))
    dn = np.asarray(n) - n0
    return np.exp(-dphi ** 2 / (2 * a * a) - dn ** 2 / (2 * b * b)) / (a * b)


def fock_marginal(n, n0: float, width: float = 0.5):
    """Regularized delta(n - n0) as a unit-area box of the given half width."""
    n = np.asarray(n, dtype=np.float64)
    return np.where(np.abs(n - n0) <= width, 1.0 / (2 * width), 0.0)


def microcanonical_weight(E_nu: float, omega_nu: float, energies, width: float):
    """omega(E_nu) delta(H - E_nu) with the delta smoothed to a box of full width `width`."""
    E = np.asarray(energies, dtype=np.float64)
    return omega_nu * np.where(np.abs(E - E_nu) <= width / 2, 1.0 / width, 0.0)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def field_rows(field_: WignerField):
    """(phi, cos theta, value) rows for CSV export."""
    ct = np.cos(field_.grid.theta)
    P, C = np.meshgrid(field_.grid.phi, ct)
    return np.column_stack([P.ravel(), C.ravel(), np.asarray(field_.values).real.ravel()])


def field_header(field_: WignerField) -> dict:
    return {
        "j": field_.j,
        "grid": field_.grid.kind,
        "shape": list(field_.grid.shape),
        "normalization": field_.convention,
    }


def ldos_phase_space(state: QuantumState, spectrum, grid: SphereGrid | None = None) -> np.ndarray:
    """p_nu = int rho_W^(nu) rho_W^(psi) dOmega/h with exact eigenstate Wigner functions."""
    j = state.params.j
    grid = grid or exact_grid(int(round(2 * j)))
    rho = state_to_wigner(state, grid)
    out = np.empty(len(spectrum))
    for k in range(len(spectrum)):
        fk = weyl_symbol(spectrum.vectors[:, k].astype(np.complex128), j, grid)
        out[k] = rho.overlap(fk)
    return out
