"""Classical phase space and WKB quantization on the sphere.

On the sphere of radius R the Hamiltonian reads

    H = K R [ (u_R/2) cos^2(theta) - eps cos(theta) - sin(theta) cos(phi) ],

with u_R = 2 R U / K and eps = E_bias / K.  The classical convention is
R = N/2 (so u_R = u).  Quantization uses R = j + 1/2 by default, which is
exact both for free precession (U = 0) and for the Fock limit (K = 0).

The enclosed area is reduced exactly to a one dimensional integral:
for fixed z = cos(theta) the set {phi : H < E} is an arc of length
2 arccos(c(z)) with c = ((u/2) z^2 - eps z - e) / sqrt(1 - z^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .model import DimerParams, ParameterError

FOUR_PI = 4.0 * math.pi


class WkbError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# classical Hamiltonian and charts
# ---------------------------------------------------------------------------

def classical_hamiltonian(theta, phi, params: DimerParams):
    """(NK/2) [(u/2) cos^2 theta - eps cos theta - sin theta cos phi]."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    ct = np.cos(theta)
    val = 0.5 * params.u * ct ** 2 - params.eps_scaled * ct - np.sin(theta) * np.cos(phi)
    return 0.5 * params.N * params.K * val


def number_phase_hamiltonian(n, phi, params: DimerParams):
    """U n^2 - eps n - K sqrt((N/2)^2 - n^2) cos phi (N/2 radius convention)."""
    n = np.asarray(n, dtype=np.float64)
    R = params.N / 2.0
    if np.any(np.abs(n) > R * (1 + 1e-12)):
        raise ParameterError("|n| must not exceed N/2")
    root = np.sqrt(np.clip(R * R - n * n, 0.0, None))
    return params.U * n ** 2 - params.eps * n - params.K * root * np.cos(phi)


def josephson_hamiltonian(n, phi, params: DimerParams):
    """Pendulum limit E_C (n - n_eps)^2 - E_J cos(phi), up to a constant."""
    n_eps = params.eps / (2.0 * params.U) if params.U != 0 else 0.0
    return params.E_C * (np.asarray(n) - n_eps) ** 2 - params.E_J * np.cos(phi)


def to_number_phase(theta, phi, N: int):
    return (N / 2.0) * np.cos(theta), phi


def from_number_phase(n, phi, N: int):
    return np.arccos(np.clip(np.asarray(n) / (N / 2.0), -1.0, 1.0)), phi


def signed_section(theta_signed):
    """Map the signed section angle (-pi, pi] to (theta, phi) with phi in {0, pi}."""
    t = np.asarray(theta_signed, dtype=np.float64)
    return np.abs(t), np.where(t >= 0, 0.0, math.pi)


# ---------------------------------------------------------------------------
# fixed points (section phi in {0, pi}, signed theta)
# ---------------------------------------------------------------------------

def section_f(theta, u: float, eps: float = 0.0):
    ct = np.cos(theta)
    return 0.5 * u * ct ** 2 - eps * ct - np.sin(theta)


def section_df(theta, u: float, eps: float = 0.0):
    return -0.5 * u * np.sin(2 * theta) + eps * np.sin(theta) - np.cos(theta)


def section_d2f(theta, u: float, eps: float = 0.0):
    return -u * np.cos(2 * theta) + eps * np.cos(theta) + np.sin(theta)


def critical_bias(u: float) -> float:
    """eps_c = (u^(2/3) - 1)^(3/2); a separatrix exists only for |eps| < eps_c."""
    if u <= 1:
        raise ParameterError(f"no separatrix for u={u} <= 1")
    return (u ** (2.0 / 3.0) - 1.0) ** 1.5


def _section_roots(fun, n: int = 4096):
    th = np.linspace(-math.pi, math.pi, n + 1)
    v = fun(th)
    roots = []
    for a, b, fa, fb in zip(th[:-1], th[1:], v[:-1], v[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(fun, a, b, xtol=1e-15, rtol=1e-15, maxiter=200))
    out = []
    for r in roots:
        r = math.remainder(r, 2 * math.pi)
        if r <= -math.pi:
            r += 2 * math.pi
        if not any(abs(math.remainder(r - q, 2 * math.pi)) < 1e-9 for q in out):
            out.append(r)
    return sorted(out)


@dataclass(frozen=True)
class FixedPointSet:
    theta_minus: float
    theta_x: float
    theta_1: float
    theta_2: float
    theta_1p: float
    theta_2p: float
    E_minus: float
    E_x: float
    E_plus: float
    A_c: float
    s_x: float
    s_1p: float
    n_points: int

    @property
    def has_separatrix(self) -> bool:
        return self.n_points == 4


def find_fixed_points(params: DimerParams) -> FixedPointSet:
    """Stationary points of the classical Hamiltonian along the phi in {0, pi} section."""
    u, eps = params.u, params.eps_scaled
    scale = 0.5 * params.N * params.K
    roots = _section_roots(lambda t: section_df(t, u, eps))
    if not roots:
        raise WkbError("no stationary points found on the section")
    f = np.array([section_f(r, u, eps) for r in roots])
    d2 = np.array([section_d2f(r, u, eps) for r in roots])
    side_zero = np.array([math.sin(r) >= 0 for r in roots])
    # on the phi=0 side the phi-direction is stable (minimum); on phi=pi it is a maximum
    minima = [r for r, s, c in zip(roots, side_zero, d2) if s and c > 0]
    maxima = [r for r, s, c in zip(roots, side_zero, d2) if (not s) and c < 0]
    saddles = [r for r, s, c in zip(roots, side_zero, d2) if (s and c < 0) or ((not s) and c > 0)]
    i_min = int(np.argmin(f))
    th_min = roots[i_min]
    nan = math.nan
    A_c = nan
    s_x = s_1p = nan
    if u > 1:
        s_x = math.sqrt(1.0 - u ** (-2.0 / 3.0))
        s_1p = 4 * s_x ** 3 - 3 * s_x
        A_c = FOUR_PI * (1.0 - u ** (-2.0 / 3.0)) ** 1.5
    if len(saddles) == 1 and len(maxima) == 2:
        th_x = saddles[0]
        fx = float(section_f(th_x, u, eps))
        m1, m2 = sorted(maxima, key=lambda t: -section_f(t, u, eps))
        borders = [r for r in _section_roots(lambda t: section_f(t, u, eps) - fx)
                   if abs(math.remainder(r - th_x, 2 * math.pi)) > 1e-6]
        borders = sorted(borders, key=lambda t: -math.cos(t))
        b1 = borders[0] if borders else nan
        b2 = borders[1] if len(borders) > 1 else nan
        Emax = float(max(section_f(m1, u, eps), section_f(m2, u, eps)))
        return FixedPointSet(th_min, th_x, m1, m2, b1, b2, float(scale * f[i_min]), scale * fx,
                             scale * Emax, A_c, s_x, s_1p, 4)
    th_max = roots[int(np.argmax(f))]
    return FixedPointSet(th_min, nan, th_max, nan, nan, nan, float(scale * f[i_min]), nan,
                         scale * float(np.max(f)), A_c, s_x, s_1p, 2)


def critical_quartic(u: float):
    """Coefficients (highest power first) of the quartic in s = cos(theta) at eps = eps_c."""
    ec = critical_bias(u)
    fc = -0.5 * u + 1.5 * u ** (1.0 / 3.0)
    return np.array([u * u / 4.0, -ec * u, 1.0 - fc * u + ec * ec, 2 * ec * fc, fc * fc - 1.0])


def edge_theta(params: DimerParams) -> float:
    """Signed section angle where the separatrix crosses the phi = 0 side (n > 0 branch)."""
    if params.u <= 1:
        raise ParameterError("Edge preparation needs u > 1 (no separatrix otherwise)")
    fp = find_fixed_points(params)
    if not fp.has_separatrix:
        raise ParameterError("no separatrix at this bias")
    u, eps = params.u, params.eps_scaled
    fx = fp.E_x / (0.5 * params.N * params.K)
    g = lambda t: section_f(t, u, eps) - fx
    # the crossing lies between the saddle direction and the minimum, cos(theta) > 0
    roots = [r for r in _section_roots(g) if abs(math.remainder(r - fp.theta_x, 2 * math.pi)) > 1e-6]
    roots = [r for r in roots if math.cos(r) > 0] or roots
    r = max(roots, key=lambda t: math.cos(t))
    # polish
    lo, hi = r - 1e-6, r + 1e-6
    if g(lo) * g(hi) < 0:
        r = brentq(g, lo, hi, xtol=1e-14, rtol=1e-15)
    return float(r)


# ---------------------------------------------------------------------------
# enclosed area
# ---------------------------------------------------------------------------

def _breakpoints(e: float, u: float, eps: float) -> np.ndarray:
    # real roots in (-1, 1) of ((u/2) z^2 - eps z - e)^2 - (1 - z^2)
    a, b, c = u / 2.0, -eps, -e
    q = np.array([a * a, 2 * a * b, b * b + 2 * a * c + 1.0, 2 * b * c, c * c - 1.0])
    q = np.trim_zeros(q, "f")
    r = np.roots(q) if q.size > 1 else np.empty(0)
    r = np.sort(r[np.abs(r.imag) < 1e-7].real)
    r = r[(r > -1.0) & (r < 1.0)]
    return np.concatenate([[-1.0], r, [1.0]])


def _arc(z, e, u, eps):
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    num = 0.5 * u * z * z - eps * z - e
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(s > 0, num / np.where(s > 0, s, 1.0), np.where(num < 0, -np.inf, np.inf))
    return 2.0 * np.arccos(np.clip(c, -1.0, 1.0))


def area_quad(e: float, u: float, eps: float = 0.0) -> float:
    """Area (sr) of {H < e} for the unit-radius Hamiltonian, adaptive quadrature."""
    pts = _breakpoints(e, u, eps)
    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a < 1e-15:
            continue
        tot += quad(lambda z: float(_arc(np.array(z), e, u, eps)), a, b,
                    epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return tot


_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def area_fast(e: float, u: float, eps: float = 0.0) -> float:
    """Same area using Gauss-Legendre after a cosine map on every breakpoint interval.

    The map z = (a+b)/2 - (b-a)/2 cos(t) removes the square-root behaviour of the
    integrand at turning points.
    """
    pts = _breakpoints(e, u, eps)
    a = pts[:-1]
    b = pts[1:]
    keep = b - a > 1e-15
    a, b = a[keep], b[keep]
    t = 0.5 * math.pi * (_GL_X + 1.0)
    wt = 0.5 * math.pi * _GL_W
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    z = mid - half * np.cos(t)[None, :]
    jac = half * np.sin(t)[None, :]
    return float(np.sum(_arc(z, e, u, eps) * jac * wt[None, :]))


def _radius(params: DimerParams, radius) -> float:
    if radius in (None, "semiclassical"):
        return params.j + 0.5
    if radius == "classical":
        return params.N / 2.0
    if radius == "exact":
        return math.sqrt(params.j * (params.j + 1.0))
    return float(radius)


def action_area(E, params: DimerParams, radius="classical", method: str = "fast"):
    """Phase-space area (sr) enclosed by the contour H = E.

    radius selects the sphere radius R ('classical' = N/2, 'semiclassical' = j+1/2,
    'exact' = sqrt(j(j+1)) or a number).
    """
    R = _radius(params, radius)
    uR = 2.0 * R * params.U / params.K
    eps = params.eps_scaled
    lo, hi = energy_bounds(uR, eps)
    fn = area_fast if method == "fast" else area_quad
    E = np.asarray(E, dtype=np.float64)
    e = E / (params.K * R)
    tol = 1e-9 * max(1.0, hi - lo)
    if np.any(e < lo - tol) or np.any(e > hi + tol):
        raise ParameterError(f"energy outside [{lo * params.K * R}, {hi * params.K * R}]")
    out = np.array([fn(float(v), uR, eps) for v in np.atleast_1d(e)])
    out = np.clip(out, 0.0, FOUR_PI)
    return out.reshape(E.shape) if E.ndim else float(out[0])


@lru_cache(maxsize=256)
def energy_bounds(u: float, eps: float = 0.0):
    """(min, max) of the unit-radius Hamiltonian (u/2) z^2 - eps z - sin(theta) cos(phi)."""
    roots = _section_roots(lambda t: section_df(t, u, eps))
    vals = [section_f(r, u, eps) for r in roots] + [section_f(0.0, u, eps), section_f(math.pi, u, eps)]
    return float(min(vals)), float(max(vals))


# ---------------------------------------------------------------------------
# action table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionTable:
    """A(E) tabulated on a dense energy grid with monotone interpolants.

    Energies are stored in units of K R (dimensionless e) and exposed in
    absolute units through the methods.
    """

    params: DimerParams
    R: float
    e: np.ndarray
    A: np.ndarray
    e_x: float
    _fwd: PchipInterpolator = field(repr=False, compare=False)
    _inv: PchipInterpolator = field(repr=False, compare=False)

    @property
    def scale(self) -> float:
        return self.params.K * self.R

    @property
    def E_min(self) -> float:
        return float(self.e[0] * self.scale)

    @property
    def E_max(self) -> float:
        return float(self.e[-1] * self.scale)

    @property
    def E_x(self) -> float:
        return self.e_x * self.scale

    def area(self, E):
        e = np.clip(np.asarray(E, dtype=np.float64) / self.scale, self.e[0], self.e[-1])
        return np.clip(self._fwd(e), 0.0, FOUR_PI)

    def energy(self, A):
        a = np.clip(np.asarray(A, dtype=np.float64), 0.0, FOUR_PI)
        return self._inv(a) * self.scale

    def omega(self, E, rel_step: float = 1e-4, per_island: bool = True):
        """Classical frequency h / A'(E) from a centred difference on the interpolant.

        Above the separatrix at zero bias A(E) covers two congruent islands.  The
        orbit frequency (per_island=True) uses the single-island area; with
        per_island=False the total area gives the inverse density of states.
        """
        E = np.asarray(E, dtype=np.float64)
        d = rel_step * (self.E_max - self.E_min)
        lo = np.maximum(E - d, self.E_min)
        hi = np.minimum(E + d, self.E_max)
        dA = (self.area(hi) - self.area(lo)) / (hi - lo)
        if per_island and np.isfinite(self.e_x) and self.params.eps == 0.0:
            dA = np.where(E > self.E_x, 0.5 * dA, dA)
        with np.errstate(divide="ignore"):
            return np.where(dA > 0, self.params.h / dA, np.inf)


def _table_grid(lo: float, hi: float, ex: float | None, n: int):
    x = np.linspace(0.0, 1.0, n)
    e = lo + (hi - lo) * (0.5 - 0.5 * np.cos(math.pi * x))
    extra = []
    if ex is not None and lo < ex < hi:
        span = hi - lo
        g = np.geomspace(1e-10, 0.1, 240) * span
        extra = [ex - g, ex + g, [ex]]
    e = np.unique(np.concatenate([e] + extra))
    return e[(e >= lo) & (e <= hi)]


@lru_cache(maxsize=64)
def _cached_table(uR: float, eps: float, n: int):
    lo, hi = energy_bounds(uR, eps)
    ex = None
    if uR > 1 and abs(eps) < critical_bias(uR):
        fp = find_fixed_points(DimerParams(N=2, U=uR / 2.0, K=1.0, eps=eps))
        ex = fp.E_x  # N=2 makes NK/2 = 1, so this is the unit-radius saddle value
    e = _table_grid(lo, hi, ex, n)
    A = np.array([area_fast(float(v), uR, eps) for v in e])
    A[0] = 0.0
    A[-1] = FOUR_PI
    return e, A, ex


def action_table(params: DimerParams, radius="semiclassical", n: int = 2000) -> ActionTable:
    R = _radius(params, radius)
    uR = 2.0 * R * params.U / params.K
    e, A, ex = _cached_table(float(uR), float(params.eps_scaled), int(n))
    if np.any(np.diff(A) < -1e-10):
        raise WkbError("area table is not monotone; quadrature too coarse")
    A = np.maximum.accumulate(A)
    # strictly increasing copy for the inverse
    keep = np.concatenate([[True], np.diff(A) > 1e-13])
    fwd = PchipInterpolator(e, A, extrapolate=False)
    inv = PchipInterpolator(A[keep], e[keep], extrapolate=False)
    return ActionTable(params, R, e, A, math.nan if ex is None else ex, fwd, inv)


def classical_frequency(E, params: DimerParams, table: ActionTable | None = None):
    """omega(E) = h / A'(E)."""
    tab = table or action_table(params, radius="classical")
    E = np.asarray(E, dtype=np.float64)
    if np.any(E <= tab.E_min) or np.any(E >= tab.E_max):
        raise ParameterError("energy must lie strictly between the extreme energies")
    if np.isfinite(tab.e_x) and np.any(np.abs(E - tab.E_x) < 1e-12 * tab.scale):
        raise ParameterError("frequency vanishes at the saddle energy")
    return tab.omega(E)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WkbSpectrum:
    params: DimerParams
    energies: np.ndarray
    omega: np.ndarray
    kind: np.ndarray  # 'sea' | 'island'
    nu_x: float
    near_separatrix: np.ndarray
    n_island: int

    def __len__(self):
        return self.energies.size


def wkb_levels(params: DimerParams, radius="semiclassical", table: ActionTable | None = None,
               near_window: float = 2.0) -> WkbSpectrum:
    """Levels from A(E_nu) = (nu + 1/2) h.

    At zero bias the two islands are quantized separately (each level counted
    twice); the number of sea levels is fixed so that the total is N + 1.
    """
    tab = table or action_table(params, radius=radius)
    h = params.h
    dim = params.dim
    has_islands = np.isfinite(tab.e_x) and params.eps == 0.0
    if has_islands:
        A_x = float(tab.area(tab.E_x))
        n_isl = int(math.floor((FOUR_PI - A_x) / (2 * h) + 0.5))
        n_isl = max(0, min(n_isl, dim // 2))
    else:
        A_x = float(tab.area(tab.E_x)) if np.isfinite(tab.e_x) else math.nan
        n_isl = 0
    n_sea = dim - 2 * n_isl
    sea = tab.energy((np.arange(n_sea) + 0.5) * h)
    isl = np.empty(0)
    if n_isl:
        # single island area measured from its top: (4 pi - A(E)) / 2 = (k + 1/2) h
        isl = tab.energy(FOUR_PI - 2.0 * (np.arange(n_isl) + 0.5) * h)
        isl = np.repeat(isl, 2)
    E = np.concatenate([sea, isl])
    kind = np.array(["sea"] * n_sea + ["island"] * (2 * n_isl))
    order = np.argsort(E, kind="stable")
    E, kind = E[order], kind[order]
    if np.any(~np.isfinite(E)):
        raise WkbError("level inversion failed")
    nu_x = A_x / h if np.isfinite(A_x) else math.nan
    omega = tab.omega(E)
    if np.isfinite(nu_x):
        near = np.abs(np.arange(dim) + 0.5 - nu_x) <= near_window
    else:
        near = np.zeros(dim, dtype=bool)
    return WkbSpectrum(params, E, omega, kind, nu_x, near, n_isl)


def omega_x(params: DimerParams) -> float:
    """Near-separatrix level spacing omega_J / log(N / sqrt(u))."""
    return params.omega_J / math.log(params.N / math.sqrt(params.u))


def separatrix_levels(params: DimerParams, nu, nu_x: float, b: float | None = None, iterations: int = 1):
    """Near-separatrix levels from the logarithmic area law.

    Solves (nu + 1/2 - nu_x) = (1/pi) (dE/omega_J) log(b N K / |dE|) by fixed-point
    iteration started from dE = omega_J (nu + 1/2 - nu_x).  One iteration gives
    the closed-form estimate E_x + pi omega_J dn / log(b (N/sqrt u) / |dn|).
    """
    if b is None:
        from .analytics import load_constants

        b = load_constants()["separatrix_b"]["value"]
    dn = np.asarray(nu, dtype=np.float64) + 0.5 - nu_x
    wJ = params.omega_J
    NK = params.N * params.K
    dE = wJ * dn
    for _ in range(max(1, int(iterations))):
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.log(b * NK / np.abs(dE))
        L = np.maximum(L, 1.0)
        dE = math.pi * wJ * dn / L
    return params.E_x + dE
