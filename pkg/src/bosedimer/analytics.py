"""Semiclassical predictions: LDOS line shapes, participation numbers,
oscillation frequencies, phase distributions, long-time averages,
fluctuation RMS and revival times.
"""
from __future__ import annotations

from dataclasses import dataclass
import json
import math
from pathlib import Path
import warnings

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e, k0e

from .model import DimerParams, ParameterError, Spectrum
from .wkb import ActionTable, WkbSpectrum, action_table, edge_theta

SYMMETRIC = ("zero", "pi", "twinfock")
CONSTANTS_FILE = Path(__file__).with_name("constants.json")


def load_constants() -> dict:
    with open(CONSTANTS_FILE, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# profile type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LdosProfile:
    params: DimerParams
    energies: np.ndarray
    weights: np.ndarray
    parity: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != np.shape(self.energies):
            raise ValueError("weights and energies differ in shape")
        if np.any(w < -1e-14) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("LDOS weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))

    @property
    def M(self) -> float:
        """Participation number 1 / sum p^2."""
        p = self.weights
        return float(1.0 / np.sum(p * p))

    @property
    def mean_energy(self) -> float:
        p = self.weights
        return float(np.sum(p * self.energies))

    @property
    def width(self) -> float:
        p = self.weights
        mu = np.sum(p * self.energies)
        return float(math.sqrt(max(np.sum(p * (self.energies - mu) ** 2), 0.0)))

    @property
    def omega_osc(self) -> float:
        """Weight-averaged local level spacing (the frequency content of the profile)."""
        E = self.energies
        if E.size < 2:
            return 0.0
        order = np.argsort(E)
        sp = np.gradient(E[order])
        return float(np.sum(self.weights[order] * sp))

    def tv_distance(self, other: "LdosProfile") -> float:
        if other.weights.size != self.weights.size:
            raise ValueError("profiles live on different level sets")
        return 0.5 * float(np.sum(np.abs(self.weights - other.weights)))

    def support(self, threshold: float = 3.0) -> str:
        """'discrete' when fewer than `threshold` levels participate, else 'continuous'."""
        return "discrete" if self.M < threshold else "continuous"


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def bessel_I0(x, scaled: bool = False):
    """Modified Bessel I0; scaled=True returns exp(-|x|) I0(x)."""
    x = np.asarray(x, dtype=np.float64)
    v = i0e(x)
    return v if scaled else v * np.exp(np.abs(x))


def bessel_K0(x, scaled: bool = False):
    """Modified Bessel K0 for x > 0; scaled=True returns exp(x) K0(x)."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ParameterError("K0 needs x > 0")
    v = k0e(x)
    return v if scaled else v * np.exp(-x)


def _level_arrays(levels, params):
    if isinstance(levels, Spectrum):
        return levels.energies, levels.parity
    if isinstance(levels, WkbSpectrum):
        return levels.energies, None
    return np.asarray(levels, dtype=np.float64), None


def _gaussian_rates(params: DimerParams, widths: str):
    """alpha, beta: coefficients of phi^2 and n^2 energy scales for the Gaussian preparation."""
    from .wigner import scs_widths

    a, b = scs_widths(params.N, widths)
    alpha = (4.0 / (params.N * params.K)) / (2 * a * a)
    beta = 1.0 / (2 * b * b * params.U)
    return alpha, beta


def _omega_levels(tab: ActionTable, E):
    # inverse density of states: island doublets share the total area
    w = tab.omega(E, per_island=False)
    return np.where(np.isfinite(w), w, 0.0)


# ---------------------------------------------------------------------------
# closed-form envelopes
# ---------------------------------------------------------------------------

def ldos_envelope(prep: str, params: DimerParams, E, widths: str = "chart",
                  cutoff: str = "log", table: ActionTable | None = None) -> np.ndarray:
    """Unnormalized closed-form LDOS envelopes for Zero, Pi, Edge and TwinFock.

    Zero:  (omega/omega_J) exp(-(alpha+beta) d/2) I0((alpha-beta) d/2),        d = E - E_minus
    Pi:    (omega/omega_J) exp((alpha-beta) d/2) int_{|t|<T} exp(-(alpha+beta)|d| cosh(2t)/2) dt,
           d = E - E_x; the untruncated integral is K0((alpha+beta)|d|/2)
    Edge:  (omega/omega_J) exp(-(d/omega_J)^2 / (N+1))
    TwinFock: omega(E) [1 - (2E/NK)^2]^(-1/2) inside the sea, 0 outside

    alpha = 2/(NK a^2), beta = 1/(2 U b^2) with (a, b) the phase and number widths.
    With the 'chart' widths this gives exp[(2/K - 1/(2NU)) d] K0[(2/K + 1/(2NU)) |d|]
    for Pi.  The t cutoff is T = (pi/2) omega_J / omega(E) ('log', from the finite
    extent of phase space) or (1/pi) omega(E)/omega_J ('linear').
    """
    if params.u <= 0:
        raise ParameterError("envelopes need u > 0")
    tab = table or action_table(params)
    E = np.asarray(E, dtype=np.float64)
    om = _omega_levels(tab, E)
    wJ = params.omega_J
    key = prep.lower()
    if key == "zero":
        al, be = _gaussian_rates(params, widths)
        d = np.clip(E - params.E_minus, 0.0, None)
        x = 0.5 * (al - be) * d
        # exp(-(al+be) d/2) I0(x) = exp(-(al+be) d/2 + |x|) i0e(x)
        return (om / wJ) * np.exp(-0.5 * (al + be) * d + np.abs(x)) * i0e(x)
    if key == "pi":
        al, be = _gaussian_rates(params, widths)
        d = E - params.E_x
        ad = np.maximum(np.abs(d), 1e-12 * params.N * params.K)
        if cutoff == "log":
            T = 0.5 * math.pi * wJ / np.maximum(om, 1e-300)
            T = np.minimum(T, 0.5 * np.log(np.pi ** 2 * params.N * params.K / ad) + 1.0)
        elif cutoff == "linear":
            T = om / (math.pi * wJ)
        elif cutoff == "none":
            T = np.full(E.shape, np.inf)
        else:
            raise ParameterError(f"unknown cutoff {cutoff!r}")
        x = 0.5 * (al + be) * ad
        out = np.empty(E.shape)
        for i in np.ndindex(E.shape):
            xi = float(x[i])
            Ti = float(T[i])
            if math.isinf(Ti):
                integral = float(k0e(xi))  # scaled by exp(x)
            else:
                integral = 2.0 * quad(lambda t: math.exp(-xi * (math.cosh(2 * t) - 1.0)), 0.0, Ti,
                                      limit=200)[0]
            # exp((al-be) d/2) * exp(-x) * integral_scaled
            out[i] = math.exp(0.5 * (al - be) * float(d[i]) - xi) * integral
        return (om / wJ) * out
    if key == "edge":
        d = E - params.E_x
        return (om / wJ) * np.exp(-(d / wJ) ** 2 / params.dim)
    if key == "twinfock":
        y = 2.0 * E / (params.N * params.K)
        inside = np.abs(y) < 1.0
        out = np.zeros(E.shape)
        out[inside] = om[inside] / np.sqrt(1.0 - y[inside] ** 2)
        return out
    raise ParameterError(f"no closed-form LDOS for {prep!r}")


# ---------------------------------------------------------------------------
# stripe (phase-space overlap) evaluation
# ---------------------------------------------------------------------------

def cloud_energies(prep: str, params: DimerParams, R: float, widths: str = "isotropic",
                   n_grid: int = 1200, span: float = 6.0):
    """Energies and weights of a deterministic grid over the preparation's Wigner cloud.

    Energies use the radius-R Hamiltonian U R^2 z^2 - eps R z - K R sin(theta) cos(phi).
    """
    key = prep.lower()
    U, K, eps = params.U, params.K, params.eps
    if key in ("twinfock", "fock"):
        phi = -math.pi + 2 * math.pi * (np.arange(200000) + 0.5) / 200000
        z = 0.0
        Hs = U * R * R * z * z - eps * R * z - K * R * math.sqrt(1 - z * z) * np.cos(phi)
        return Hs, np.full(phi.size, 1.0 / phi.size)
    if key == "zero":
        th0, ph0 = math.pi / 2, 0.0
    elif key == "pi":
        th0, ph0 = math.pi / 2, math.pi
    elif key == "edge":
        t = edge_theta(params)
        th0, ph0 = abs(t), (0.0 if t >= 0 else math.pi)
    else:
        raise ParameterError(f"no cloud for {prep!r}")
    g = np.linspace(-span, span, n_grid)
    X, Y = np.meshgrid(g, g, indexing="ij")
    w = np.exp(-0.5 * (X ** 2 + Y ** 2))
    if widths == "chart":
        from .wigner import scs_widths

        a, b = scs_widths(params.N, "chart")
        Rn = params.N / 2.0
        n = Rn * math.cos(th0) + b * X
        phi = ph0 + a * Y
        ok = np.abs(n) <= Rn
        z = np.clip(n / Rn, -1, 1)
        st = np.sqrt(1 - z * z)
        Hs = U * R * R * z * z - eps * R * z - K * R * st * np.cos(phi)
        w = np.where(ok, w, 0.0)
    else:
        sigma = 1.0 / math.sqrt(params.dim)
        c = np.array([math.sin(th0) * math.cos(ph0), math.sin(th0) * math.sin(ph0), math.cos(th0)])
        et = np.array([math.cos(th0) * math.cos(ph0), math.cos(th0) * math.sin(ph0), -math.sin(th0)])
        ep = np.array([-math.sin(ph0), math.cos(ph0), 0.0])
        x = sigma * X
        y = sigma * Y
        r = np.hypot(x, y)
        sinc = np.where(r > 0, np.sin(r) / np.where(r > 0, r, 1.0), 1.0)
        Sx = np.cos(r) * c[0] + sinc * (x * et[0] + y * ep[0])
        Sz = np.cos(r) * c[2] + sinc * (x * et[2] + y * ep[2])
        Hs = U * R * R * Sz ** 2 - eps * R * Sz - K * R * Sx
    w = w.ravel()
    return Hs.ravel(), w / w.sum()


def ldos_stripe(prep: str, params: DimerParams, E, table: ActionTable | None = None,
                widths: str = "isotropic", n_grid: int = 1200) -> np.ndarray:
    """Overlap of the preparation's cloud with each level's phase-space stripe.

    Level nu owns the region h/2 on either side of its contour in enclosed area,
    i.e. the micro-canonical Wigner function smeared over one Planck cell.
    """
    tab = table or action_table(params)
    E = np.asarray(E, dtype=np.float64)
    Hs, ws = cloud_energies(prep, params, tab.R, widths, n_grid)
    order = np.argsort(Hs, kind="stable")
    Hs = Hs[order]
    cw = np.concatenate([[0.0], np.cumsum(ws[order])])

    def F(x):
        return cw[np.searchsorted(Hs, x)]

    h = params.h
    A = tab.area(E)
    lo = np.where(A - h / 2 <= 0, -np.inf, tab.energy(A - h / 2))
    hi = np.where(A + h / 2 >= 4 * math.pi, np.inf, tab.energy(A + h / 2))
    return np.clip(F(hi) - F(lo), 0.0, None)


def ldos_semiclassical(prep: str, params: DimerParams, levels, method: str = "stripe",
                       widths: str | None = None, cutoff: str = "log",
                       table: ActionTable | None = None) -> LdosProfile:
    """Semiclassical LDOS at the given levels, normalized over the level set.

    For mirror-symmetric preparations (Zero, Pi, TwinFock) the odd levels get zero
    weight when parity labels are available.
    """
    if params.eps != 0.0:
        raise ParameterError("semiclassical LDOS is implemented for zero bias")
    key = prep.lower()
    if key not in ("zero", "pi", "edge", "twinfock"):
        raise ParameterError(f"no semiclassical LDOS for {prep!r}")
    E, parity = _level_arrays(levels, params)
    tab = table or action_table(params)
    if method == "stripe":
        w = ldos_stripe(key, params, E, tab, widths or "isotropic")
    elif method == "closed_form":
        w = ldos_envelope(key, params, E, widths or "chart", cutoff, tab)
    else:
        raise ParameterError(f"unknown method {method!r}")
    w = np.asarray(w, dtype=np.float64)
    if key in SYMMETRIC and parity is not None:
        w = np.where(parity > 0, w, 0.0)
    s = w.sum()
    if not s > 0:
        raise ArithmeticError("semiclassical LDOS vanished on the level set")
    return LdosProfile(params, E.copy(), w / s, parity)


# ---------------------------------------------------------------------------
# participation and frequencies
# ---------------------------------------------------------------------------

def participation_estimates(prep: str, params: DimerParams) -> dict:
    """M ~ log(N/u) sqrt(u) (Pi) or log(N/u) sqrt(N) (Edge), plus the ratio (u/N)^(1/2)."""
    N, u = params.N, params.u
    ratio = math.sqrt(u / N)
    if u / N >= 1 or u <= 1:
        warnings.warn("participation estimates assume 1 < u < N", stacklevel=2)
    L = math.log(N / u)
    key = prep.lower()
    if key == "pi":
        M = L * math.sqrt(u)
    elif key == "edge":
        M = L * math.sqrt(N)
    else:
        raise ParameterError("estimates exist for Pi and Edge only")
    return {"M": M, "semiclassical_ratio": ratio}


def frequency_estimates(prep: str, params: DimerParams, c: float | None = None) -> dict:
    """Intrinsic oscillation frequency and the frequency observed in S_x.

    Zero: omega_J.  Pi / Edge: {1, 2} x omega_J / log(N / (c u)).  For u/N > 1 all
    coherent preparations approach U sqrt(c N u)/sqrt(u) = sqrt(c u/N) omega_J.
    S_x is mirror symmetric, so only same-parity level pairs contribute and the
    observed frequency is twice the intrinsic one.
    """
    if c is None:
        c = load_constants()["frequency_prefactor"]["value"]
    N, u = params.N, params.u
    wJ = params.omega_J
    key = prep.lower()
    r = u / N
    if r >= 1:
        w = math.sqrt(c * r) * wJ
    elif key == "zero":
        w = wJ
    elif key in ("pi", "edge"):
        w = wJ / math.log(N / (c * u))
        if key == "edge":
            w *= 2.0
    elif key == "twinfock":
        # the filled sea has no single frequency; report the bottom-of-sea scale
        w = wJ
    else:
        raise ParameterError(f"no frequency estimate for {prep!r}")
    return {"intrinsic": w, "observed": 2.0 * w, "v_n": wJ, "prefactor": c}


# ---------------------------------------------------------------------------
# phase distributions and long-time averages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseDistribution:
    phi: np.ndarray
    P: np.ndarray
    params: DimerParams

    def n_x(self, phi=None):
        """Separatrix border sqrt((NK/2U)(1 + cos phi))."""
        phi = self.phi if phi is None else np.asarray(phi)
        return np.sqrt(self.params.N * self.params.K / (2 * self.params.U) * (1 + np.cos(phi)))

    def mean_cos(self) -> float:
        dphi = self.phi[1] - self.phi[0]
        return float(np.sum(np.cos(self.phi) * self.P) * dphi)


def _phase_density(prep: str, r: float):
    key = prep.lower()
    if key == "zero":
        return lambda f: np.exp(-np.asarray(f) ** 2 / (4 * r))
    if key == "pi":
        return lambda f: (r + np.cos(np.asarray(f) / 2) ** 2) ** -0.5
    if key == "twinfock":
        return lambda f: np.cos(np.asarray(f) / 2)
    raise ParameterError(f"no phase distribution for {prep!r}")


def phase_distribution(prep: str, params: DimerParams, n: int = 4096) -> PhaseDistribution:
    """Normalized long-time P(phi) on a midpoint grid over (-pi, pi]."""
    f = _phase_density(prep, params.u / params.N)
    phi = -math.pi + 2 * math.pi * (np.arange(n) + 0.5) / n
    P = f(phi)
    P = P / (np.sum(P) * (2 * math.pi / n))
    return PhaseDistribution(phi, P, params)


def long_time_average_quadrature(prep: str, params: DimerParams) -> float:
    """int cos(phi) P(phi) dphi by adaptive quadrature."""
    f = _phase_density(prep, params.u / params.N)
    num = quad(lambda x: math.cos(x) * float(f(x)), -math.pi, math.pi, limit=400, points=[0.0])[0]
    den = quad(lambda x: float(f(x)), -math.pi, math.pi, limit=400, points=[0.0])[0]
    return num / den


def long_time_average(prep: str, params: DimerParams) -> float:
    """Closed forms: Zero exp(-u/N); Pi -1 - 4/log(u/(32N)); TwinFock 1/3."""
    r = params.u / params.N
    key = prep.lower()
    if key == "zero":
        return math.exp(-r)
    if key == "pi":
        if r >= 32.0:
            raise ParameterError("Pi formula needs u/N < 32 (logarithm changes sign)")
        return -1.0 - 4.0 / math.log(r / 32.0)
    if key == "twinfock":
        return 1.0 / 3.0
    raise ParameterError(f"no long-time average for {prep!r}")


# ---------------------------------------------------------------------------
# fluctuations
# ---------------------------------------------------------------------------

def degenerate_mask(E: np.ndarray, tol: float) -> np.ndarray:
    return np.abs(E[:, None] - E[None, :]) <= tol


def diagonal_average(c: np.ndarray, E: np.ndarray, X: np.ndarray, tol: float) -> float:
    """Infinite-time average of <X>: sum over (near-)degenerate pairs of c* X c."""
    D = degenerate_mask(E, tol)
    return float(np.real(np.conj(c) @ (np.where(D, X, 0.0) @ c)))


def rms_quantum(c: np.ndarray, E: np.ndarray, X: np.ndarray, tol: float) -> float:
    """Long-time RMS of <X>(t): sqrt(sum_{E_nu != E_mu} |c_nu|^2 |c_mu|^2 |X_num|^2)."""
    D = degenerate_mask(E, tol)
    p = np.abs(c) ** 2
    val = np.sum(np.where(D, 0.0, np.outer(p, p) * np.abs(X) ** 2))
    return float(math.sqrt(max(val, 0.0)))


def rms_prediction(profile: LdosProfile, classical_power: float = 1.0) -> float:
    """RMS ~ [(1/M) int C_cl(omega) d omega]^(1/2)."""
    return math.sqrt(classical_power / profile.M)


def rms_scaling(prep: str, params: DimerParams) -> float:
    """Leading N-dependence: Edge ~ N^(-1/4), Pi ~ log(N)^(-1/2) (O(1) prefactors)."""
    est = participation_estimates(prep, params)
    return 1.0 / math.sqrt(est["M"])


def revival_time(levels, nu: int) -> float:
    """2 pi / (dE/dnu) from a centred difference of the level ladder.

    `levels` is a DimerParams (exact ladder), a Spectrum, a WkbSpectrum or an
    ascending array of energies.  The result is in units of 1/energy.
    """
    if isinstance(levels, DimerParams):
        from .model import solve

        levels = solve(levels)
    E = np.asarray(levels.energies if hasattr(levels, "energies") else levels, dtype=np.float64)
    if nu <= 0 or nu >= E.size - 1:
        raise ParameterError("revival time needs an interior level")
    dE = 0.5 * (E[nu + 1] - E[nu - 1])
    if dE <= 0:
        raise ArithmeticError("degenerate neighbours")
    return 2 * math.pi / dE


def spectral_centroid(c: np.ndarray, E: np.ndarray, X: np.ndarray, tol: float) -> float:
    """Power-weighted mean |E_nu - E_mu| of the infinite-time fluctuation spectrum of <X>."""
    D = degenerate_mask(E, tol)
    p = np.abs(c) ** 2
    P = np.where(D, 0.0, np.outer(p, p) * np.abs(X) ** 2)
    tot = P.sum()
    if not tot > 0:
        return 0.0
    return float(np.sum(P * np.abs(E[:, None] - E[None, :])) / tot)
