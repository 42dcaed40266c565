"""Truncated-Wigner ensembles: sample a classical cloud, propagate it with the
Bloch equations and reduce it to observables.

Reproducibility: points are generated and propagated in fixed-size chunks,
each with its own RNG stream spawned from the master seed.  Per-chunk partial
sums are combined in chunk order, so results do not depend on the number of
worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .kernels import bloch_rk4
from .model import DimerParams, ParameterError
from .wigner import scs_widths

CHUNK = 4096


@dataclass(frozen=True)
class Preparation:
    """Initial preparation spec shared by the quantum and classical layers."""

    kind: str
    theta: float | None = None
    phi: float | None = None
    n: float | None = None

    @classmethod
    def named(cls, kind: str, params: DimerParams, **kw) -> "Preparation":
        k = kind.lower()
        if k == "zero":
            return cls("Zero", math.pi / 2, 0.0)
        if k == "pi":
            return cls("Pi", math.pi / 2, math.pi)
        if k == "edge":
            from .wkb import edge_theta

            t = edge_theta(params)
            return cls("Edge", abs(t), 0.0 if t >= 0 else math.pi)
        if k == "twinfock":
            if params.N % 2:
                raise ParameterError("TwinFock needs even N")
            return cls("TwinFock", n=0.0)
        if k == "fock":
            if kw.get("n") is None:
                raise ParameterError("Fock preparation needs n")
            return cls("Fock", n=float(kw["n"]))
        if k == "scs":
            if kw.get("theta") is None or kw.get("phi") is None:
                raise ParameterError("SCS preparation needs theta and phi")
            return cls("SCS", float(kw["theta"]), float(kw["phi"]))
        raise ParameterError(f"unknown preparation {kind!r}")

    @property
    def is_fock(self) -> bool:
        return self.n is not None


@dataclass(frozen=True)
class PhasePointCloud:
    params: DimerParams
    points: np.ndarray  # (size, 3) unit Bloch vectors
    seed: int
    preparation: Preparation
    widths: str = "isotropic"

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _chunks(size: int, chunk: int = CHUNK):
    return [(s, min(size, s + chunk)) for s in range(0, size, chunk)]


def _sample_chunk(rng, count, params, prep, widths):
    N = params.N
    R = N / 2.0
    if prep.is_fock:
        if abs(prep.n) > R:
            raise ParameterError("Fock n outside [-N/2, N/2]")
        phi = rng.uniform(-math.pi, math.pi, count)
        z = np.full(count, prep.n / R)
        s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    th0, ph0 = prep.theta, prep.phi
    if widths == "chart":
        # Gaussian in the (phi, n) chart; tail points with |n| > N/2 are redrawn
        a, b = scs_widths(N, "chart")
        n0 = R * math.cos(th0)
        phi = rng.normal(ph0, a, count)
        n = rng.normal(n0, b, count)
        bad = np.abs(n) > R
        while np.any(bad):
            n[bad] = rng.normal(n0, b, int(bad.sum()))
            bad = np.abs(n) > R
        z = n / R
        s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    if widths != "isotropic":
        raise ParameterError(f"unknown width convention {widths!r}")
    # isotropic Gaussian in the tangent plane, mapped to the sphere by the exponential map
    sigma = 1.0 / math.sqrt(N + 1)
    c = np.array([math.sin(th0) * math.cos(ph0), math.sin(th0) * math.sin(ph0), math.cos(th0)])
    et = np.array([math.cos(th0) * math.cos(ph0), math.cos(th0) * math.sin(ph0), -math.sin(th0)])
    ep = np.array([-math.sin(ph0), math.cos(ph0), 0.0])
    x = rng.normal(0.0, sigma, count)
    y = rng.normal(0.0, sigma, count)
    r = np.hypot(x, y)
    safe = np.where(r > 0, r, 1.0)
    sinc = np.where(r > 0, np.sin(r) / safe, 1.0)
    pts = (np.cos(r)[:, None] * c[None, :] + (sinc * x)[:, None] * et[None, :]
           + (sinc * y)[:, None] * ep[None, :])
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def sample_cloud(params: DimerParams, preparation, size: int, seed: int = 0,
                 widths: str = "isotropic", **kw) -> PhasePointCloud:
    """Draw `size` points from the approximate Wigner function of a preparation."""
    if size < 1:
        raise ParameterError("ensemble size must be >= 1")
    prep = preparation if isinstance(preparation, Preparation) else Preparation.named(preparation, params, **kw)
    spans = _chunks(size)
    seqs = np.random.SeedSequence(seed).spawn(len(spans))
    pts = np.empty((size, 3))
    for (a, b), ss in zip(spans, seqs):
        pts[a:b] = _sample_chunk(np.random.default_rng(ss), b - a, params, prep, widths)
    return PhasePointCloud(params, pts, seed, prep, widths)


def classical_energy(S: np.ndarray, params: DimerParams) -> np.ndarray:
    """Energy (units of NK) of unit Bloch vectors: (1/2)[(u/2) Sz^2 - eps Sz - Sx]."""
    return 0.5 * (0.5 * params.u * S[..., 2] ** 2 - params.eps_scaled * S[..., 2] - S[..., 0])


@dataclass(frozen=True)
class TrajectoryBundle:
    params: DimerParams
    taus: np.ndarray
    mean: np.ndarray  # (T, 3) raw ensemble means of unit vectors
    hist_taus: np.ndarray
    hist_n: np.ndarray  # (H, N+1) P_tau(n) on n = -j..j
    phi_edges: np.ndarray
    hist_phi: np.ndarray  # (H, n_phi_bins)
    size: int
    dt: float
    max_energy_drift: float  # max over points and sample times, units of NK
    max_norm_error: float
    final_points: np.ndarray | None = field(default=None, repr=False)

    @property
    def prefactor(self) -> float:
        j = self.params.j
        return math.sqrt(j * (j + 1.0)) / j

    def quantum_comparable(self) -> np.ndarray:
        """Means rescaled by sqrt(j(j+1))/j for comparison with (2/N)<J>."""
        return self.mean * self.prefactor


def _n_edges(N: int) -> np.ndarray:
    j = N / 2.0
    return np.arange(N + 2) - j - 0.5


def _propagate_chunk(S, params, taus, dts, steps, hist_idx, n_edges, phi_edges):
    u = params.u
    eps = params.eps_scaled
    T = taus.size
    sums = np.empty((T, 3))
    hn = np.zeros((len(hist_idx), n_edges.size - 1), dtype=np.int64)
    hp = np.zeros((len(hist_idx), phi_edges.size - 1), dtype=np.int64)
    E0 = classical_energy(S, params)
    drift = 0.0
    nerr = 0.0
    R = params.N / 2.0
    hpos = {k: i for i, k in enumerate(hist_idx)}

    def record(k):
        nonlocal drift, nerr
        sums[k] = S.sum(axis=0)
        drift = max(drift, float(np.max(np.abs(classical_energy(S, params) - E0))))
        nerr = max(nerr, float(np.max(np.abs(np.linalg.norm(S, axis=1) - 1.0))))
        if k in hpos:
            i = hpos[k]
            hn[i] = np.histogram(R * S[:, 2], bins=n_edges)[0]
            hp[i] = np.histogram(np.arctan2(S[:, 1], S[:, 0]), bins=phi_edges)[0]

    record(0)
    for k in range(1, T):
        bloch_rk4(S, u, eps, dts[k - 1], int(steps[k - 1]))
        record(k)
    return sums, hn, hp, drift, nerr


def default_dt(params: DimerParams) -> float:
    """RK4 step (tau units) keeping per-trajectory energy drift far below 1e-8 NK."""
    rate = 1.0 + abs(params.u) + abs(params.eps_scaled)
    return min(0.01, 0.02 / rate)


def propagate(cloud: PhasePointCloud, taus, dt: float | None = None, hist_taus=None,
              n_phi_bins: int = 128, workers: int = 1, keep_points: bool = False) -> TrajectoryBundle:
    """Integrate every point on the tau grid and reduce deterministically."""
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or taus.size == 0 or taus[0] != 0.0 or np.any(np.diff(taus) <= 0):
        raise ParameterError("tau grid must start at 0 and increase strictly")
    params = cloud.params
    dt_max = dt if dt is not None else default_dt(params)
    if not dt_max > 0:
        raise ParameterError("dt must be positive")
    gaps = np.diff(taus)
    steps = np.maximum(1, np.ceil(gaps / dt_max - 1e-9)).astype(np.int64)
    dts = gaps / steps
    if np.any(dts < 1e-12):
        raise ArithmeticError("step size underflow")
    hist_taus = np.asarray([] if hist_taus is None else hist_taus, dtype=np.float64)
    hist_idx = sorted({int(np.argmin(np.abs(taus - t))) for t in hist_taus})
    n_edges = _n_edges(params.N)
    phi_edges = np.linspace(-math.pi, math.pi, n_phi_bins + 1)
    spans = _chunks(cloud.size)
    work = [np.array(cloud.points[a:b], copy=True) for a, b in spans]

    def run(i):
        return _propagate_chunk(work[i], params, taus, dts, steps, hist_idx, n_edges, phi_edges)

    if workers <= 1:
        results = [run(i) for i in range(len(spans))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, range(len(spans))))
    # ordered reduction
    sums = np.zeros((taus.size, 3))
    hn = np.zeros((len(hist_idx), params.N + 1), dtype=np.int64)
    hp = np.zeros((len(hist_idx), n_phi_bins), dtype=np.int64)
    drift = 0.0
    nerr = 0.0
    for s, a, b, d, e in results:
        sums += s
        hn += a
        hp += b
        drift = max(drift, d)
        nerr = max(nerr, e)
    size = cloud.size
    final = np.concatenate(work) if keep_points else None
    return TrajectoryBundle(
        params, taus, sums / size, taus[hist_idx] if hist_idx else np.empty(0),
        hn / size, phi_edges, hp / size, size, float(dt_max), drift, nerr, final,
    )


@dataclass(frozen=True)
class EnsembleObservables:
    taus: np.ndarray
    S: np.ndarray
    visibility: np.ndarray
    hist_taus: np.ndarray
    P_n: np.ndarray
    P_phi: np.ndarray


def reduce_observables(bundle: TrajectoryBundle, comparable: bool = True) -> EnsembleObservables:
    """Mean Bloch vector, fringe visibility and the projected distributions."""
    S = bundle.quantum_comparable() if comparable else bundle.mean
    vis = np.hypot(S[:, 0], S[:, 1])
    return EnsembleObservables(bundle.taus, S, vis, bundle.hist_taus, bundle.hist_n, bundle.hist_phi)
