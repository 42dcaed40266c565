"""Run configuration, time-series analysis, quantum/ensemble runs, parameter
sweeps, figure presets and persistence.

All times are in tau = K t units; frequencies and energies are reported in
units of K unless stated otherwise.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import asdict, dataclass, field, fields, replace
import io
import json
import logging
import math
import os
from pathlib import Path
import tempfile
import time

import numpy as np

from . import __version__
from . import analytics
from ._accel import backend
from .ensemble import Preparation, default_dt, propagate, reduce_observables, sample_cloud
from .model import (DimerParams, ParameterError, ldos_quantum, observable_matrix, prepare,
                    significant_levels, solve, evolve, expectation_series, occupation_distribution)

log = logging.getLogger(__name__)

MIN_SAMPLES = 1024


class ConfigError(ParameterError):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    N: int = 40
    u: float | None = 5.0
    U: float | None = None
    K: float = 1.0
    eps: float = 0.0
    prep: str = "Zero"
    n: float | None = None
    theta: float | None = None
    phi: float | None = None
    T: float | None = None  # horizon in tau units; default from the slowest predicted frequency
    dt: float | None = None  # sample step in tau units
    size: int = 10_000
    seed: int = 0
    out: str = "out"
    grid: int = 96
    workers: int = 1
    widths: str = "isotropic"
    sweep_N: list = field(default_factory=list)
    sweep_u: list = field(default_factory=list)
    sweep_u_over_N: list = field(default_factory=list)
    preps: list = field(default_factory=list)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        bad = sorted(set(data) - known)
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")
        cfg = cls(**data)
        cfg.params()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_mapping(data)

    def merged(self, **overrides) -> "RunConfig":
        kw = {k: v for k, v in overrides.items() if v is not None}
        if "U" in kw and "u" not in kw:
            kw["u"] = None
        if "u" in kw and "U" not in kw:
            kw["U"] = None
        return replace(self, **kw)

    def params(self, N: int | None = None, u: float | None = None) -> DimerParams:
        N = self.N if N is None else N
        try:
            if u is not None:
                return DimerParams.from_u(N, u, self.K, self.eps)
            if self.U is not None:
                return DimerParams(N, self.U, self.K, self.eps)
            if self.u is not None:
                return DimerParams.from_u(N, self.u, self.K, self.eps)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError("either u or U must be given")

    def to_dict(self) -> dict:
        return asdict(self)


def max_frequency(params: DimerParams) -> float:
    """Upper bound on frequencies present in S(tau), in units of K (2 x top level spacing)."""
    p = params
    top = max(p.omega_plus, p.omega_J, p.K, abs(p.U) * (p.N + 1) + abs(p.eps))
    return 2.0 * top


def slowest_frequency(params: DimerParams, prep: str) -> float:
    key = prep.lower()
    if key in ("pi", "edge") and params.u > 1 and params.N > math.sqrt(params.u):
        from .wkb import omega_x

        return omega_x(params)
    return max(params.omega_J, 1e-3 * params.K)


def default_horizon(params: DimerParams, prep: str) -> float:
    """200 periods of the slowest predicted frequency, in tau units."""
    return 200.0 * 2.0 * math.pi / slowest_frequency(params, prep) * params.K


def default_step(params: DimerParams) -> float:
    """Sample step (tau units) at a quarter of the Nyquist limit for max_frequency."""
    return math.pi / (4.0 * max_frequency(params)) * params.K


def time_grid(cfg: RunConfig, params: DimerParams, long_time: bool = True) -> np.ndarray:
    T = cfg.T if cfg.T is not None else default_horizon(params, cfg.prep)
    dt = cfg.dt if cfg.dt is not None else default_step(params)
    if not (T > 0 and dt > 0):
        raise ConfigError("T and dt must be positive")
    if dt >= math.pi / (2.0 * max_frequency(params)) * params.K:
        raise ConfigError("sample step violates the Nyquist guard for the fastest frequency")
    if long_time:
        need = 20 * 2 * math.pi / slowest_frequency(params, cfg.prep) * params.K
        if T < need:
            raise ConfigError(f"horizon T={T:g} shorter than 20 periods ({need:g})")
    n = int(math.floor(T / dt + 1e-9)) + 1
    return np.arange(n) * dt


# ---------------------------------------------------------------------------
# time series and their analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeries:
    taus: np.ndarray
    values: dict
    provenance: str  # 'quantum' | 'ensemble'
    K: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.taus, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("time series needs at least two samples")
        d = np.diff(t)
        if np.any(np.abs(d - d[0]) > 1e-9 * max(1.0, abs(t[-1]))):
            raise ValueError("time series must be uniformly sampled")
        for k, v in self.values.items():
            if np.asarray(v).shape != t.shape or not np.all(np.isfinite(v)):
                raise ValueError(f"series {k!r} has the wrong shape or non-finite values")

    def __len__(self):
        return self.taus.size

    @property
    def step(self) -> float:
        return float(self.taus[1] - self.taus[0])


def series_from_bloch(taus, S: np.ndarray, provenance: str, K: float = 1.0) -> TimeSeries:
    """TimeSeries with S_x, S_y, S_z, fringe visibility and one-body purity."""
    x, y, z = S[:, 0], S[:, 1], S[:, 2]
    vals = {"x": x, "y": y, "z": z, "visibility": np.hypot(x, y),
            "purity": 0.5 * (1.0 + x * x + y * y + z * z)}
    return TimeSeries(np.asarray(taus, dtype=np.float64), vals, provenance, K)


@dataclass(frozen=True)
class FluctuationStats:
    mean: float
    rms: float
    omega: np.ndarray  # angular frequency grid (units of K), omega >= 0
    power: np.ndarray  # one-sided C(omega), integral = mean square of the windowed fluctuation
    omega_centroid: float
    omega_peak: float
    parseval_ratio: float
    samples: int
    classical_power: np.ndarray | None = None
    bandwidth: float | None = None
    revival_time: float | None = None

    @property
    def parseval_ok(self) -> bool:
        return abs(self.parseval_ratio - 1.0) < 0.02 or self.rms < 1e-12


def analyze_series(series: TimeSeries, key: str = "x", transient: float = 0.25) -> FluctuationStats:
    """Mean, RMS and Hann-windowed periodogram of one component after the transient.

    The dominant frequency is the power-weighted centroid over omega > 0; the
    argmax of the periodogram is reported as well.
    """
    if len(series) < MIN_SAMPLES:
        raise ValueError(f"series too short ({len(series)} < {MIN_SAMPLES} samples)")
    if not 0.0 <= transient < 1.0:
        raise ValueError("transient fraction must lie in [0, 1)")
    v = np.asarray(series.values[key], dtype=np.float64)
    v = v[int(transient * v.size):]
    n = v.size
    mean = float(v.mean())
    f = v - mean
    rms = float(math.sqrt(np.mean(f * f)))
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    X = np.fft.rfft(f * w)
    dtau = series.step
    omega = 2 * np.pi * np.fft.rfftfreq(n, dtau) * series.K
    domega = omega[1] - omega[0]
    s = np.full(omega.size, 2.0)
    s[0] = 1.0
    if n % 2 == 0:
        s[-1] = 1.0
    power = s * np.abs(X) ** 2 / (n * np.sum(w * w)) / domega
    total = float(np.sum(power) * domega)
    pos = power[1:]
    if rms < 1e-14 or not np.any(pos > 0):
        return FluctuationStats(mean, rms, omega, np.zeros_like(power), 0.0, 0.0, 1.0, n)
    cen = float(np.sum(omega[1:] * pos) / np.sum(pos))
    peak = float(omega[1 + int(np.argmax(pos))])
    return FluctuationStats(mean, rms, omega, power, cen, peak, total / rms ** 2, n)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def write_csv(path, header, rows) -> Path:
    """Atomic CSV write (temp file + rename), header row, RFC-4180 quoting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(x) for x in r])
    _atomic_write(path, buf.getvalue())
    return path


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_sidecar(csv_path, cfg: RunConfig | None, params: DimerParams | None, wall: float,
                  extra: dict | None = None) -> Path:
    meta = {
        "artifact": Path(csv_path).name,
        "config": cfg.to_dict() if cfg is not None else None,
        "derived": params.derived() if params is not None else None,
        "version": __version__,
        "backend": backend(),
        "wall_time_s": wall,
    }
    if extra:
        meta.update(extra)
    side = Path(str(csv_path) + ".json")
    _atomic_write(side, json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return side


def _tag(params: DimerParams, prep: str | None = None) -> str:
    s = f"N{params.N}_u{params.u:g}"
    if params.eps:
        s += f"_eps{params.eps:g}"
    return f"{prep.lower()}_{s}" if prep else s


# ---------------------------------------------------------------------------
# quantum runs
# ---------------------------------------------------------------------------

@dataclass
class QuantumRun:
    params: DimerParams
    series: TimeSeries
    ldos: analytics.LdosProfile
    stats: FluctuationStats | None
    paths: list


def _state(params: DimerParams, cfg: RunConfig):
    return prepare(params, cfg.prep, n=cfg.n, theta=cfg.theta, phi=cfg.phi)


def run_quantum(cfg: RunConfig, write: bool = True, long_time: bool = True) -> QuantumRun:
    """Exact evolution of (2/N)<J>(tau), its LDOS and fluctuation statistics."""
    t0 = time.perf_counter()
    params = cfg.params()
    spec = solve(params)
    state = _state(params, cfg)
    taus = time_grid(cfg, params, long_time)
    raw = expectation_series(state, spec, taus)
    S = np.column_stack([raw["x"], raw["y"], raw["z"]])
    series = series_from_bloch(taus, S, "quantum", params.K)
    ldos = ldos_quantum(state, spec)
    stats = analyze_series(series) if len(series) >= MIN_SAMPLES else None
    paths = []
    if write:
        out = Path(cfg.out)
        tag = _tag(params, cfg.prep)
        wall = time.perf_counter() - t0
        p = write_csv(out / f"quantum_{tag}.csv", ["tau", "Sx", "Sy", "Sz", "visibility", "purity"],
                      zip(taus, *(series.values[k] for k in ("x", "y", "z", "visibility", "purity"))))
        summary = None
        if stats is not None:
            summary = {"mean": stats.mean, "rms": stats.rms, "omega_centroid": stats.omega_centroid,
                       "omega_peak": stats.omega_peak, "parseval_ratio": stats.parseval_ratio}
        write_sidecar(p, cfg, params, wall, {"stats": summary, "M": ldos.M})
        q = write_csv(out / f"ldos_{tag}.csv", ["nu", "E", "parity", "p"],
                      zip(range(len(spec)), spec.energies, spec.parity, ldos.weights))
        write_sidecar(q, cfg, params, wall, {"M": ldos.M, "width": ldos.width})
        paths += [p, q]
    return QuantumRun(params, series, ldos, stats, paths)


def long_time_stats(params: DimerParams, prep: str, spec=None, state=None, **kw) -> dict:
    """Infinite-time S_x mean, RMS and spectral centroid from the eigenbasis, plus M."""
    spec = spec or solve(params)
    state = state or prepare(params, prep, **kw)
    c = spec.overlaps(state)
    lev = significant_levels(c, 1e-12)
    cs, E = c[lev], spec.energies[lev]
    X = observable_matrix(spec, "x", lev)
    tol = 1e-9 * max(1.0, params.N * params.K)
    mean = analytics.diagonal_average(cs, E, X, tol)
    rms = analytics.rms_quantum(cs, E, X, tol)
    cen = analytics.spectral_centroid(cs, E, X, tol)
    return {"mean": mean, "rms": rms, "omega_centroid": cen, "M": ldos_quantum(state, spec).M}


# ---------------------------------------------------------------------------
# ensemble runs
# ---------------------------------------------------------------------------

@dataclass
class EnsembleRun:
    params: DimerParams
    series: TimeSeries
    hist_taus: np.ndarray
    P_n: np.ndarray
    P_phi: np.ndarray
    phi_edges: np.ndarray
    max_energy_drift: float
    paths: list


def run_ensemble(cfg: RunConfig, taus=None, hist_taus=None, write: bool = True) -> EnsembleRun:
    t0 = time.perf_counter()
    params = cfg.params()
    prep = Preparation.named(cfg.prep, params, n=cfg.n, theta=cfg.theta, phi=cfg.phi)
    if taus is None:
        taus = time_grid(cfg, params, long_time=False)
    cloud = sample_cloud(params, prep, cfg.size, cfg.seed, cfg.widths)
    bundle = propagate(cloud, taus, hist_taus=hist_taus, workers=cfg.workers)
    obs = reduce_observables(bundle)
    series = series_from_bloch(bundle.taus, obs.S, "ensemble", params.K)
    paths = []
    if write:
        out = Path(cfg.out)
        tag = _tag(params, cfg.prep)
        wall = time.perf_counter() - t0
        p = write_csv(out / f"ensemble_{tag}.csv", ["tau", "Sx", "Sy", "Sz", "visibility", "purity"],
                      zip(bundle.taus, *(series.values[k] for k in ("x", "y", "z", "visibility", "purity"))))
        write_sidecar(p, cfg, params, wall, {"max_energy_drift_NK": bundle.max_energy_drift,
                                             "dt": bundle.dt, "seed": cfg.seed, "size": cfg.size})
        paths.append(p)
        if bundle.hist_taus.size:
            n = np.arange(params.N + 1) - params.j
            rows = [(t, nn, pn) for t, row in zip(bundle.hist_taus, bundle.hist_n) for nn, pn in zip(n, row)]
            q = write_csv(out / f"ensemble_Pn_{tag}.csv", ["tau", "n", "P"], rows)
            write_sidecar(q, cfg, params, wall)
            paths.append(q)
    return EnsembleRun(params, series, bundle.hist_taus, bundle.hist_n, bundle.hist_phi,
                       bundle.phi_edges, bundle.max_energy_drift, paths)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ["N", "u", "u_over_N", "prep", "M", "Sx_mean", "Sx_rms", "omega_observed",
                 "omega_intrinsic", "M_estimate", "Sx_mean_estimate", "omega_estimate", "error"]


def _sweep_point(N: int, u: float, prep: str, K: float) -> list:
    row = [N, u, u / N, prep]
    try:
        params = DimerParams.from_u(N, u, K)
        st = long_time_stats(params, prep)
        est_M = est_S = est_w = math.nan
        try:
            if prep.lower() in ("pi", "edge") and 1 < u < N:
                est_M = analytics.participation_estimates(prep, params)["M"]
        except ParameterError:
            pass
        try:
            est_S = analytics.long_time_average(prep, params)
        except ParameterError:
            pass
        try:
            est_w = analytics.frequency_estimates(prep, params)["observed"]
        except (ParameterError, ValueError):
            pass
        om = st["omega_centroid"]
        return row + [st["M"], st["mean"], st["rms"], om, om / 2, est_M, est_S, est_w, ""]
    except Exception as exc:  # per-point failure is recorded and the sweep continues
        log.warning("sweep point N=%s u=%s %s failed: %s", N, u, prep, exc)
        return row + [math.nan] * 8 + [f"{type(exc).__name__}: {exc}"]


def sweep_points(cfg: RunConfig) -> list:
    Ns = list(cfg.sweep_N) or [cfg.N]
    preps = list(cfg.preps) or [cfg.prep]
    pts = []
    for N in Ns:
        us = [float(r) * N for r in cfg.sweep_u_over_N] + [float(u) for u in cfg.sweep_u]
        if not us:
            us = [cfg.params(N).u]
        for u in us:
            for prep in preps:
                if prep.lower() == "twinfock" and N % 2:
                    continue
                pts.append((int(N), float(u), prep))
    if not pts:
        raise ConfigError("sweep axes are empty")
    return pts


@dataclass
class SweepTable:
    columns: list
    rows: list
    path: Path | None = None

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def run_sweep(cfg: RunConfig, write: bool = True, name: str = "sweep") -> SweepTable:
    """Per-point long-time mean, RMS, frequency and M over the (N, u, prep) grid."""
    t0 = time.perf_counter()
    pts = sweep_points(cfg)
    work = lambda p: _sweep_point(p[0], p[1], p[2], cfg.K)  # noqa: E731
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            rows = list(ex.map(work, pts))
    else:
        rows = [work(p) for p in pts]
    table = SweepTable(list(SWEEP_COLUMNS), rows)
    if write:
        p = write_csv(Path(cfg.out) / f"{name}.csv", SWEEP_COLUMNS, rows)
        write_sidecar(p, cfg, None, time.perf_counter() - t0,
                      {"constants": analytics.load_constants()})
        table.path = p
    return table


def power_law_fit(x, y) -> tuple[float, float]:
    """Least-squares exponent and prefactor of y = a x^k."""
    k, la = np.polyfit(np.log(x), np.log(y), 1)
    return float(k), float(math.exp(la))


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------

FOUR = ["Zero", "Pi", "Edge", "TwinFock"]
U_OVER_N = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0]


def _fig1(cfg: RunConfig) -> list:
    from .wkb import action_table, omega_x, wkb_levels

    params = DimerParams.from_u(20, 10.0) if cfg.N == RunConfig.N else cfg.params()
    t0 = time.perf_counter()
    spec = solve(params)
    wk = wkb_levels(params)
    tab = action_table(params)
    out = Path(cfg.out)
    p = write_csv(out / f"fig1_levels_{_tag(params)}.csv",
                  ["nu", "E_exact", "parity", "E_wkb", "kind", "omega_wkb"],
                  zip(range(len(spec)), spec.energies, spec.parity, wk.energies, wk.kind, wk.omega))
    write_sidecar(p, cfg, params, time.perf_counter() - t0,
                  {"nu_x": wk.nu_x, "omega_x": omega_x(params), "omega_J": params.omega_J})
    q = write_csv(out / f"fig1_area_{_tag(params)}.csv", ["E", "A"],
                  zip(tab.e * tab.scale, tab.A))
    write_sidecar(q, cfg, params, time.perf_counter() - t0)
    return [p, q]


def _wigner_csv(cfg, params, state, name, t0):
    from .wigner import field_rows, gauss_grid, state_to_wigner

    g = gauss_grid(cfg.grid, 2 * cfg.grid)
    fld = state_to_wigner(state, g)
    p = write_csv(Path(cfg.out) / name, ["phi", "cos_theta", "W"], field_rows(fld))
    write_sidecar(p, cfg, params, time.perf_counter() - t0, {"integral": fld.integral()})
    return p


def _fig2(cfg: RunConfig) -> list:
    params = cfg.params()
    paths = []
    for prep in FOUR:
        t0 = time.perf_counter()
        st = prepare(params, prep)
        paths.append(_wigner_csv(cfg, params, st, f"fig2_wigner_{_tag(params, prep)}.csv", t0))
    return paths


def _fig3(cfg: RunConfig) -> list:
    params = cfg.params()
    t0 = time.perf_counter()
    tau = 4.0 * params.K if cfg.T is None else cfg.T
    spec = solve(params)
    st = evolve(prepare(params, "TwinFock"), spec, tau)
    paths = [_wigner_csv(cfg, params, st, f"fig3_wigner_{_tag(params, 'twinfock')}.csv", t0)]
    c2 = replace(cfg, prep="TwinFock")
    ens = run_ensemble(c2, taus=np.array([0.0, tau]), hist_taus=[tau], write=False)
    n = np.arange(params.N + 1) - params.j
    q = write_csv(Path(cfg.out) / f"fig3_occupation_{_tag(params, 'twinfock')}.csv",
                  ["n", "P_quantum", "P_ensemble"], zip(n, occupation_distribution(st), ens.P_n[0]))
    write_sidecar(q, c2, params, time.perf_counter() - t0, {"tau": tau})
    centers = 0.5 * (ens.phi_edges[1:] + ens.phi_edges[:-1])
    r = write_csv(Path(cfg.out) / f"fig3_phase_{_tag(params, 'twinfock')}.csv",
                  ["phi", "P_ensemble"], zip(centers, ens.P_phi[0]))
    write_sidecar(r, c2, params, time.perf_counter() - t0, {"tau": tau})
    return paths + [q, r]


def _fig4(cfg: RunConfig) -> list:
    params = cfg.params()
    T = cfg.T if cfg.T is not None else 3 * 2 * math.pi / params.omega_J * params.K
    dt = cfg.dt if cfg.dt is not None else 0.05
    paths = []
    for prep in FOUR:
        c = replace(cfg, prep=prep, T=T, dt=dt)
        taus = time_grid(c, params, long_time=False)
        paths += run_quantum(c, long_time=False).paths
        paths += run_ensemble(c, taus=taus).paths
    return paths


def _fig5(cfg: RunConfig) -> list:
    params = DimerParams.from_u(500, 4.0) if cfg.N == RunConfig.N else cfg.params()
    spec = solve(params)
    paths = []
    for prep in FOUR:
        t0 = time.perf_counter()
        st = prepare(params, prep)
        q = ldos_quantum(st, spec)
        sc = analytics.ldos_semiclassical(prep, params, spec)
        cf = analytics.ldos_semiclassical(prep, params, spec, method="closed_form")
        p = write_csv(Path(cfg.out) / f"fig5_ldos_{_tag(params, prep)}.csv",
                      ["E_minus_Ex", "parity", "p_exact", "p_stripe", "p_closed_form"],
                      zip(spec.energies - params.E_x, spec.parity, q.weights, sc.weights, cf.weights))
        write_sidecar(p, cfg, params, time.perf_counter() - t0,
                      {"M_exact": q.M, "tv_stripe": q.tv_distance(sc), "tv_closed_form": q.tv_distance(cf)})
        c = replace(cfg, prep=prep, N=params.N, u=params.u, U=None)
        run = run_quantum(c, write=False)
        r = write_csv(Path(cfg.out) / f"fig5_spectrum_{_tag(params, prep)}.csv",
                      ["omega_over_omegaJ", "C"], zip(run.stats.omega / params.omega_J, run.stats.power))
        write_sidecar(r, c, params, time.perf_counter() - t0,
                      {"omega_centroid": run.stats.omega_centroid, "rms": run.stats.rms})
        paths += [p, r]
    return paths


def _sweep_preset(cfg: RunConfig, name: str, preps, u_over_N=None, us=None, Ns=(100, 500, 1000)) -> list:
    c = replace(cfg, sweep_N=list(cfg.sweep_N) or list(Ns), preps=list(cfg.preps) or list(preps),
                sweep_u_over_N=list(cfg.sweep_u_over_N) or list(u_over_N or []),
                sweep_u=list(cfg.sweep_u) or list(us or []))
    return [run_sweep(c, name=name).path]


def _fig8(cfg: RunConfig) -> list:
    paths = _sweep_preset(cfg, "fig8_left", FOUR, U_OVER_N[:7])
    inset = replace(cfg, sweep_N=[100, 200, 500, 1000], preps=["Edge", "Pi"],
                    sweep_u=[4.0], sweep_u_over_N=[])
    t0 = time.perf_counter()
    tab = run_sweep(inset, name="fig8_inset")
    fits = {}
    for prep in ("Edge", "Pi"):
        sel = [i for i, r in enumerate(tab.rows) if r[3] == prep]
        x = np.array([tab.rows[i][0] for i in sel], float)
        y = np.array([tab.rows[i][6] for i in sel], float)
        fits[prep] = dict(zip(("exponent", "prefactor"), power_law_fit(x, y)))
    write_sidecar(tab.path, inset, None, time.perf_counter() - t0, {"power_law_fits": fits})
    return paths + [tab.path]


FIGURES = {
    1: _fig1,
    2: _fig2,
    3: _fig3,
    4: _fig4,
    5: _fig5,
    6: lambda c: _sweep_preset(c, "fig6", ["Zero", "Pi", "Edge"], U_OVER_N[:8]),
    7: lambda c: _sweep_preset(c, "fig7", ["Zero", "Edge", "Pi"], U_OVER_N),
    8: _fig8,
}


def run_figure(number: int, cfg: RunConfig) -> list:
    """Write the data behind one figure; returns the CSV paths."""
    if number not in FIGURES:
        raise ConfigError(f"no figure preset {number}")
    if number in (2, 3, 4) and cfg.N == RunConfig.N and cfg.u == RunConfig.u:
        cfg = replace(cfg, N=40, u=5.0, U=None)
    return FIGURES[number](cfg)


# ---------------------------------------------------------------------------
# fitted constants
# ---------------------------------------------------------------------------

def fit_frequency_prefactor(N: int = 1000, u_over_N=(1.0, 2.0, 5.0, 10.0),
                            preps=("Zero", "Edge", "Pi"), K: float = 1.0) -> dict:
    """Single constant c in omega_obs = 2 sqrt(c u/N) omega_J, fitted in log space."""
    logs = []
    for r in u_over_N:
        params = DimerParams.from_u(N, r * N, K)
        spec = solve(params)
        for prep in preps:
            st = long_time_stats(params, prep, spec)
            w = st["omega_centroid"]
            # w = 2 sqrt(c r) omega_J  ->  log c = 2 log(w / (2 omega_J)) - log r
            logs.append(2 * math.log(w / (2 * params.omega_J)) - math.log(r))
    logs = np.array(logs)
    return {"value": float(math.exp(logs.mean())), "fitted_at": {"N": N, "u_over_N": list(u_over_N),
            "preparations": list(preps)}, "log_spread": float(logs.std())}


def fit_separatrix_b(N: int = 100, u: float = 4.0, window: int = 4) -> dict:
    """Constant b in the logarithmic near-separatrix law, fitted to exact sea levels.

    Only levels below nu_x enter: above it the island doublets do not follow a
    single ladder.
    """
    from scipy.optimize import minimize_scalar

    from .wkb import separatrix_levels, wkb_levels

    params = DimerParams.from_u(N, u)
    spec = solve(params)
    wk = wkb_levels(params)
    nu = np.arange(len(spec))
    d = nu + 0.5 - wk.nu_x
    sel = (d < 0) & (d >= -window)
    E = spec.energies[sel]

    def cost(lb):
        pred = separatrix_levels(params, nu[sel], wk.nu_x, b=math.exp(lb))
        return float(np.sum((pred - E) ** 2))

    res = minimize_scalar(cost, bounds=(-6.0, 6.0), method="bounded", options={"xatol": 1e-10})
    b = float(math.exp(res.x))
    rms = math.sqrt(res.fun / sel.sum()) / params.omega_J
    return {"value": b, "fitted_at": {"N": N, "u": u, "window": window}, "rms_over_omega_J": rms}


def refit_constants(path=None) -> dict:
    data = {"version": 1, "frequency_prefactor": fit_frequency_prefactor(),
            "separatrix_b": fit_separatrix_b()}
    path = Path(path) if path else analytics.CONSTANTS_FILE
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data
