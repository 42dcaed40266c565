"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analytics, harness
from .harness import ConfigError, RunConfig, write_csv, write_sidecar
from .kernels import ConvergenceError
from .model import ParameterError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("run parameters (override --config)")
    g.add_argument("--config", help="JSON file with the same keys as the flags")
    g.add_argument("--N", type=int)
    g.add_argument("--u", type=float, help="dimensionless interaction NU/K")
    g.add_argument("--U", type=float, help="interaction U (alternative to --u)")
    g.add_argument("--K", type=float)
    g.add_argument("--eps", type=float)
    g.add_argument("--prep", help="Zero, Pi, Edge, TwinFock, Fock or SCS")
    g.add_argument("--n", type=float, help="Fock occupation imbalance")
    g.add_argument("--theta", type=float)
    g.add_argument("--phi", type=float)
    g.add_argument("--T", type=float, help="horizon in tau = K t units")
    g.add_argument("--dt", type=float, help="sample step in tau units")
    g.add_argument("--size", type=int, help="ensemble size")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--grid", type=int, help="theta resolution of Wigner grids")
    g.add_argument("--workers", type=int)
    g.add_argument("--widths", choices=["isotropic", "chart"])


def _list_flags(p: argparse.ArgumentParser):
    p.add_argument("--sweep-N", type=int, nargs="+", dest="sweep_N")
    p.add_argument("--sweep-u", type=float, nargs="+", dest="sweep_u")
    p.add_argument("--sweep-u-over-N", type=float, nargs="+", dest="sweep_u_over_N")
    p.add_argument("--preps", nargs="+")


FLAG_KEYS = ("N", "u", "U", "K", "eps", "prep", "n", "theta", "phi", "T", "dt", "size", "seed",
             "out", "grid", "workers", "widths", "sweep_N", "sweep_u", "sweep_u_over_N", "preps")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bosedimer", description="Bose-Hubbard dimer simulations")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in [
        ("spectrum", "exact eigenvalues and parities"),
        ("wkb", "WKB levels against the exact ladder"),
        ("ldos", "exact and semiclassical LDOS"),
        ("evolve", "exact S(tau) and fluctuation statistics"),
        ("ensemble", "truncated-Wigner ensemble evolution"),
        ("wigner", "Wigner function of the evolved state"),
        ("sweep", "long-time statistics over an (N, u) grid"),
        ("fit", "refit the frozen constants"),
    ]:
        p = sub.add_parser(name, help=hlp)
        _common(p)
        if name == "sweep":
            _list_flags(p)
        if name in ("ldos",):
            p.add_argument("--method", choices=["stripe", "closed_form"], default="stripe")
        if name == "fit":
            p.add_argument("--write", action="store_true", help="overwrite the packaged constants file")
    p = sub.add_parser("fig", help="data behind one figure")
    p.add_argument("number", type=int, choices=range(1, 9))
    _common(p)
    _list_flags(p)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    over = {k: getattr(args, k, None) for k in FLAG_KEYS}
    cfg = cfg.merged(**over)
    cfg.params()
    return cfg


def _cmd_spectrum(cfg: RunConfig):
    from .model import solve

    t0 = time.perf_counter()
    params = cfg.params()
    spec = solve(params)
    p = write_csv(Path(cfg.out) / f"spectrum_{harness._tag(params)}.csv", ["nu", "E", "parity"],
                  zip(range(len(spec)), spec.energies, spec.parity))
    write_sidecar(p, cfg, params, time.perf_counter() - t0)
    return [p]


def _cmd_wkb(cfg: RunConfig):
    from .model import solve
    from .wkb import omega_x, wkb_levels

    t0 = time.perf_counter()
    params = cfg.params()
    spec = solve(params)
    wk = wkb_levels(params)
    rows = zip(range(len(spec)), spec.energies, wk.energies, wk.kind, wk.omega, wk.near_separatrix.astype(int))
    p = write_csv(Path(cfg.out) / f"wkb_{harness._tag(params)}.csv",
                  ["nu", "E_exact", "E_wkb", "kind", "omega", "near_separatrix"], rows)
    extra = {"nu_x": wk.nu_x}
    if params.u > 1:
        extra["omega_x"] = omega_x(params)
    write_sidecar(p, cfg, params, time.perf_counter() - t0, extra)
    return [p]


def _cmd_ldos(cfg: RunConfig, method: str):
    from .model import ldos_quantum, prepare, solve

    t0 = time.perf_counter()
    params = cfg.params()
    spec = solve(params)
    q = ldos_quantum(prepare(params, cfg.prep, n=cfg.n, theta=cfg.theta, phi=cfg.phi), spec)
    cols = ["nu", "E", "parity", "p_exact"]
    data = [range(len(spec)), spec.energies, spec.parity, q.weights]
    extra = {"M_exact": q.M, "width": q.width}
    if params.eps == 0 and cfg.prep.lower() in ("zero", "pi", "edge", "twinfock"):
        s = analytics.ldos_semiclassical(cfg.prep, params, spec, method=method)
        cols.append("p_semiclassical")
        data.append(s.weights)
        extra.update({"M_semiclassical": s.M, "tv_distance": q.tv_distance(s), "method": method})
    p = write_csv(Path(cfg.out) / f"ldos_{harness._tag(params, cfg.prep)}.csv", cols, zip(*data))
    write_sidecar(p, cfg, params, time.perf_counter() - t0, extra)
    return [p]


def _cmd_wigner(cfg: RunConfig):
    from .model import evolve, prepare, solve

    t0 = time.perf_counter()
    params = cfg.params()
    st = prepare(params, cfg.prep, n=cfg.n, theta=cfg.theta, phi=cfg.phi)
    tau = cfg.T or 0.0
    if tau:
        st = evolve(st, solve(params), tau)
    return [harness._wigner_csv(cfg, params, st, f"wigner_{harness._tag(params, cfg.prep)}_tau{tau:g}.csv", t0)]


def _cmd_ensemble(cfg: RunConfig):
    params = cfg.params()
    T = cfg.T if cfg.T is not None else 3 * 2 * math.pi / params.omega_J * params.K
    dt = cfg.dt if cfg.dt is not None else min(0.05, harness.default_step(params))
    c = replace(cfg, T=T, dt=dt)
    taus = harness.time_grid(c, params, long_time=False)
    return harness.run_ensemble(c, taus=taus, hist_taus=[taus[-1]]).paths


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        cmd = args.command
        if cmd == "spectrum":
            paths = _cmd_spectrum(cfg)
        elif cmd == "wkb":
            paths = _cmd_wkb(cfg)
        elif cmd == "ldos":
            paths = _cmd_ldos(cfg, args.method)
        elif cmd == "evolve":
            long_time = cfg.T is None
            paths = harness.run_quantum(cfg, long_time=long_time).paths
        elif cmd == "ensemble":
            paths = _cmd_ensemble(cfg)
        elif cmd == "wigner":
            paths = _cmd_wigner(cfg)
        elif cmd == "sweep":
            paths = [harness.run_sweep(cfg).path]
        elif cmd == "fit":
            data = harness.refit_constants() if args.write else {
                "frequency_prefactor": harness.fit_frequency_prefactor(),
                "separatrix_b": harness.fit_separatrix_b()}
            print(json.dumps(harness._jsonable(data), indent=2))
            return EXIT_OK
        else:
            paths = harness.run_figure(args.number, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ConvergenceError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
