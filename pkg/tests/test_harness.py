import json
import math
from pathlib import Path

import numpy as np
import pytest

from bosedimer import cli, harness
from bosedimer.harness import ConfigError, RunConfig, TimeSeries, analyze_series


def _series(values, dt=0.01):
    t = np.arange(len(values)) * dt
    return TimeSeries(t, {"x": np.asarray(values, float)}, "quantum")


def test_constant_series():
    st = analyze_series(_series(np.full(4096, 0.3)))
    assert st.mean == pytest.approx(0.3) and st.rms < 1e-12 and st.parseval_ok


@pytest.mark.parametrize("w,A", [(3.0, 0.8), (11.5, 0.2)])
def test_cosine_series(w, A):
    t = np.arange(40_000) * 0.01
    st = analyze_series(TimeSeries(t, {"x": 0.1 + A * np.cos(w * t)}, "quantum"), transient=0.0)
    assert st.mean == pytest.approx(0.1, abs=1e-3)
    assert st.rms == pytest.approx(A / math.sqrt(2), rel=0.01)
    assert st.omega_peak == pytest.approx(w, rel=0.01)
    assert st.omega_centroid == pytest.approx(w, rel=0.02)
    assert st.parseval_ok


def test_series_validation():
    with pytest.raises(ValueError):
        analyze_series(_series(np.zeros(100)))
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 1.0, 3.0]), {"x": np.zeros(3)}, "quantum")
    with pytest.raises(ValueError):
        TimeSeries(np.arange(3.0), {"x": np.array([0, np.nan, 1])}, "quantum")


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"N": 12, "u": 3.0, "prep": "Pi"}))
    cfg = RunConfig.from_file(f)
    assert cfg.params().N == 12 and cfg.params().u == pytest.approx(3.0)
    c2 = cfg.merged(U=0.5, N=None)
    assert c2.u is None and c2.params().U == 0.5 and c2.N == 12
    f.write_text(json.dumps({"N": 12, "bogus": 1}))
    with pytest.raises(ConfigError):
        RunConfig.from_file(f)
    f.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.from_file(f)
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.json")
    with pytest.raises(ConfigError):
        RunConfig(u=None).params()


def test_time_grid_guards():
    cfg = RunConfig(N=20, u=4.0)
    p = cfg.params()
    taus = harness.time_grid(cfg, p)
    assert taus[-1] >= 20 * 2 * math.pi / p.omega_J
    with pytest.raises(ConfigError):
        harness.time_grid(cfg.merged(dt=math.pi / harness.max_frequency(p)), p)
    with pytest.raises(ConfigError):
        harness.time_grid(cfg.merged(T=5.0), p)
    assert harness.time_grid(cfg.merged(T=5.0), p, long_time=False)[-1] <= 5.0


def test_csv_and_sidecar(tmp_path):
    cfg = RunConfig(N=8, u=2.0)
    path = harness.write_csv(tmp_path / "sub" / "a.csv", ["x", "y"], [(0.1, "a,b"), (np.float64(2.5), np.int64(3))])
    raw = path.read_bytes()
    assert raw == b'x,y\r\n0.1,"a,b"\r\n2.5,3\r\n'
    side = harness.write_sidecar(path, cfg, cfg.params(), 0.5, {"extra": np.array([1.0, np.inf])})
    meta = json.loads(side.read_text())
    assert meta["config"]["N"] == 8 and meta["derived"]["omega_J"] > 0
    assert meta["backend"] in ("numba", "numpy") and meta["extra"] == [1.0, None]
    assert not list((tmp_path / "sub").glob("*.tmp"))


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    p = harness.write_csv(tmp_path / "a.csv", ["x"], [(1,)])

    def rows():
        yield (2,)
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        harness.write_csv(p, ["x"], rows())
    assert p.read_bytes() == b"x\r\n1\r\n"
    assert not list(tmp_path.glob("*.tmp"))


def test_run_quantum_writes(tmp_path):
    run = harness.run_quantum(RunConfig(N=10, u=2.0, prep="Pi", out=str(tmp_path)))
    assert len(run.paths) == 2 and all(p.exists() for p in run.paths)
    assert run.stats is not None and run.stats.parseval_ok
    lt = harness.long_time_stats(run.params, "Pi")
    assert run.stats.mean == pytest.approx(lt["mean"], abs=0.02)


@pytest.mark.parametrize("kind", ["ensemble", "sweep"])
def test_worker_count_does_not_change_bytes(tmp_path, kind):
    blobs = []
    for w in (1, 4, 8):
        out = tmp_path / f"w{w}"
        cfg = RunConfig(N=20, u=4.0, prep="Pi", size=9000, seed=7, workers=w, out=str(out),
                        sweep_N=[20, 30], sweep_u=[2.0, 6.0], preps=["Zero", "Pi"])
        if kind == "ensemble":
            paths = harness.run_ensemble(cfg, taus=np.linspace(0, 2, 21), hist_taus=[2.0]).paths
        else:
            paths = [harness.run_sweep(cfg).path]
        blobs.append([Path(p).read_bytes() for p in paths])
    assert blobs[0] == blobs[1] == blobs[2]


def test_sweep_records_point_errors(tmp_path):
    cfg = RunConfig(N=11, sweep_N=[11], sweep_u=[2.0], preps=["Zero", "Fock", "TwinFock"], out=str(tmp_path))
    t = harness.run_sweep(cfg)
    assert list(t.column("prep")) == ["Zero", "Fock"]
    err = t.column("error")
    assert err[0] == "" and "ParameterError" in err[1]
    assert math.isnan(t.column("M")[1])


def test_power_law_fit():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    k, a = harness.power_law_fit(x, 3.0 * x ** -0.25)
    assert k == pytest.approx(-0.25) and a == pytest.approx(3.0)


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.run(["spectrum", "--N", "6", "--u", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "spectrum_N6_u2.csv").exists()
    assert cli.run(["spectrum", "--N", "-3", "--out", str(tmp_path)]) == 2
    assert cli.run(["ldos", "--N", "7", "--prep", "TwinFock", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.run(["wkb", "--config", str(bad)]) == 2

    def boom(*a, **k):
        raise ArithmeticError("overflow")

    monkeypatch.setattr(harness, "run_quantum", boom)
    assert cli.run(["evolve", "--N", "6", "--out", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_cli_subcommands(tmp_path):
    o = str(tmp_path)
    assert cli.run(["wkb", "--N", "20", "--u", "10", "--out", o]) == 0
    assert cli.run(["ldos", "--N", "40", "--u", "5", "--prep", "Edge", "--out", o]) == 0
    meta = json.loads((tmp_path / "ldos_edge_N40_u5.csv.json").read_text())
    assert meta["tv_distance"] < 0.2
    assert cli.run(["ensemble", "--N", "20", "--size", "500", "--T", "1", "--dt", "0.1", "--out", o]) == 0
    assert cli.run(["wigner", "--N", "6", "--grid", "24", "--T", "0.5", "--out", o]) == 0
    assert cli.run(["fig", "1", "--N", "12", "--u", "6", "--out", o]) == 0
