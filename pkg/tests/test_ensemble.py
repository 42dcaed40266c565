import math

import numpy as np
import pytest

from bosedimer import ensemble
from bosedimer.ensemble import Preparation
from bosedimer.model import DimerParams, ParameterError


@pytest.fixture(scope="module")
def p40():
    return DimerParams.from_u(40, 5.0)


def test_isotropic_cloud_moments(p40):
    c = ensemble.sample_cloud(p40, "Zero", 200_000, seed=1)
    S = c.points
    assert np.allclose(np.linalg.norm(S, axis=1), 1.0)
    var = 1 / (p40.N + 1)
    # undo the exponential map around the centre (1, 0, 0)
    r = np.arccos(np.clip(S[:, 0], -1, 1))
    scale = np.where(r > 0, r / np.sin(r), 1.0)
    assert (S[:, 1] * scale).var() == pytest.approx(var, rel=0.02)
    assert (S[:, 2] * scale).var() == pytest.approx(var, rel=0.02)
    assert abs(S[:, 1].mean()) < 5 * math.sqrt(var / S.shape[0])


def test_twinfock_ring(p40):
    c = ensemble.sample_cloud(p40, "TwinFock", 50_000, seed=2)
    assert np.allclose(c.points[:, 2], 0.0)
    phi = np.arctan2(c.points[:, 1], c.points[:, 0])
    hist = np.histogram(phi, bins=8, range=(-math.pi, math.pi))[0] / phi.size
    assert np.allclose(hist, 1 / 8, atol=0.01)


def test_chart_widths_stay_on_sphere(p40):
    c = ensemble.sample_cloud(p40, "Edge", 20_000, seed=3, widths="chart")
    assert np.all(np.abs(c.points[:, 2]) <= 1.0)
    assert np.allclose(np.linalg.norm(c.points, axis=1), 1.0)


def test_chunked_streams_are_prefix_stable(p40):
    a = ensemble.sample_cloud(p40, "Pi", 5000, seed=9).points
    b = ensemble.sample_cloud(p40, "Pi", 12000, seed=9).points
    assert np.array_equal(a[: ensemble.CHUNK], b[: ensemble.CHUNK])


def test_reproducible_across_workers(p40):
    c = ensemble.sample_cloud(p40, "Edge", 20_000, seed=4)
    taus = np.linspace(0, 2, 11)
    runs = [ensemble.propagate(c, taus, hist_taus=[2.0], workers=w) for w in (1, 4, 8)]
    for r in runs[1:]:
        assert np.array_equal(r.mean, runs[0].mean)
        assert np.array_equal(r.hist_n, runs[0].hist_n)
        assert np.array_equal(r.hist_phi, runs[0].hist_phi)


def test_energy_drift_and_norm(p40):
    c = ensemble.sample_cloud(p40, "Pi", 4000, seed=5)
    b = ensemble.propagate(c, np.linspace(0, 20, 41))
    assert b.max_energy_drift < 1e-8
    assert b.max_norm_error < 1e-12


def test_u0_classical_rotation():
    p = DimerParams(30, 0.0)
    prep = Preparation("SCS", 1.0, 0.5)
    c = ensemble.sample_cloud(p, prep, 3, seed=0)
    taus = np.array([0.0, 0.7, 2.0])
    b = ensemble.propagate(c, taus, keep_points=True)
    S0 = c.points
    tau = 2.0
    expect = np.column_stack([S0[:, 0], S0[:, 1] * math.cos(tau) + S0[:, 2] * math.sin(tau),
                              S0[:, 2] * math.cos(tau) - S0[:, 1] * math.sin(tau)])
    assert np.allclose(b.final_points, expect, atol=1e-9)


def test_histograms_normalized(p40):
    c = ensemble.sample_cloud(p40, "TwinFock", 10_000, seed=6)
    b = ensemble.propagate(c, np.linspace(0, 4, 9), hist_taus=[0.0, 4.0])
    assert np.allclose(b.hist_n.sum(axis=1), 1.0)
    assert np.allclose(b.hist_phi.sum(axis=1), 1.0)
    obs = ensemble.reduce_observables(b)
    assert np.allclose(obs.S, b.mean * math.sqrt(20 * 21) / 20)


def test_classical_energy_units(p40):
    S = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 0, 1.0]])
    E = ensemble.classical_energy(S, p40)
    assert np.allclose(E * p40.N * p40.K, [p40.E_minus, p40.E_x, p40.U * p40.N ** 2 / 4])


def test_errors(p40):
    c = ensemble.sample_cloud(p40, "Zero", 10, seed=0)
    with pytest.raises(ParameterError):
        ensemble.propagate(c, [0.0, 1.0, 0.5])
    with pytest.raises(ParameterError):
        ensemble.propagate(c, [0.1, 1.0])
    with pytest.raises(ParameterError):
        ensemble.sample_cloud(p40, "Zero", 0)
    with pytest.raises(ParameterError):
        ensemble.sample_cloud(p40, Preparation("Fock", n=30.0), 10)
    with pytest.raises(ParameterError):
        Preparation.named("SCS", p40)
    with pytest.raises(ParameterError):
        ensemble.sample_cloud(p40, "Zero", 10, widths="odd")


def test_default_dt_bounds():
    assert ensemble.default_dt(DimerParams(10, 0.0)) == pytest.approx(0.01)
    assert ensemble.default_dt(DimerParams.from_u(10, 99.0)) == pytest.approx(0.02 / 100)
