import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from bosedimer import model
from bosedimer.model import DimerParams, ParameterError


def dense_hamiltonian(p: DimerParams) -> np.ndarray:
    jx, jy, jz = model.spin_matrices(p.j)
    return p.U * jz @ jz - p.eps * jz - p.K * jx


def test_params_validation():
    with pytest.raises(ParameterError):
        DimerParams(0, 1.0)
    with pytest.raises(ParameterError):
        DimerParams(2.5, 1.0)
    with pytest.raises(ParameterError):
        DimerParams(4, 1.0, K=0.0)
    with pytest.raises(ParameterError):
        DimerParams(4, float("nan"))
    p = DimerParams.from_u(100, 4.0)
    assert p.u == pytest.approx(4.0)
    assert p.omega_J == pytest.approx(2.0)
    assert p.dim == 101 and p.h == pytest.approx(4 * math.pi / 101)
    assert p.regime == "Josephson"
    assert DimerParams.from_u(10, 0.5).regime == "Rabi"
    assert DimerParams.from_u(10, 200.0).regime == "Fock"
    assert p.derived()["eps_c"] == pytest.approx((4 ** (2 / 3) - 1) ** 1.5)


def test_spin_algebra():
    for j in (0.5, 1, 2.5, 4):
        jx, jy, jz = model.spin_matrices(j)
        assert np.allclose(jx @ jy - jy @ jx, 1j * jz)
        cas = jx @ jx + jy @ jy + jz @ jz
        assert np.allclose(cas, j * (j + 1) * np.eye(int(2 * j + 1)))


def test_n2_closed_form():
    w = model.solve(DimerParams(2, 1.0, 1.0)).energies
    assert np.allclose(w, [(1 - math.sqrt(5)) / 2, 1.0, (1 + math.sqrt(5)) / 2], atol=1e-12)


def test_three_by_three_brute_force(rng):
    for _ in range(20):
        U, K, eps = rng.uniform(-2, 2), rng.uniform(0.1, 2), rng.uniform(-1, 1)
        p = DimerParams(2, U, K, eps)
        H = dense_hamiltonian(p).real
        # brute force: roots of the characteristic cubic
        coeffs = np.poly(H)
        roots = np.sort(np.roots(coeffs).real)
        assert np.allclose(model.solve(p).energies, roots, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 12), U=st.floats(-3, 3), K=st.floats(0.05, 3), eps=st.floats(-2, 2))
def test_spectrum_property(N, U, K, eps):
    p = DimerParams(N, U, K, eps)
    sp = model.solve(p)
    H = dense_hamiltonian(p)
    assert np.allclose(sp.energies, np.linalg.eigvalsh(H), atol=1e-10 * max(1, abs(U) * N * N, K * N))
    V = sp.vectors
    assert np.allclose(V.T @ V, np.eye(p.dim), atol=1e-10)
    assert np.allclose(H.real @ V, V * sp.energies, atol=1e-9 * max(1, abs(U) * N * N, K * N))


def test_parity_labels():
    for N in (9, 10):
        p = DimerParams.from_u(N, 3.0)
        sp = model.solve(p)
        R = model.reflection_matrix(p.dim)
        for k in range(p.dim):
            v = sp.vectors[:, k]
            assert np.allclose(R @ v, sp.parity[k] * v, atol=1e-10)
        assert sp.parity[0] == 1


def test_scs_matches_rotation_oracle():
    for j in (0.5, 2, 3.5, 6):
        jx, jy, jz = model.spin_matrices(j)
        top = np.zeros(int(2 * j + 1), complex)
        top[-1] = 1.0
        for th, ph in [(0.3, 0.0), (math.pi / 2, 0.0), (math.pi / 2, math.pi), (2.0, -1.1), (-0.7, 0.4)]:
            ref = expm(-1j * ph * jz) @ expm(-1j * th * jy) @ top
            a = model.scs_amplitudes(j, th, ph)
            assert abs(np.vdot(ref, a)) == pytest.approx(1.0, abs=1e-12)
            # equatorial state: 2^-j sqrt(C(2j, j+m)) magnitudes
        a = model.scs_amplitudes(j, math.pi / 2, 0.0)
        m = model.m_values(j)
        mag = np.array([math.sqrt(math.comb(int(2 * j), int(j + mm))) for mm in m]) * 2.0 ** (-j)
        assert np.allclose(np.abs(a), mag, atol=1e-13)


def test_preparations_and_bloch_vectors():
    p = DimerParams.from_u(40, 5.0)
    b = model.bloch_vector(model.prepare(p, "Zero"))
    assert b.x == pytest.approx(1.0) and abs(b.y) < 1e-12 and abs(b.z) < 1e-12
    assert model.bloch_vector(model.prepare(p, "Pi")).x == pytest.approx(-1.0)
    tf = model.bloch_vector(model.prepare(p, "TwinFock"))
    assert np.allclose(tf.S, 0.0) and tf.purity == pytest.approx(0.5)
    e = model.bloch_vector(model.prepare(p, "Edge"))
    assert e.z > 0 and e.x > 0
    with pytest.raises(ParameterError):
        model.prepare(DimerParams.from_u(41, 5.0), "TwinFock")
    with pytest.raises(ParameterError):
        model.prepare(p, "Fock", n=0.5)
    with pytest.raises(ParameterError):
        model.prepare(p, "Nonsense")
    with pytest.raises(ParameterError):
        model.prepare(DimerParams.from_u(40, 0.5), "Edge")


def test_u0_is_rigid_rotation():
    p = DimerParams(30, 0.0, 1.0)
    sp = model.solve(p)
    st0 = model.prepare(p, "SCS", theta=1.1, phi=0.4)
    S0 = model.bloch_vector(st0).S
    for tau in (0.3, 1.7, 5.0):
        S = model.bloch_vector(model.evolve(st0, sp, tau)).S
        assert S[0] == pytest.approx(S0[0], abs=1e-10)
        # H = -K Jx: rotation about +x by angle -tau
        assert S[2] == pytest.approx(S0[2] * math.cos(tau) - S0[1] * math.sin(tau), abs=1e-10)
        assert S[1] == pytest.approx(S0[1] * math.cos(tau) + S0[2] * math.sin(tau), abs=1e-10)


def test_expectation_series_matches_evolve():
    p = DimerParams.from_u(20, 3.0)
    sp = model.solve(p)
    st0 = model.prepare(p, "Edge")
    taus = np.linspace(0, 7, 15)
    ser = model.expectation_series(st0, sp, taus)
    for k, t in enumerate(taus):
        S = model.bloch_vector(model.evolve(st0, sp, t)).S
        assert np.allclose([ser["x"][k], ser["y"][k], ser["z"][k]], S, atol=1e-12)


def test_norm_and_energy_conserved():
    p = DimerParams.from_u(50, 4.0, eps=0.3)
    sp = model.solve(p)
    st0 = model.prepare(p, "SCS", theta=1.0, phi=2.0)
    H = model.build_hamiltonian(p)
    E0 = np.vdot(st0.amps, H.matvec(st0.amps)).real
    st1 = model.evolve(st0, sp, 1000.0)
    assert abs(st1.norm - 1) < 1e-12
    assert abs(np.vdot(st1.amps, H.matvec(st1.amps)).real - E0) < 1e-8


def test_ldos_quantum_is_a_distribution():
    p = DimerParams.from_u(30, 4.0)
    sp = model.solve(p)
    for k in ("Zero", "Pi", "Edge", "TwinFock"):
        prof = model.ldos_quantum(model.prepare(p, k), sp)
        assert prof.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert 1 <= prof.M <= np.count_nonzero(prof.weights > 0)
    # mirror-symmetric preparations live on even levels only
    prof = model.ldos_quantum(model.prepare(p, "Pi"), sp)
    assert np.all(prof.weights[sp.parity < 0] < 1e-20)


def test_observable_matrix_hermitian():
    p = DimerParams.from_u(16, 2.0)
    sp = model.solve(p)
    jx, jy, jz = model.spin_matrices(p.j)
    for w, J in (("x", jx), ("y", jy), ("z", jz)):
        X = model.observable_matrix(sp, w)
        assert np.allclose(X, X.conj().T)
        assert np.allclose(X, (2 / p.N) * sp.vectors.T @ J @ sp.vectors, atol=1e-12)
