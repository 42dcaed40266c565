import math

import numpy as np
import pytest

from bosedimer import model, wigner
from bosedimer.model import DimerParams, ParameterError


def random_hermitian(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (A + A.conj().T)


def test_multipole_operators_orthonormal():
    for tj in (1, 4, 7):
        B = wigner.multipole_basis(tj)
        ops = [B.operator(l, m) for l in range(tj + 1) for m in range(-l, l + 1)]
        G = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
        assert np.allclose(G, np.eye(len(ops)), atol=1e-12)


def test_multipole_expansion_is_complete(rng):
    tj = 5
    B = wigner.multipole_basis(tj)
    A = rng.normal(size=(tj + 1, tj + 1)) + 1j * rng.normal(size=(tj + 1, tj + 1))
    c = B.coefficients(A)
    # c_lm = tr[T^lm A] so A = sum c_lm (T^lm)^dagger
    rebuilt = sum(c[l, l + m] * B.operator(l, m).T for l in range(tj + 1) for m in range(-l, l + 1))
    assert np.allclose(rebuilt, A, atol=1e-12)


def test_spin_operator_symbols():
    for tj in (1, 6, 9):
        j = tj / 2
        g = wigner.exact_grid(tj)
        jx, jy, jz = model.spin_matrices(j)
        th, ph = g.theta[:, None], g.phi[None, :]
        r = math.sqrt(j * (j + 1))
        for J, ref in ((jx, np.sin(th) * np.cos(ph)), (jy, np.sin(th) * np.sin(ph)), (jz, np.cos(th) + 0 * ph)):
            f = wigner.weyl_symbol(J, j, g)
            assert np.allclose(f.values, r * ref, atol=1e-12)
        one = wigner.weyl_symbol(np.eye(tj + 1), j, g)
        assert np.allclose(one.values, 1.0, atol=1e-12)


@pytest.mark.parametrize("tj", [2, 7, 16])
def test_coherent_state_normalization_purity_and_closed_form(tj):
    j = tj / 2
    g = wigner.exact_grid(tj)
    for th, ph in [(0.0, 0.0), (math.pi / 2, 0.0), (1.2, -2.0)]:
        psi = model.scs_amplitudes(j, th, ph)
        f = wigner.state_to_wigner(psi, g, j)
        assert f.integral() == pytest.approx(1.0, abs=1e-10)
        assert f.overlap(f) == pytest.approx(1.0, abs=1e-10)
        cf = wigner.coherent_wigner_closed_form(j, g, th, ph)
        assert np.allclose(f.values, cf.values, atol=1e-9)


def test_trace_rule_random_pairs(rng):
    for k in range(100):
        tj = 1 + k % 16  # j up to 8
        j = tj / 2
        g = wigner.exact_grid(tj)
        A = random_hermitian(rng, tj + 1)
        B = random_hermitian(rng, tj + 1)
        fa = wigner.weyl_symbol(A, j, g)
        fb = wigner.weyl_symbol(B, j, g)
        assert fa.overlap(fb) == pytest.approx(np.trace(A @ B).real, abs=1e-6 * max(1, abs(np.trace(A @ B))))


def test_ldos_from_phase_space_overlap():
    p = DimerParams.from_u(16, 3.0)
    sp = model.solve(p)
    for kind in ("Zero", "Pi", "Edge", "TwinFock"):
        st = model.prepare(p, kind)
        pw = wigner.ldos_phase_space(st, sp)
        assert np.allclose(pw, np.abs(sp.overlaps(st)) ** 2, atol=1e-6)


def test_symbol_is_real_for_hermitian_and_checks():
    g = wigner.exact_grid(4)
    with pytest.raises(ParameterError):
        wigner.state_to_wigner(np.ones(5), g)
    with pytest.raises(ParameterError):
        wigner.weyl_symbol(np.ones(4), 2.0, g)
    f = wigner.weyl_symbol(np.diag([1.0, 2, 3, 4, 5]), 2.0, g)
    assert np.isrealobj(f.values)


def test_threej_wrapper():
    assert wigner.wigner_3j(1, 1, 1, -1, 0, 1) == pytest.approx(1 / math.sqrt(6))


def test_gaussian_widths_and_normalization():
    N = 200
    a, b = wigner.scs_widths(N)
    assert a == pytest.approx(1 / math.sqrt(N + 1)) and b == pytest.approx(math.sqrt(N + 1) / 2)
    assert a * b == pytest.approx(0.5)
    ap, bp = wigner.scs_widths(N, "chart")
    assert ap * bp == pytest.approx(0.5)
    n = np.linspace(-80, 80, 1601)
    phi = np.linspace(-math.pi, math.pi, 2001)
    Nn, P = np.meshgrid(n, phi, indexing="ij")
    for w in ("isotropic", "chart"):
        G = wigner.scs_gaussian(Nn, P, N, widths=w)
        tot = np.trapezoid(np.trapezoid(G, phi, axis=1), n) / (2 * math.pi)
        assert tot == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ParameterError):
        wigner.scs_widths(N, "nope")


def test_isotropic_widths_match_exact_state():
    # variance of n in the exact equatorial coherent state is j/2 = b^2 (N+1)/(N) ... to O(1/N)
    N = 400
    st = model.prepare(DimerParams.from_u(N, 1.0), "Zero")
    P = model.occupation_distribution(st)
    var = float(np.sum(P * model.m_values(N / 2) ** 2))
    a, b = wigner.scs_widths(N)
    assert var == pytest.approx(b * b, rel=0.01)
    _, bp = wigner.scs_widths(N, "chart")
    assert abs(var - bp * bp) / var > 0.5


def test_fock_and_microcanonical_helpers():
    n = np.linspace(-2, 2, 4001)
    assert np.trapezoid(wigner.fock_marginal(n, 0.3), n) == pytest.approx(1.0, abs=2e-3)
    E = np.linspace(-1, 1, 2001)
    w = wigner.microcanonical_weight(0.2, 3.0, E, 0.1)
    assert np.trapezoid(w, E) == pytest.approx(3.0, rel=1e-2)


def test_field_export_shapes():
    g = wigner.gauss_grid(6, 12)
    f = wigner.state_to_wigner(model.scs_amplitudes(1.5, 0.4, 0.1), g, 1.5)
    rows = wigner.field_rows(f)
    assert rows.shape == (72, 3)
    assert wigner.field_header(f)["shape"] == [6, 12]
