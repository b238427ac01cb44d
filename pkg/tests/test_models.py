import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrnoise.errors import DomainError
from corrnoise.models import (SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, BellKind, DensityMatrix,
                              QubitPairParams, SystemModel, bell_density, bell_state, build_qubit_pair,
                              build_single_qubit, dipole_operator, gibbs_state, partial_trace, site_operator)

KET = {s: np.eye(4)[i] for i, s in enumerate(("00", "01", "10", "11"))}


def pair(eps1=1.0, eps2=1.0, j=-0.2, wiring=((1, "z"), (2, "z"))):
    return build_qubit_pair(QubitPairParams(eps1, eps2, j, wiring))


def test_pauli_algebra():
    for a, b, c in ((SIGMA_X, SIGMA_Y, SIGMA_Z), (SIGMA_Y, SIGMA_Z, SIGMA_X), (SIGMA_Z, SIGMA_X, SIGMA_Y)):
        np.testing.assert_allclose(a @ b - b @ a, 2j * c, atol=1e-15)
        np.testing.assert_allclose(a @ a, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(SIGMA_PLUS + SIGMA_MINUS, SIGMA_X)
    np.testing.assert_allclose(SIGMA_PLUS @ np.array([1, 0]), [0, 1])  # raises |0> to |1>


def test_single_qubit_levels():
    m = build_single_qubit(1.3)
    np.testing.assert_allclose(m.energies, [-0.65, 0.65])
    a = m.coupling_elements()
    assert a[0, 0, 1] == pytest.approx(1.0)
    np.testing.assert_allclose(np.diag(a[1]).real, [-1, 1])
    with pytest.raises(DomainError):
        build_single_qubit(0.0)


def test_pair_spectrum_and_splitting():
    for j in (0.3, -0.2):
        m = pair(j=j)
        np.testing.assert_allclose(m.energies, np.sort([-1.0, 1.0, j, -j]), atol=1e-14)
        psi_plus = bell_state("psi+").vector
        psi_minus = bell_state("psi-").vector
        H = m.hamiltonian
        e_sym = np.vdot(psi_plus, H @ psi_plus).real
        e_anti = np.vdot(psi_minus, H @ psi_minus).real
        assert e_sym - e_anti == pytest.approx(2 * j)
    assert e_sym < e_anti  # J < 0 puts the symmetric state lower


def test_uncoupled_pair_is_product_basis():
    m = pair(eps1=1.0, eps2=1.5, j=0.0)
    U = np.abs(m.eigenvectors)
    # energies -1.25, -0.25 (|10>), 0.25 (|01>), 1.25
    np.testing.assert_allclose(U, np.eye(4)[:, [0, 2, 1, 3]], atol=1e-14)


def test_detuned_pair_has_two_bright_transitions():
    m = pair(eps1=1.0, eps2=1.3, j=-0.2)
    mu = m.to_eigenbasis(dipole_operator().mu)
    assert abs(mu[1, 0]) > 0.1 and abs(mu[2, 0]) > 0.1
    m = pair(j=-0.2)
    mu = m.to_eigenbasis(dipole_operator().mu)
    assert abs(mu[1, 0]) * abs(mu[2, 0]) < 1e-14  # only one single-excitation state is bright


def test_eigenvectors_phase_convention():
    m = pair(eps1=1.0, eps2=1.2, j=0.4)
    for j in range(4):
        k = np.argmax(np.abs(m.eigenvectors[:, j]))
        assert abs(m.eigenvectors[k, j].imag) < 1e-15 and m.eigenvectors[k, j].real > 0


def test_wiring_validation():
    with pytest.raises(ValueError):
        QubitPairParams(1, 1, 0, ((3, "z"),))
    with pytest.raises(ValueError):
        QubitPairParams(1, 1, 0, ((1, "w"),))
    with pytest.raises(ValueError):
        QubitPairParams(1, 1, 0, {0: (1, "z"), 2: (2, "z")})
    p = QubitPairParams(1, 1, 0, {1: (2, "x"), 0: (1, "z")})
    assert p.noise_wiring == ((1, "z"), (2, "x"))


def test_system_model_rejects_non_hermitian():
    with pytest.raises(ValueError):
        SystemModel(np.array([[0, 1], [0, 0]]), ())
    with pytest.raises(ValueError):
        SystemModel(np.eye(2), (np.array([[0, 1j], [1j, 0]]),))


def test_site_operator():
    np.testing.assert_allclose(site_operator(SIGMA_Z, 1), np.diag([-1, -1, 1, 1]))
    np.testing.assert_allclose(site_operator(SIGMA_Z, 2), np.diag([-1, 1, -1, 1]))
    with pytest.raises(ValueError):
        site_operator(SIGMA_Z, 0)


@pytest.mark.parametrize("kind,amps", [
    ("phi+", (1, 0, 0, 1)), ("phi-", (1, 0, 0, -1)), ("psi+", (0, 1, 1, 0)), ("psi-", (0, 1, -1, 0)),
])
def test_bell_amplitudes(kind, amps):
    v = bell_state(kind).vector
    np.testing.assert_allclose(v, np.array(amps) / np.sqrt(2), atol=1e-16)
    rho = bell_density(kind)
    assert np.trace(rho.rho @ rho.rho).real == pytest.approx(1.0)
    np.testing.assert_allclose(partial_trace(rho.rho, 1), np.eye(2) / 2, atol=1e-16)
    np.testing.assert_allclose(partial_trace(rho.rho, 2), np.eye(2) / 2, atol=1e-16)


def test_bell_basis_orthonormal_and_parsing():
    V = np.array([bell_state(k).vector for k in BellKind])
    np.testing.assert_allclose(V @ V.conj().T, np.eye(4), atol=1e-15)
    assert BellKind.parse("PHI_PLUS") is BellKind.PHI_PLUS
    assert BellKind.parse("ψ⁻") is BellKind.PSI_MINUS
    assert BellKind.parse("psi_plus") is BellKind.PSI_PLUS
    with pytest.raises(ValueError):
        BellKind.parse("chi+")


def test_partial_trace_of_product_state():
    a = np.array([[0.7, 0.2], [0.2, 0.3]])
    b = np.array([[0.4, -0.1j], [0.1j, 0.6]])
    rho = np.kron(a, b)
    np.testing.assert_allclose(partial_trace(rho, 1), a, atol=1e-15)
    np.testing.assert_allclose(partial_trace(rho, 2), b, atol=1e-15)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))
    DensityMatrix.pure([1, 1j])
    assert DensityMatrix.maximally_mixed(4).dim == 4


def test_dipole_selection_rules():
    mu = dipole_operator().mu
    psi_plus, psi_minus = bell_state("psi+").vector, bell_state("psi-").vector
    assert abs(np.vdot(psi_minus, mu @ KET["00"])) < 1e-15
    assert np.vdot(psi_plus, mu @ KET["00"]).real == pytest.approx(np.sqrt(2))
    assert abs(np.vdot(KET["11"], mu @ KET["00"])) == 0  # no two-photon element
    one_site = dipole_operator(1.0, 0.0).mu
    np.testing.assert_allclose(one_site, site_operator(SIGMA_X, 1))
    # mu only connects states differing in one excitation
    n_exc = np.array([0, 1, 1, 2])
    for i in range(4):
        for j in range(4):
            if abs(n_exc[i] - n_exc[j]) != 1:
                assert mu[i, j] == 0


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(-0.5, 0.5))
def test_hamiltonian_hermitian_and_excitation_conserving(e1, e2, j):
    m = pair(e1, e2, j)
    H = m.hamiltonian
    np.testing.assert_allclose(H, H.conj().T)
    N = site_operator(SIGMA_PLUS @ SIGMA_MINUS, 1) + site_operator(SIGMA_PLUS @ SIGMA_MINUS, 2)
    np.testing.assert_allclose(H @ N - N @ H, 0, atol=1e-14)


def test_gibbs_state():
    m = pair()
    g = gibbs_state(m, 0.0)
    np.testing.assert_allclose(np.diag(g).real, [1, 0, 0, 0])
    hot = gibbs_state(m, 1e6)
    np.testing.assert_allclose(np.diag(hot).real, 0.25, atol=1e-6)
    warm = np.diag(gibbs_state(m, 0.5)).real
    assert np.all(np.diff(warm) < 0) and warm.sum() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        gibbs_state(m, -1.0)
    lab_ground = m.to_lab(g)
    np.testing.assert_allclose(lab_ground, np.outer(KET["00"], KET["00"]), atol=1e-14)


def test_transformed_model_keeps_energies():
    m = pair(eps1=1.0, eps2=1.1, j=0.3)
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(4, 4)) + 1j * np.random.default_rng(1).normal(size=(4, 4)))
    np.testing.assert_allclose(m.transformed(q).energies, m.energies, atol=1e-13)
