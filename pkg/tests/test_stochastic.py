import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from corrnoise.errors import DomainError, FactorizationFailure, NonStationary, StepTooLarge
from corrnoise.stochastic import (OUProcess, SpectralMatrix, TwoModeParams, correlation_matrix,
                                  covariance_with_error, decorrelated_drivers, diagonal_transient_correlation,
                                  effective_sigma_squared, sample_paths, spectral_matrix, stationary_covariance,
                                  transient_correlation, two_mode_covariance, two_mode_spectral_matrix,
                                  wiener_correlation)

from helpers import random_stable_process


# --- construction --------------------------------------------------------------

def test_rejects_unstable_drift():
    with pytest.raises(NonStationary):
        OUProcess([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))
    with pytest.raises(NonStationary):
        OUProcess([[-0.5]], [[1.0]])


@pytest.mark.parametrize("xi", [
    [[1.0, 0.5], [0.4, 1.0]],      # not symmetric
    [[2.0, 0.0], [0.0, 1.0]],      # diagonal not one
])
def test_rejects_malformed_wiener_correlation(xi):
    with pytest.raises(FactorizationFailure):
        OUProcess(np.eye(2), np.eye(2), xi)


def test_rejects_indefinite_wiener_correlation():
    xi = [[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]
    with pytest.raises(FactorizationFailure):
        OUProcess(np.eye(3), np.eye(3), xi)


def test_wiener_correlation_domain():
    with pytest.raises(DomainError):
        wiener_correlation(2, [(0, 1)], 1.5)
    np.testing.assert_array_equal(wiener_correlation(3, [(0, 2)], -0.3),
                                  [[1, 0, -0.3], [0, 1, 0], [-0.3, 0, 1]])


def test_wiener_factor_reproduces_xi():
    p = OUProcess(np.eye(2), np.eye(2), [[1.0, -1.0], [-1.0, 1.0]])
    L = p.wiener_factor
    np.testing.assert_allclose(L @ L.T, p.wiener_corr, atol=1e-14)


# --- stationary covariance ------------------------------------------------------

def test_scalar_stationary_variance():
    s = stationary_covariance(OUProcess.scalar(0.7, 1.3))
    assert np.asarray(s)[0, 0] == pytest.approx(1.3**2 / (2 * 0.7), rel=1e-14)


def test_zero_diffusion_gives_zero_covariance():
    p = OUProcess([[1.0, 0.2], [0.0, 2.0]], np.zeros((2, 2)))
    np.testing.assert_array_equal(np.asarray(stationary_covariance(p)), np.zeros((2, 2)))


def test_two_mode_stationary_diagonal():
    g1, g2, s11, s12, s21, s22, xi0 = 0.8, 1.7, 0.9, 0.4, -0.3, 1.1, 0.35
    p = OUProcess(np.diag([g1, g2]), [[s11, s12], [s21, s22]], [[1, xi0], [xi0, 1]])
    sig = np.asarray(stationary_covariance(p))
    assert sig[0, 0] == pytest.approx((s11**2 + s12**2 + 2 * xi0 * s11 * s12) / (2 * g1), rel=1e-13)
    assert sig[1, 1] == pytest.approx((s21**2 + s22**2 + 2 * xi0 * s21 * s22) / (2 * g2), rel=1e-13)
    cross = (s11 * s21 + s12 * s22 + xi0 * (s11 * s22 + s12 * s21)) / (g1 + g2)
    assert sig[0, 1] == pytest.approx(cross, rel=1e-13)


def test_matches_scipy_lyapunov_for_random_processes():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_stable_process(rng, int(rng.integers(1, 6)))
        ref = scipy.linalg.solve_continuous_lyapunov(p.drift, p.noise_covariance)
        out = stationary_covariance(p)
        np.testing.assert_allclose(np.asarray(out), ref, atol=1e-11 * np.abs(ref).max())
        assert out.residual <= 1e-10
        np.testing.assert_array_equal(out.sigma, out.sigma.T)


def test_rectangular_diffusion():
    p = OUProcess([[2.0]], [[0.3, 0.4]], [[1.0, 0.5], [0.5, 1.0]])
    assert np.asarray(stationary_covariance(p))[0, 0] == pytest.approx(
        effective_sigma_squared(0.3, 0.4, 0.5) / 4.0, rel=1e-14)


# --- correlation functions ----------------------------------------------------------

def test_correlation_matrix_examples():
    p = OUProcess.scalar(1.0, math.sqrt(2.0))  # stationary variance 1
    sig = stationary_covariance(p)
    assert correlation_matrix(p, sig, 0.0)[0, 0] == np.asarray(sig)[0, 0]
    assert correlation_matrix(p, sig, 1.0)[0, 0] == pytest.approx(math.exp(-1), rel=1e-14)


def test_correlation_matrix_time_reversal():
    p = random_stable_process(np.random.default_rng(7), 3)
    sig = stationary_covariance(p)
    for tau in (0.3, 1.7):
        np.testing.assert_allclose(correlation_matrix(p, sig, -tau), correlation_matrix(p, sig, tau).T,
                                   atol=1e-14)


def test_transient_correlation_forms_agree():
    params = TwoModeParams(0.9, 1.6, 0.5, 0.2, -0.4, 0.7, 0.3)
    p = params.process()
    for t, s in [(0.4, 0.4), (1.2, 0.5), (0.3, 2.0)]:
        a = transient_correlation(p, t, s)
        b = diagonal_transient_correlation([0.9, 1.6], p.noise_covariance, t, s)
        c = two_mode_covariance(params, t, s)
        np.testing.assert_allclose(a, b, atol=1e-13)
        np.testing.assert_allclose(a, c, atol=1e-13)


# --- spectral matrix ----------------------------------------------------------------

def test_scalar_spectrum_at_zero():
    J = spectral_matrix(OUProcess.scalar(1.0, 1.0))
    assert J(0.0)[0, 0].real == pytest.approx(1 / (2 * np.pi), rel=1e-14)


def test_zero_diffusion_spectrum_vanishes():
    J = spectral_matrix(OUProcess(np.eye(2), np.zeros((2, 2))))
    assert np.all(J(np.linspace(-3, 3, 7)) == 0)


def test_spectrum_symmetries_for_nonsymmetric_drift():
    p = random_stable_process(np.random.default_rng(3), 3)
    J = spectral_matrix(p)
    for w in (0.0, 0.4, 2.5):
        Jw = J(w)
        np.testing.assert_allclose(Jw, Jw.conj().T, atol=1e-14)          # Hermitian
        np.testing.assert_allclose(J(-w), Jw.T, atol=1e-14)              # time reversal
        assert np.all(np.linalg.eigvalsh(Jw) > -1e-14)
        assert np.all(np.diag(Jw).real >= 0)


def test_spectrum_is_fourier_transform_of_correlation():
    p = random_stable_process(np.random.default_rng(4), 2)
    sig = stationary_covariance(p)
    w = 0.8
    tau = np.linspace(-60, 60, 240_001)
    G = np.array([correlation_matrix(p, sig, t) for t in tau[::100]])
    # coarse check with Simpson on a uniformly thinned grid
    from scipy.integrate import simpson
    vals = G * np.exp(-1j * w * tau[::100])[:, None, None]
    approx = simpson(vals, x=tau[::100], axis=0) / (2 * np.pi)
    np.testing.assert_allclose(approx, spectral_matrix(p)(w), atol=2e-6)


def test_two_mode_matches_general():
    params = TwoModeParams(0.7, 1.9, 0.6, -0.3, 0.25, 0.8, -0.45)
    J = spectral_matrix(params.process())
    for w in (-2.0, 0.0, 0.3, 5.0):
        ref = J(w)
        np.testing.assert_allclose(two_mode_spectral_matrix(params, w), ref, rtol=1e-12, atol=1e-15)


def test_two_mode_examples():
    # independent channels: two Lorentzians
    params = TwoModeParams(1.0, 2.0, 0.5, 0.0, 0.0, 0.7, 0.0)
    J = two_mode_spectral_matrix(params, 0.5)
    assert J[0, 1] == 0 and J[1, 0] == 0
    assert J[0, 0] == pytest.approx(0.25 / (2 * np.pi * 1.25))
    # fully correlated diagonal drivers
    g1, g2, s11, s22, w = 1.0, 2.0, 0.5, 0.7, 0.5
    J = two_mode_spectral_matrix(TwoModeParams(g1, g2, s11, 0.0, 0.0, s22, 1.0), w)
    assert J[0, 1] == pytest.approx(s11 * s22 / (2 * np.pi * (g1 + 1j * w) * (g2 - 1j * w)))
    # equal and opposite drivers cancel
    J = two_mode_spectral_matrix(TwoModeParams(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, -1.0), 0.0)
    assert abs(J[0, 0]) < 1e-16


def test_two_mode_domain():
    with pytest.raises(DomainError):
        TwoModeParams(1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.2)


def test_spectral_matrix_helpers():
    J = spectral_matrix(OUProcess.scalar(1.0, 1.0))
    assert J.scaled(3.0)(0.2)[0, 0] == pytest.approx(3 * J(0.2)[0, 0])
    grid = np.linspace(-2, 2, 401)
    T = SpectralMatrix.tabulated(grid, J(grid))
    assert T.provenance == "tabulated"
    assert T(0.505)[0, 0] == pytest.approx(J(0.505)[0, 0], rel=1e-4)
    with pytest.raises(DomainError):
        T(3.0)


# --- effective variance ---------------------------------------------------------

def test_effective_sigma_examples():
    assert effective_sigma_squared(1.0, 1.0, -1.0) == 0.0
    assert effective_sigma_squared(0.3, 0.4, 0.0) == pytest.approx(0.25)
    assert effective_sigma_squared(0.3, 0.0, 0.7) == pytest.approx(0.09)
    with pytest.raises(DomainError):
        effective_sigma_squared(1, 1, -1.01)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1))
def test_decorrelated_drivers_preserve_variance(s1, s2, xi):
    a, b = decorrelated_drivers(s1, s2, xi)
    assert a * a + b * b == pytest.approx(effective_sigma_squared(s1, s2, xi), abs=1e-12)


# --- sampling ----------------------------------------------------------------------

def test_sampling_is_thread_independent():
    p = random_stable_process(np.random.default_rng(5), 2)
    t = np.linspace(0, 1, 101)
    a = sample_paths(p, t, 50, seed=9, threads=1, chunk=7)
    b = sample_paths(p, t, 50, seed=9, threads=4, chunk=7)
    c = sample_paths(p, t, 50, seed=9, threads=1, chunk=50)
    np.testing.assert_array_equal(a.values, b.values)
    # chunking changes BLAS batching only
    np.testing.assert_allclose(a.values, c.values, rtol=0, atol=1e-13)
    d = sample_paths(p, t, 50, seed=10)
    assert not np.array_equal(a.values, d.values)


def test_sample_path_views():
    p = OUProcess.scalar(1.0, 1.0)
    ens = sample_paths(p, np.linspace(0, 1, 11), 3, seed=1, record_every=4)
    np.testing.assert_allclose(ens.times, [0.0, 0.4, 0.8, 1.0])
    paths = list(ens)
    assert len(paths) == 3 and paths[2].path_id == 2 and paths[0].values.shape == (4, 1)


def test_euler_step_guard():
    with pytest.raises(StepTooLarge):
        sample_paths(OUProcess.scalar(10.0, 1.0), np.linspace(0, 1, 11), 2, seed=0)


def test_exact_sampler_stationary_statistics():
    p = OUProcess([[1.0, 0.3], [-0.2, 0.6]], [[0.5, 0.1], [0.0, 0.8]], [[1, 0.4], [0.4, 1]])
    sig = np.asarray(stationary_covariance(p))
    ens = sample_paths(p, np.array([0.0, 0.5, 5.0]), 20_000, seed=2, method="exact")
    x = ens.values[:, -1]
    for i in range(2):
        for j in range(2):
            est, se = covariance_with_error(x[:, i], x[:, j])
            assert abs(est - sig[i, j]) < 5 * se
    lag = correlation_matrix(p, sig, 4.5)
    est, se = covariance_with_error(ens.values[:, 2, 0], ens.values[:, 1, 1])
    assert abs(est - lag[0, 1]) < 5 * se


def test_nonzero_mean_relaxation():
    p = OUProcess([[2.0]], [[0.1]], mean=[3.0])
    ens = sample_paths(p, np.linspace(0, 5, 501), 200, seed=4, initial=[0.0])
    assert ens.values[:, -1, 0].mean() == pytest.approx(3.0, abs=0.02)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**31))
def test_lyapunov_property(n, seed):
    p = random_stable_process(np.random.default_rng(seed), n)
    s = np.asarray(stationary_covariance(p))
    Q = p.noise_covariance
    res = np.abs(p.drift @ s + s @ p.drift.T - Q).max()
    assert res <= 1e-10 * max(np.abs(Q).max(), 1e-300)
    assert np.linalg.eigvalsh(s).min() >= -1e-10 * np.abs(s).max()
