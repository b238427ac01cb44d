"""Shared builders and independent closed forms used by the test-suite."""

from __future__ import annotations

import numpy as np

from corrnoise.models import QubitPairParams, build_qubit_pair, build_single_qubit
from corrnoise.stochastic import OUProcess, wiener_correlation

# Default two-qubit parameters: eps = 1, J/eps = -0.2, slow baths (gamma << eps),
# site-energy noise twice as strong as the transverse noise.
EPS = 1.0
J_COUPLING = -0.2
GAMMA = 0.1
SIGMA_X = 0.01
SIGMA_Z = 0.02
FOUR_CHANNELS = {0: (1, "x"), 1: (2, "x"), 2: (1, "z"), 3: (2, "z")}
X_PAIR = (0, 1)
Z_PAIR = (2, 3)


def qubit_pair(eps1=EPS, eps2=EPS, j=J_COUPLING, wiring=FOUR_CHANNELS):
    return build_qubit_pair(QubitPairParams(eps1, eps2, j, wiring))


def four_channel_noise(xi, pair=Z_PAIR, sx=SIGMA_X, sz=SIGMA_Z, gamma=GAMMA):
    return OUProcess.diagonal([gamma] * 4, [sx, sx, sz, sz], wiener_correlation(4, [pair], xi))


def random_stable_process(rng, n, m=None):
    """Random OU process with eigenvalues of the drift in Re >= 0.2."""
    m = n if m is None else m
    g = rng.normal(size=(n, n))
    skew = rng.normal(size=(n, n))
    A = 0.3 * g @ g.T / n + 0.2 * np.eye(n) + 0.5 * (skew - skew.T) / np.sqrt(n)
    B = rng.normal(size=(n, m))
    c = rng.normal(size=(m, m + 1))
    xi = c @ c.T
    d = np.sqrt(np.diag(xi))
    xi = xi / np.outer(d, d)
    np.fill_diagonal(xi, 1.0)
    return OUProcess(A, B, xi)


# --- single qubit with x/z channels ------------------------------------------

def table_process(gx, gz, sx, sz, sxz, xi):
    """x channel driven by ``sx dW1 + sxz dW2``, z channel by ``sxz dW1 + sz dW2``."""
    return OUProcess(np.diag([gx, gz]), [[sx, sxz], [sxz, sz]], [[1.0, xi], [xi, 1.0]])


def table_model(eps):
    return build_single_qubit(eps, ("x", "z"))


# Table index 1 is the upper level; eigen-index 0 is the lower one.
TABLE_INDEX = {1: 1, 2: 0}
SECULAR_ROWS = [(1, 1, 1, 1), (1, 1, 2, 2), (1, 2, 1, 2), (2, 1, 2, 1), (2, 2, 1, 1), (2, 2, 2, 2)]


def table_key(row):
    return tuple(TABLE_INDEX[q] for q in row)


def table_spectral_forms(J, eps):
    """Middle column of the single-qubit table, written in terms of ``J``."""
    x, z = 0, 1

    def j(a, b, w):
        return J(w)[a, b]

    e = eps
    return {
        (1, 1, 1, 1): j(x, x, -e) + j(x, x, e),
        (1, 1, 1, 2): -j(x, z, 0) - j(z, x, 0),
        (1, 1, 2, 1): j(x, z, -e) - j(z, x, -e) - 2 * j(z, x, 0),
        (1, 1, 2, 2): -j(x, x, -e) - j(x, x, e),
        (1, 2, 1, 1): -2 * j(x, z, -e) - j(x, z, 0) + j(z, x, 0),
        (1, 2, 1, 2): 2 * (j(x, x, e) + 2 * j(z, z, 0)),
        (1, 2, 2, 1): -2 * j(x, x, -e),
        (1, 2, 2, 2): j(x, z, -e) + j(z, x, -e),
        (2, 1, 1, 1): -j(x, z, e) - j(z, x, e),
        (2, 1, 1, 2): -2 * j(x, x, e),
        (2, 1, 2, 1): 2 * (j(x, x, -e) + 2 * j(z, z, 0)),
        (2, 1, 2, 2): 2 * j(x, z, e) + j(x, z, 0) - j(z, x, 0),
        (2, 2, 1, 1): -j(x, x, -e) - j(x, x, e),
        (2, 2, 1, 2): -j(x, z, e) + j(z, x, e) + 2 * j(z, x, 0),
        (2, 2, 2, 1): j(x, z, 0) + j(z, x, 0),
        (2, 2, 2, 2): j(x, x, -e) + j(x, x, e),
    }


def table_ou_secular(eps, gx, gz, sx, sz, sxz, xi):
    """Secular entries of the last (closed-form) column of the table, as printed."""
    pop = 2 * sx * (sx + 2 * xi * sxz) / (gx**2 + eps**2)
    coh = (4 * sxz**2 * (gx**2 + eps**2) + 4 * xi * sxz * (2 * sz * (gx**2 + eps**2) + sx * gz**2)
           + 2 * sx**2 * gz**2) / (gz**2 * (gx**2 + eps**2))
    return {(1, 1, 1, 1): pop, (1, 1, 2, 2): -pop, (1, 2, 1, 2): coh,
            (2, 1, 2, 1): coh, (2, 2, 1, 1): -pop, (2, 2, 2, 2): pop}


def table_ou_omitted(eps, gx, gz, sx, sz, sxz, xi):
    """What the printed secular entries lack relative to a valid OU model (times 2 pi)."""
    pop = 2 * sxz**2 / (gx**2 + eps**2)
    coh = 2 * sxz**2 / (gx**2 + eps**2) + 4 * sz**2 / gz**2
    return {(1, 1, 1, 1): pop, (1, 1, 2, 2): -pop, (1, 2, 1, 2): coh,
            (2, 1, 2, 1): coh, (2, 2, 1, 1): -pop, (2, 2, 2, 2): pop}
