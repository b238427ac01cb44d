"""Multivariate Ornstein-Uhlenbeck noise with correlated Wiener drivers.

The process is

    dE = A (mu - E) dt + B dW,      dW_i dW_j = xi_ij dt,

with drift matrix ``A`` (all eigenvalues in the right half plane), diffusion
matrix ``B`` of shape ``(n, m)`` and Wiener correlation matrix ``xi`` of shape
``(m, m)``.  Everything second order flows through the noise covariance
``Q = B xi B^T``:

* stationary covariance ``sigma`` solves ``A sigma + sigma A^T = Q``;
* stationary correlation ``G(tau) = <E(t) E(t - tau)^T>`` equals
  ``expm(-A tau) sigma`` for ``tau >= 0`` and ``sigma expm(A^T tau)`` otherwise;
* the spectral matrix is ``J(w) = (A + iw)^-1 Q (A^T - iw)^-1 / 2 pi``, the
  Fourier transform ``(1/2pi) int exp(-i w tau) G(tau) dtau``.

``J`` is Hermitian at every frequency and ``J(-w) = J(w)^T = conj(J(w))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DomainError,
    FactorizationFailure,
    IllConditioned,
    NonStationary,
    SingularResolvent,
    StepTooLarge,
)

__all__ = [
    "OUProcess",
    "StationaryCovariance",
    "SpectralMatrix",
    "SamplePath",
    "PathEnsemble",
    "TwoModeParams",
    "wiener_correlation",
    "stationary_covariance",
    "correlation_matrix",
    "transient_correlation",
    "diagonal_transient_correlation",
    "spectral_matrix",
    "two_mode_spectral_matrix",
    "two_mode_covariance",
    "effective_sigma_squared",
    "decorrelated_drivers",
    "sample_paths",
    "covariance_with_error",
]

_SYM_TOL = 1e-12
_PSD_JITTER = 1e-14
_LYAP_TOL = 1e-10


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def wiener_correlation(n: int, pairs: Sequence[tuple[int, int]] = (), xi: float = 0.0) -> np.ndarray:
    """Identity correlation matrix with ``xi`` placed on the listed channel pairs."""
    if abs(xi) > 1:
        raise DomainError(f"correlation xi={xi} outside [-1, 1]")
    corr = np.eye(n)
    for i, j in pairs:
        if i == j:
            raise DomainError(f"pair ({i}, {j}) is not an off-diagonal entry")
        corr[i, j] = corr[j, i] = xi
    return corr


@dataclass(frozen=True)
class OUProcess:
    """Parameters of a multivariate OU process.

    Parameters
    ----------
    drift : (n, n) array_like
        Mean-reversion matrix ``A`` (1/time).
    diffusion : (n, m) array_like
        Diffusion matrix ``B``.  Usually square; a rectangular ``B`` lets a
        single channel be driven by several correlated Wiener processes.
    wiener_corr : (m, m) array_like, optional
        Wiener correlation matrix ``xi``; identity when omitted.
    mean : (n,) array_like, optional
        Long-time mean ``mu``; zero when omitted.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    wiener_corr: np.ndarray | None = None
    mean: np.ndarray | None = None
    _factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.drift, dtype=float))
        B = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"drift must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"diffusion needs {n} rows, got shape {B.shape}")
        m = B.shape[1]
        xi = np.eye(m) if self.wiener_corr is None else np.atleast_2d(np.asarray(self.wiener_corr, dtype=float))
        if xi.shape != (m, m):
            raise ValueError(f"wiener_corr must be {m}x{m}, got shape {xi.shape}")
        if not np.allclose(xi, xi.T, rtol=0, atol=_SYM_TOL):
            raise FactorizationFailure("Wiener correlation matrix is not symmetric")
        if not np.allclose(np.diag(xi), 1.0, rtol=0, atol=_SYM_TOL):
            raise FactorizationFailure("Wiener correlation matrix must have unit diagonal")
        xi = 0.5 * (xi + xi.T)
        try:
            np.linalg.cholesky(xi + _PSD_JITTER * np.eye(m))
        except np.linalg.LinAlgError:
            raise FactorizationFailure("Wiener correlation matrix is not positive semidefinite") from None
        mu = np.zeros(n) if self.mean is None else np.asarray(self.mean, dtype=float).reshape(n)

        eig = np.linalg.eigvals(A)
        if np.any(eig.real <= 0):
            raise NonStationary(f"drift eigenvalues {eig} must have positive real part")

        # symmetric square root keeps the exact rank of xi (xi = +-1 stays degenerate)
        w, v = np.linalg.eigh(xi)
        factor = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T

        object.__setattr__(self, "drift", _frozen(A))
        object.__setattr__(self, "diffusion", _frozen(B))
        object.__setattr__(self, "wiener_corr", _frozen(xi))
        object.__setattr__(self, "mean", _frozen(mu))
        object.__setattr__(self, "_factor", _frozen(factor))

    @property
    def n(self) -> int:
        return self.drift.shape[0]

    @property
    def n_drivers(self) -> int:
        return self.diffusion.shape[1]

    @property
    def noise_covariance(self) -> np.ndarray:
        """``B xi B^T``."""
        B = self.diffusion
        return B @ self.wiener_corr @ B.T

    @property
    def wiener_factor(self) -> np.ndarray:
        """Matrix ``L`` with ``L L^T = xi``."""
        return self._factor

    @property
    def rates(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift)

    @classmethod
    def scalar(cls, gamma: float, sigma: float, mean: float = 0.0) -> "OUProcess":
        return cls([[gamma]], [[sigma]], None, [mean])

    @classmethod
    def diagonal(cls, gammas, sigmas, wiener_corr=None) -> "OUProcess":
        """Independent relaxation rates and one driver per channel."""
        return cls(np.diag(gammas), np.diag(sigmas), wiener_corr)

    def to_dict(self) -> dict:
        return {
            "drift": self.drift.tolist(),
            "diffusion": self.diffusion.tolist(),
            "wiener_corr": self.wiener_corr.tolist(),
            "mean": self.mean.tolist(),
        }


@dataclass(frozen=True)
class StationaryCovariance:
    sigma: np.ndarray
    residual: float = 0.0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.sigma, dtype=dtype)


def _lyapunov_residual(A, sigma, Q) -> float:
    res = np.max(np.abs(A @ sigma + sigma @ A.T - Q)) if A.size else 0.0
    scale = np.max(np.abs(Q)) if Q.size else 0.0
    return float(res / scale) if scale > 0 else float(res)


def stationary_covariance(p: OUProcess) -> StationaryCovariance:
    """Solve ``A sigma + sigma A^T = B xi B^T`` for the stationary covariance.

    The drift matrix is diagonalised (it need not be normal); in the
    eigenbasis the equation decouples into ``(l_i + l_j) s_ij = q_ij``.  If the
    eigenvectors are badly conditioned the Bartels-Stewart solver is used
    instead.

    Raises
    ------
    IllConditioned
        If neither route reaches a relative residual of 1e-10.
    """
    A = p.drift
    Q = p.noise_covariance
    lam, V = np.linalg.eig(A)
    denom = lam[:, None] + lam[None, :]
    if np.min(np.abs(denom)) < 1e-14 * max(1.0, np.max(np.abs(lam))):
        raise IllConditioned("Lyapunov operator is numerically singular")

    sigma = None
    if np.linalg.cond(V) < 1e8:
        Vinv = np.linalg.inv(V)
        S = (Vinv @ Q @ Vinv.T) / denom
        sigma = (V @ S @ V.T).real
        sigma = 0.5 * (sigma + sigma.T)
        if _lyapunov_residual(A, sigma, Q) > _LYAP_TOL:
            sigma = None
    if sigma is None:
        sigma = scipy.linalg.solve_continuous_lyapunov(A, Q)
        sigma = 0.5 * (sigma + sigma.T)
    residual = _lyapunov_residual(A, sigma, Q)
    if residual > _LYAP_TOL:
        raise IllConditioned(f"Lyapunov residual {residual:.2e} exceeds {_LYAP_TOL:.0e}")
    return StationaryCovariance(_frozen(sigma), residual)


def correlation_matrix(p: OUProcess, sigma, tau: float) -> np.ndarray:
    """Stationary correlation ``G(tau) = <E(t) E(t - tau)^T>``."""
    s = np.asarray(sigma, dtype=float)
    if tau == 0:
        return s.copy()
    if tau > 0:
        return scipy.linalg.expm(-p.drift * tau) @ s
    return s @ scipy.linalg.expm(-p.drift.T * abs(tau))


def transient_correlation(p: OUProcess, t: float, s: float, initial_cov=None) -> np.ndarray:
    """``Cov[E(t), E(s)]`` for a process started at time 0.

    ``initial_cov`` is the covariance of ``E(0)`` (zero for a deterministic
    start).  Uses ``Cov = e^{-At} C0 e^{-A^T s} + e^{-A(t-u)} (sigma -
    e^{-Au} sigma e^{-A^T u})`` with ``u = min(t, s)`` for ``t >= s`` and the
    transpose relation otherwise.
    """
    if t < s:
        return transient_correlation(p, s, t, None if initial_cov is None else np.asarray(initial_cov).T).T
    sig = stationary_covariance(p).sigma
    e_s = scipy.linalg.expm(-p.drift * s)
    e_ts = scipy.linalg.expm(-p.drift * (t - s))
    noise_part = e_ts @ (sig - e_s @ sig @ e_s.T)
    if initial_cov is None:
        return noise_part
    e_t = scipy.linalg.expm(-p.drift * t)
    return e_t @ np.asarray(initial_cov, dtype=float) @ e_s.T + noise_part


def diagonal_transient_correlation(gammas, noise_cov, t: float, s: float) -> np.ndarray:
    """Element-wise correlation for a diagonal drift and deterministic start.

    ``G_ij(t, s) = Q_ij / (g_i + g_j) [exp(-g_k |t - s|) - exp(-g_i t - g_j s)]``
    with ``k = i`` for ``t >= s`` and ``k = j`` otherwise.
    """
    g = np.asarray(gammas, dtype=float)
    Q = np.asarray(noise_cov, dtype=float)
    gi, gj = g[:, None], g[None, :]
    lag_rate = gi if t >= s else gj
    return Q / (gi + gj) * (np.exp(-lag_rate * abs(t - s)) - np.exp(-gi * t - gj * s))


class SpectralMatrix:
    """Matrix-valued spectral density ``J(w)``.

    Calling the object with a scalar frequency returns an ``(n, n)`` complex
    array; an array of frequencies gives shape ``omega.shape + (n, n)``.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], n: int,
                 provenance: str = "analytic-OU", scale: float = 1.0):
        self._evaluator = evaluator
        self.n = n
        self.provenance = provenance
        self.scale = scale

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        vals = self._evaluator(w.reshape(-1)) * self.scale
        return vals.reshape(w.shape + (self.n, self.n))

    def scaled(self, factor: float) -> "SpectralMatrix":
        return SpectralMatrix(self._evaluator, self.n, self.provenance, self.scale * factor)

    def masked(self, keep) -> "SpectralMatrix":
        """Copy with entries where ``keep`` is False set to zero."""
        keep = np.asarray(keep, dtype=bool)
        inner = self._evaluator
        return SpectralMatrix(lambda w: inner(w) * keep, self.n, self.provenance, self.scale)

    @classmethod
    def tabulated(cls, omegas, values) -> "SpectralMatrix":
        """Linear interpolation of sampled spectra; no extrapolation."""
        omegas = np.asarray(omegas, dtype=float)
        values = np.asarray(values, dtype=complex)
        if np.any(np.diff(omegas) <= 0):
            raise ValueError("tabulated frequencies must be strictly increasing")
        n = values.shape[-1]
        flat = values.reshape(len(omegas), n * n)

        def evaluate(w):
            if np.any(w < omegas[0]) or np.any(w > omegas[-1]):
                raise DomainError("frequency outside tabulated range")
            out = np.empty((len(w), n * n), dtype=complex)
            for k in range(n * n):
                out[:, k] = np.interp(w, omegas, flat[:, k].real) + 1j * np.interp(w, omegas, flat[:, k].imag)
            return out.reshape(len(w), n, n)

        return cls(evaluate, n, "tabulated")


def _ou_spectrum(A: np.ndarray, Q: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    eye = np.eye(n)
    left = A[None] + 1j * w[:, None, None] * eye
    right_t = A[None] - 1j * w[:, None, None] * eye  # (A^T - iw)^T
    cond = np.linalg.cond(left)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
        raise SingularResolvent("resolvent (A + i w) is singular at a requested frequency")
    X = np.linalg.solve(left, np.broadcast_to(Q.astype(complex), left.shape))
    # J = X (A^T - iw)^-1  <=>  J^T = (A - iw)^-1 X^T
    J = np.linalg.solve(right_t, np.swapaxes(X, -1, -2))
    return np.swapaxes(J, -1, -2) / (2 * np.pi)


def spectral_matrix(p: OUProcess) -> SpectralMatrix:
    """Closed-form OU spectral matrix ``(A + iw)^-1 B xi B^T (A^T - iw)^-1 / 2 pi``."""
    A = np.array(p.drift)
    Q = p.noise_covariance
    return SpectralMatrix(lambda w: _ou_spectrum(A, Q, w), p.n, "analytic-OU")


@dataclass(frozen=True)
class TwoModeParams:
    """Two OU channels ``dE_k = -g_k E_k dt + s_k1 dW_1 + s_k2 dW_2`` with ``dW_1 dW_2 = xi dt``."""

    gamma1: float
    gamma2: float
    s11: float
    s12: float
    s21: float
    s22: float
    xi: float

    def __post_init__(self):
        if abs(self.xi) > 1:
            raise DomainError(f"xi={self.xi} outside [-1, 1]")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise DomainError("relaxation rates must be positive")

    def process(self) -> OUProcess:
        return OUProcess(
            np.diag([self.gamma1, self.gamma2]),
            [[self.s11, self.s12], [self.s21, self.s22]],
            wiener_correlation(2, [(0, 1)], self.xi),
        )

    def noise_covariance(self) -> np.ndarray:
        """Entries of ``B xi B^T`` written out term by term."""
        s11, s12, s21, s22, xi = self.s11, self.s12, self.s21, self.s22, self.xi
        q11 = s11**2 + s12**2 + 2 * xi * s11 * s12
        q22 = s21**2 + s22**2 + 2 * xi * s21 * s22
        q12 = s11 * s21 + s12 * s22 + xi * (s11 * s22 + s12 * s21)
        return np.array([[q11, q12], [q12, q22]])


def two_mode_spectral_matrix(params: TwoModeParams, omega: float) -> np.ndarray:
    """Explicit 2x2 spectral matrix of two correlated OU channels.

    The diagonal numerators carry ``2 xi s11 s12`` and ``2 xi s21 s22``, the
    cross terms of each channel's own two drivers.
    """
    g1, g2 = params.gamma1, params.gamma2
    q = params.noise_covariance()
    w = float(omega)
    J = np.empty((2, 2), dtype=complex)
    J[0, 0] = q[0, 0] / (g1**2 + w**2)
    J[1, 1] = q[1, 1] / (g2**2 + w**2)
    J[0, 1] = q[0, 1] / ((g1 + 1j * w) * (g2 - 1j * w))
    J[1, 0] = q[0, 1] / ((g1 - 1j * w) * (g2 + 1j * w))
    return J / (2 * np.pi)


def two_mode_covariance(params: TwoModeParams, t: float, s: float, initial_cov=None) -> np.ndarray:
    """Closed-form ``Cov[E_i(t), E_j(s)]`` for the two-mode process started at 0."""
    g = np.array([params.gamma1, params.gamma2])
    q = params.noise_covariance()
    c0 = np.zeros((2, 2)) if initial_cov is None else np.asarray(initial_cov, dtype=float)
    u = min(t, s)
    out = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            decay = math.exp(-g[i] * t - g[j] * s)
            out[i, j] = c0[i, j] * decay + q[i, j] / (g[i] + g[j]) * decay * (math.exp((g[i] + g[j]) * u) - 1)
    return out


def effective_sigma_squared(sigma1: float, sigma2: float, xi: float) -> float:
    """Variance rate of one channel driven by two correlated Wiener processes.

    ``s1 dW1 + s2 dW2`` with ``dW1 dW2 = xi dt`` has quadratic variation
    ``(s1^2 + 2 xi s1 s2 + s2^2) dt``.  The cross term carries a factor 2; a
    single ``xi s1 s2`` term would not reproduce the sampled variance.
    """
    if abs(xi) > 1:
        raise DomainError(f"xi={xi} outside [-1, 1]")
    return sigma1**2 + 2 * xi * sigma1 * sigma2 + sigma2**2


def decorrelated_drivers(sigma1: float, sigma2: float, xi: float) -> tuple[float, float]:
    """Coefficients on two independent Wiener processes equivalent to ``s1 dW1 + s2 dW2``."""
    if abs(xi) > 1:
        raise DomainError(f"xi={xi} outside [-1, 1]")
    return sigma1 + sigma2 * xi, sigma2 * math.sqrt(1 - xi**2)


# ---------------------------------------------------------------------------
# Monte-Carlo sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    seed: int
    path_id: int = 0

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class PathEnsemble:
    """Output of :func:`sample_paths`; ``values`` has shape ``(n_paths, n_times, n)``."""

    times: np.ndarray
    values: np.ndarray
    seed: int
    process: OUProcess
    method: str = "euler"

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, k: int) -> SamplePath:
        return SamplePath(self.times, self.values[k], self.seed, k)

    def __iter__(self) -> Iterator[SamplePath]:
        return (self[k] for k in range(len(self)))


def _path_rng(seed: int, path_id: int) -> np.random.Generator:
    # counter-based stream per (seed, path) so results ignore scheduling
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(path_id),))
    return np.random.Generator(np.random.Philox(ss))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_paths(
    p: OUProcess,
    times,
    n_paths: int,
    seed: int,
    *,
    initial="stationary",
    method: str = "euler",
    record_every: int = 1,
    threads: int = 1,
    chunk: int = 1024,
) -> PathEnsemble:
    """Sample OU paths on ``times``.

    Parameters
    ----------
    times : array_like
        Strictly increasing grid; the first entry is the initial time.
    initial : "stationary" or array_like
        Draw ``E(times[0])`` from the stationary law, or start every path at
        the given vector.
    method : {"euler", "exact"}
        Euler-Maruyama with increments ``B L z sqrt(dt)`` (``L L^T = xi``),
        or the exact Gaussian transition of the linear SDE.
    record_every : int
        Keep every k-th grid point (the last point is always kept).
    threads : int
        Worker threads; the output does not depend on this.

    Raises
    ------
    StepTooLarge
        For ``method="euler"`` when a step exceeds ``0.1 / max|eig(A)|``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0):
        raise ValueError("times must be a strictly increasing 1-D grid")
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if method not in ("euler", "exact"):
        raise ValueError(f"unknown method {method!r}")
    dts = np.diff(t)
    A, mu = p.drift, p.mean
    n, m = p.n, p.n_drivers
    if method == "euler" and len(dts):
        bound = 0.1 / np.max(np.abs(p.rates))
        if np.max(dts) > bound * (1 + 1e-12):
            raise StepTooLarge(f"step {np.max(dts):.3g} exceeds stability bound {bound:.3g}")

    sig = stationary_covariance(p).sigma
    if isinstance(initial, str):
        if initial != "stationary":
            raise ValueError(f"unknown initial condition {initial!r}")
        init_factor, x_init = _psd_sqrt(sig), None
    else:
        init_factor, x_init = None, np.asarray(initial, dtype=float).reshape(n)

    rec = np.arange(0, len(t), record_every)
    if rec[-1] != len(t) - 1:
        rec = np.append(rec, len(t) - 1)
    rec_mask = np.zeros(len(t), dtype=bool)
    rec_mask[rec] = True

    if method == "euler":
        loading = p.diffusion @ p.wiener_factor  # (n, m)
        width = m
        steps = [(np.eye(n) - A * dt, loading * math.sqrt(dt), A @ mu * dt) for dt in dts]
    else:
        cache = {}
        steps = []
        for dt in dts:
            key = round(float(dt), 15)
            if key not in cache:
                prop = scipy.linalg.expm(-A * dt)
                cov = sig - prop @ sig @ prop.T
                cache[key] = (prop, _psd_sqrt(cov), (np.eye(n) - prop) @ mu)
            steps.append(cache[key])
        width = n

    n_steps = len(dts)
    out = np.empty((n_paths, len(rec), n))

    def run_chunk(start: int, stop: int) -> None:
        k = stop - start
        noise = np.empty((k, n_steps, width))
        x = np.empty((k, n))
        for j, pid in enumerate(range(start, stop)):
            rng = _path_rng(seed, pid)
            z0 = rng.standard_normal(n)
            x[j] = mu + init_factor @ z0 if x_init is None else x_init
            noise[j] = rng.standard_normal((n_steps, width))
        col = 0
        out[start:stop, col] = x
        col += 1
        for i, (lin, load, shift) in enumerate(steps):
            x = x @ lin.T + noise[:, i] @ load.T + shift
            if rec_mask[i + 1]:
                out[start:stop, col] = x
                col += 1

    bounds = [(s, min(s + chunk, n_paths)) for s in range(0, n_paths, chunk)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: run_chunk(*b), bounds))
    else:
        for b in bounds:
            run_chunk(*b)
    return PathEnsemble(t[rec], out, int(seed), p, method)


def covariance_with_error(x, y) -> tuple[float, float]:
    """Sample covariance of paired draws and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prod = (x - x.mean()) * (y - y.mean())
    n = len(prod)
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n))
