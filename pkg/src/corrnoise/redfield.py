"""Bloch-Redfield tensor, secular filter, Liouvillian and propagation.

Index convention
----------------
``R[a, a', b, b']`` multiplies ``rho[b, b']`` in

    d rho[a, a'] / dt = -i (w_a - w_a') rho[a, a'] - sum_{b b'} R[a, a', b, b'] (rho - rho_eq)[b, b']

with every matrix written in the eigenbasis of ``H0``.  For a two-level
system with eigen-indices ``0`` (lower) and ``1`` (upper), ``R[1, 1, 0, 0]``
is the rate at which population of the lower level feeds the upper one
(with a minus sign), and ``R[0, 1, 0, 1]`` the decay rate of the coherence
``rho[0, 1]``.

The tensor is

    R[a,a',b,b'] = sum_nm { d(a',b') sum_g J_nm(w_b - w_g) A_n[g,b] A_m[a,g]
                          - (J_nm(w_a' - w_b') + J_nm(w_b - w_a)) A_n[b',a'] A_m[a,b]
                          + d(a,b) sum_g J_nm(w_g - w_b') A_n[b',g] A_m[g,a'] }

Vectorisation stacks columns: ``vec(rho)[a + d a'] = rho[a, a']``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.integrate

from .errors import BasisMismatch, DimensionMismatch
from .models import SystemModel, gibbs_state
from .stochastic import OUProcess, SpectralMatrix, spectral_matrix

__all__ = [
    "RATE_SCALE",
    "RedfieldTensor",
    "Liouvillian",
    "Trajectory",
    "rate_spectrum",
    "build_tensor",
    "secular_filter",
    "secular_mask",
    "build_liouvillian",
    "liouvillian_for",
    "evolve",
    "propagate",
    "vec",
    "unvec",
]

log = logging.getLogger(__name__)

# The tensor needs the symmetrised rate spectrum (1/2) int G(tau) exp(-i w tau) dtau,
# i.e. pi times the (1/2pi)-normalised spectral matrix.
RATE_SCALE = np.pi


def vec(m) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def rate_spectrum(p: OUProcess) -> SpectralMatrix:
    """Spectral matrix normalised for use in :func:`build_tensor`.

    With this normalisation the pure-dephasing rate of a coherence whose
    energy gap fluctuates as ``c . E(t)`` is ``(1/2) c^T S(0) c`` with
    ``S(0) = int G(tau) dtau``, the exact long-time Gaussian-noise result.
    """
    return spectral_matrix(p).scaled(RATE_SCALE)


def secular_mask(d: int) -> np.ndarray:
    """Boolean mask keeping population-population and ``R[a,a',a,a']`` elements."""
    e = np.eye(d, dtype=bool)
    pops = e[:, :, None, None] & e[None, None, :, :]
    same = e[:, None, :, None] & e[None, :, None, :]
    return pops | (same & ~pops)


@dataclass(frozen=True)
class RedfieldTensor:
    elements: np.ndarray
    secular_mask: np.ndarray
    secular: bool = False

    @property
    def dims(self) -> int:
        return self.elements.shape[0]

    def __getitem__(self, idx):
        return self.elements[idx]

    def matrix(self) -> np.ndarray:
        """``(d^2, d^2)`` superoperator acting on column-stacked ``rho``."""
        d = self.dims
        return self.elements.transpose(1, 0, 3, 2).reshape(d * d, d * d)

    def invariant_errors(self) -> dict:
        """Largest violations of population conservation and conjugation symmetry."""
        R = self.elements
        pop_cols = np.einsum("aabb->b", R)
        conj = np.max(np.abs(R - np.conj(R.transpose(1, 0, 3, 2))))
        trace_rows = np.einsum("aacd->cd", R)
        return {
            "population_conservation": float(np.max(np.abs(pop_cols))),
            "conjugation": float(conj),
            "trace_functional": float(np.max(np.abs(trace_rows))),
        }


def build_tensor(model: SystemModel, J: SpectralMatrix) -> RedfieldTensor:
    """Assemble the full Redfield tensor in the eigenbasis of ``model``.

    ``J`` is evaluated exactly at the frequency differences printed in the
    tensor formula (no symmetry shortcuts at negative arguments).
    """
    if model.n_channels != J.n:
        raise DimensionMismatch(f"model has {model.n_channels} couplings, spectrum has {J.n} channels")
    d = model.dim
    mask = secular_mask(d)
    if model.n_channels == 0:
        return RedfieldTensor(np.zeros((d, d, d, d), dtype=complex), mask)
    w = model.energies
    a = model.coupling_elements()
    Jd = J(w[:, None] - w[None, :])  # Jd[b, g, n, m] = J_nm(w_b - w_g)

    left = np.einsum("bgnm,ngb,mag->ab", Jd, a, a)
    right = np.einsum("gynm,nyg,mgx->xy", Jd, a, a)
    cross = (np.einsum("xynm,nyx,mab->axby", Jd, a, a)
             + np.einsum("banm,nyx,mab->axby", Jd, a, a))
    eye = np.eye(d)
    R = (np.einsum("ab,xy->axby", left, eye) + np.einsum("ab,xy->axby", eye, right) - cross)
    return RedfieldTensor(R, mask)


def secular_filter(t: RedfieldTensor) -> RedfieldTensor:
    return RedfieldTensor(np.where(t.secular_mask, t.elements, 0.0), t.secular_mask, True)


@dataclass(frozen=True)
class Liouvillian:
    """Affine generator ``dx/dt = M x + c`` for ``x = vec(rho)`` in the eigenbasis.

    ``M = -i diag(w_a - w_a') - R`` and ``c = R vec(rho_eq)``.
    """

    matrix: np.ndarray
    drive: np.ndarray
    relaxation: np.ndarray
    rho_eq: np.ndarray
    model: SystemModel
    secular: bool = False
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.rho_eq.shape[0]

    @cached_property
    def fixed_point(self) -> np.ndarray:
        x_eq = vec(self.rho_eq)
        if np.max(np.abs(self.matrix @ x_eq + self.drive), initial=0.0) < 1e-13:
            return x_eq
        d = self.dim
        lhs = np.vstack([self.matrix, vec(np.eye(d))[None, :]])
        rhs = np.concatenate([-self.drive, [1.0]])
        return np.linalg.lstsq(lhs, rhs, rcond=None)[0]

    @cached_property
    def decomposition(self):
        """``(eigenvalues, V, V^-1)`` or ``None`` when ``M`` is numerically defective."""
        M = self.matrix
        lam, V = np.linalg.eig(M)
        if not np.all(np.isfinite(V)) or np.linalg.cond(V) > 1e10:
            return None
        Vinv = np.linalg.inv(V)
        scale = max(1.0, np.max(np.abs(M)))
        if np.max(np.abs((V * lam) @ Vinv - M)) > 1e-10 * scale:
            return None
        return lam, V, Vinv


def build_liouvillian(model: SystemModel, t: RedfieldTensor, rho_eq=None) -> Liouvillian:
    """Vectorised generator for the tensor ``t``.

    ``rho_eq`` is written in the eigenbasis; the default is the zero
    temperature Gibbs state (ground-state projector).
    """
    d = model.dim
    if t.dims != d:
        raise BasisMismatch(f"tensor dimension {t.dims} != model dimension {d}")
    req = gibbs_state(model, 0.0) if rho_eq is None else np.asarray(getattr(rho_eq, "rho", rho_eq), dtype=complex)
    if req.shape != (d, d):
        raise BasisMismatch(f"rho_eq has shape {req.shape}, model needs {(d, d)}")
    w = model.energies
    coherent = -1j * vec(w[:, None] - w[None, :])
    Rm = t.matrix()
    M = np.diag(coherent) - Rm
    return Liouvillian(M, Rm @ vec(req), Rm, req, model, t.secular)


def liouvillian_for(model: SystemModel, process: OUProcess, temperature: float = 0.0,
                    secular: bool = True) -> Liouvillian:
    """Shortcut: OU process -> rate spectrum -> tensor -> Liouvillian."""
    tensor = build_tensor(model, rate_spectrum(process))
    if secular:
        tensor = secular_filter(tensor)
    return build_liouvillian(model, tensor, gibbs_state(model, temperature))


def evolve(L: Liouvillian, x0, times, homogeneous: bool = False):
    """Propagate a vectorised state; returns ``(xs, meta)`` with ``xs`` of shape ``(n_t, d^2)``.

    ``homogeneous=True`` drops the constant drive and the fixed-point shift,
    which is what a response function needs.  Uses the eigendecomposition of
    ``M`` (exact for a constant generator) and falls back to an adaptive
    Runge-Kutta integrator when ``M`` is defective.
    """
    t = np.asarray(times, dtype=float)
    x0 = np.asarray(x0, dtype=complex)
    shift = np.zeros_like(x0) if homogeneous else L.fixed_point
    dec = L.decomposition
    meta = {"integrator": "eigen", "defective": dec is None}
    if dec is not None:
        lam, V, Vinv = dec
        coeff = Vinv @ (x0 - shift)
        xs = (np.exp(np.outer(t, lam)) * coeff) @ V.T + shift
        return xs, meta

    log.warning("Liouvillian is numerically defective; using adaptive integration")
    meta["integrator"] = "adaptive"
    M = L.matrix
    c = np.zeros_like(x0) if homogeneous else L.drive
    if t[-1] == 0:
        return np.repeat(x0[None, :], len(t), axis=0), meta
    sol = scipy.integrate.solve_ivp(lambda _t, x: M @ x + c, (0.0, t[-1]), x0, t_eval=t,
                                    method="DOP853", rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise RuntimeError(f"adaptive integration failed: {sol.message}")
    return sol.y.T, meta


@dataclass(frozen=True)
class Trajectory:
    """Density matrices on a time grid, stored in the lab (model) basis."""

    times: np.ndarray
    rhos: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.rhos.shape[-1]

    def purity(self) -> np.ndarray:
        return np.einsum("tij,tji->t", self.rhos, self.rhos).real

    def populations(self) -> np.ndarray:
        return np.einsum("tii->ti", self.rhos).real

    def trace(self) -> np.ndarray:
        return np.einsum("tii->t", self.rhos)

    def final(self) -> np.ndarray:
        return self.rhos[-1]


def propagate(L: Liouvillian, rho0, times, basis: str = "lab") -> Trajectory:
    """Evolve ``rho0`` (given at t = 0) and return it on ``times``.

    Every output matrix is Hermitian-symmetrised; the largest correction and
    the most negative eigenvalue encountered are reported in ``metadata``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ValueError("times must be increasing and start at or after 0")
    r0 = np.asarray(getattr(rho0, "rho", rho0), dtype=complex)
    d = L.dim
    if r0.shape != (d, d):
        raise BasisMismatch(f"rho0 has shape {r0.shape}, generator needs {(d, d)}")
    if basis == "lab":
        r0 = L.model.to_eigenbasis(r0)
    elif basis != "eigen":
        raise ValueError("basis must be 'lab' or 'eigen'")
    xs, meta = evolve(L, vec(r0), t)
    rhos = xs.reshape(len(t), d, d).transpose(0, 2, 1)  # undo column stacking
    herm = 0.5 * (rhos - np.conj(rhos.transpose(0, 2, 1)))
    herm_dev = float(np.max(np.abs(herm), initial=0.0))
    rhos = rhos - herm
    if basis == "lab":
        U = L.model.eigenvectors
        rhos = U @ rhos @ U.conj().T
        rhos = 0.5 * (rhos + np.conj(rhos.transpose(0, 2, 1)))
    if herm_dev > 1e-8:
        log.warning("Hermiticity deviation %.2e before symmetrisation", herm_dev)
    min_eig = float(np.min(np.linalg.eigvalsh(rhos)))
    tr = np.einsum("tii->t", rhos)
    meta.update(
        secular=L.secular,
        basis=basis,
        hermiticity_deviation=herm_dev,
        min_eigenvalue=min_eig,
        max_trace_error=float(np.max(np.abs(tr - 1))),
    )
    return Trajectory(t, rhos, meta)
