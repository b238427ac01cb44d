"""Concrete qubit systems: one SU(2) qubit and a dipole-coupled pair.

Basis conventions
-----------------
Single-site states are ordered ``(|0>, |1>)`` with ``|0>`` the lower level, so
``sigma_z = diag(-1, 1)`` and ``sigma_plus = |1><0|``.  Two-site product
states are ordered ``|00>, |01>, |10>, |11>`` (index ``2 q1 + q2``).  Energies
use hbar = 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "SystemModel",
    "QubitPairParams",
    "BellKind",
    "BellState",
    "DensityMatrix",
    "DipoleOperator",
    "LONGITUDINAL",
    "TRANSVERSE",
    "site_operator",
    "build_single_qubit",
    "build_qubit_pair",
    "bell_state",
    "bell_density",
    "dipole_operator",
    "partial_trace",
    "gibbs_state",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)  # [sx, sy] = 2i sz in this ordering
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS):
    _m.setflags(write=False)

LONGITUDINAL = ((1, "z"), (2, "z"))
TRANSVERSE = ((1, "x"), (2, "x"))

_HERM_TOL = 1e-12


def _is_hermitian(m: np.ndarray, tol: float = _HERM_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True)
class SystemModel:
    """System Hamiltonian, coupling operators and the eigenbasis of ``H0``.

    ``couplings[k]`` multiplies noise channel ``k``.  Eigenvalues are sorted
    ascending; each eigenvector is phased so its largest component is real
    and positive.
    """

    hamiltonian: np.ndarray
    couplings: tuple
    labels: tuple = ()
    energies: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = np.array(self.hamiltonian, dtype=complex)
        d = H.shape[0]
        if H.shape != (d, d) or not _is_hermitian(H):
            raise ValueError("hamiltonian must be a square Hermitian matrix")
        ops = []
        for k, a in enumerate(self.couplings):
            a = np.array(a, dtype=complex)
            if a.shape != (d, d) or not _is_hermitian(a):
                raise ValueError(f"coupling {k} must be a {d}x{d} Hermitian matrix")
            a.setflags(write=False)
            ops.append(a)
        w, v = np.linalg.eigh(H)
        for j in range(d):
            k = np.argmax(np.abs(v[:, j]))
            v[:, j] *= np.exp(-1j * np.angle(v[k, j]))
        if np.max(np.abs((v * w) @ v.conj().T - H)) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValueError("eigendecomposition does not reproduce the Hamiltonian")
        H.setflags(write=False)
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "couplings", tuple(ops))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "energies", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.couplings)

    def to_eigenbasis(self, op) -> np.ndarray:
        U = self.eigenvectors
        return U.conj().T @ np.asarray(op) @ U

    def to_lab(self, op) -> np.ndarray:
        U = self.eigenvectors
        return U @ np.asarray(op) @ U.conj().T

    def coupling_elements(self) -> np.ndarray:
        """``a[n, alpha, beta] = <alpha|A_n|beta>`` in the eigenbasis."""
        if not self.couplings:
            return np.zeros((0, self.dim, self.dim), dtype=complex)
        return np.stack([self.to_eigenbasis(a) for a in self.couplings])

    def transformed(self, unitary) -> "SystemModel":
        """Same physics written in a rotated basis ``W X W^dagger``."""
        W = np.asarray(unitary)
        return SystemModel(W @ self.hamiltonian @ W.conj().T,
                           tuple(W @ a @ W.conj().T for a in self.couplings), self.labels)


def site_operator(op, site: int, n_sites: int = 2) -> np.ndarray:
    """Embed a single-site operator on ``site`` (1-based) of ``n_sites`` qubits."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} outside 1..{n_sites}")
    out = np.array([[1.0 + 0j]])
    for k in range(1, n_sites + 1):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


def _pauli(axis: str) -> np.ndarray:
    try:
        return _PAULI[axis]
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}") from None


def build_single_qubit(eps: float, channels: Sequence[str] = ("x", "z")) -> SystemModel:
    """``H0 = (eps/2) sigma_z`` with one Pauli coupling per noise channel."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    return SystemModel(0.5 * eps * SIGMA_Z, tuple(_pauli(a) for a in channels),
                       tuple(f"sigma_{a}" for a in channels))


def _normalize_wiring(wiring) -> tuple:
    if isinstance(wiring, Mapping):
        keys = sorted(wiring)
        if keys != list(range(len(keys))):
            raise ValueError(f"noise wiring keys must be 0..n-1, got {keys}")
        wiring = [wiring[k] for k in keys]
    out = []
    for k, (site, axis) in enumerate(wiring):
        if site not in (1, 2):
            raise ValueError(f"channel {k}: site must be 1 or 2, got {site}")
        _pauli(axis)
        out.append((int(site), str(axis)))
    return tuple(out)


@dataclass(frozen=True)
class QubitPairParams:
    eps1: float
    eps2: float
    j_coupling: float
    noise_wiring: tuple = LONGITUDINAL

    def __post_init__(self):
        object.__setattr__(self, "noise_wiring", _normalize_wiring(self.noise_wiring))


def build_qubit_pair(p: QubitPairParams) -> SystemModel:
    """Two qubits with flip-flop coupling ``J (s1+ s2- + s2+ s1-)``.

    Coupling operators are site-local Pauli matrices in the order given by
    ``p.noise_wiring``.
    """
    H = (0.5 * p.eps1 * site_operator(SIGMA_Z, 1) + 0.5 * p.eps2 * site_operator(SIGMA_Z, 2)
         + p.j_coupling * (site_operator(SIGMA_PLUS, 1) @ site_operator(SIGMA_MINUS, 2)
                           + site_operator(SIGMA_PLUS, 2) @ site_operator(SIGMA_MINUS, 1)))
    ops = tuple(site_operator(_pauli(axis), site) for site, axis in p.noise_wiring)
    labels = tuple(f"{axis}{site}" for site, axis in p.noise_wiring)
    return SystemModel(H, ops, labels)


class BellKind(str, enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @classmethod
    def parse(cls, kind) -> "BellKind":
        if isinstance(kind, cls):
            return kind
        key = str(kind).strip().lower()
        key = (key.replace("φ", "phi").replace("ψ", "psi").replace("⁺", "+").replace("⁻", "-")
               .replace("_plus", "+").replace("_minus", "-").replace("plus", "+").replace("minus", "-"))
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown Bell state {kind!r}") from None


_BELL_AMPS = {
    BellKind.PHI_PLUS: (1, 0, 0, 1),
    BellKind.PHI_MINUS: (1, 0, 0, -1),
    BellKind.PSI_PLUS: (0, 1, 1, 0),
    BellKind.PSI_MINUS: (0, 1, -1, 0),
}


@dataclass(frozen=True)
class BellState:
    kind: BellKind
    vector: np.ndarray

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.vector, self.vector.conj()))


def bell_state(kind) -> BellState:
    """Normalised Bell vector in the product basis (amplitudes ``1/sqrt 2``)."""
    k = BellKind.parse(kind)
    vec = np.array(_BELL_AMPS[k], dtype=complex) / np.sqrt(2)
    vec.setflags(write=False)
    return BellState(k, vec)


def bell_density(kind) -> "DensityMatrix":
    return bell_state(kind).density()


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix: Hermitian, unit trace, eigenvalues >= -1e-10."""

    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("density matrix must be square")
        if not _is_hermitian(r):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1) > 1e-12:
            raise ValueError(f"density matrix trace {np.trace(r).real:.15g} != 1")
        if np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T))) < -1e-10:
            raise ValueError("density matrix has a negative eigenvalue")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rho, dtype=dtype)

    @classmethod
    def pure(cls, vector) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)


def partial_trace(rho, keep: int) -> np.ndarray:
    """Reduced state of qubit ``keep`` (1 or 2) of a two-qubit density matrix."""
    r = np.asarray(rho).reshape(2, 2, 2, 2)
    if keep == 1:
        return np.einsum("ijkj->ik", r)
    if keep == 2:
        return np.einsum("ijik->jk", r)
    raise ValueError("keep must be 1 or 2")


@dataclass(frozen=True)
class DipoleOperator:
    mu: np.ndarray


def dipole_operator(mu1: float = 1.0, mu2: float = 1.0) -> DipoleOperator:
    """``mu1 (s1+ + s1-) + mu2 (s2+ + s2-)`` in the product basis."""
    flip = SIGMA_PLUS + SIGMA_MINUS
    m = mu1 * site_operator(flip, 1) + mu2 * site_operator(flip, 2)
    m.setflags(write=False)
    return DipoleOperator(m)


def gibbs_state(model: SystemModel, temperature: float = 0.0) -> np.ndarray:
    """Thermal state ``exp(-H0/T)/Z`` written in the eigenbasis of ``H0``.

    ``temperature = 0`` gives the ground-state projector (shared equally
    across a degenerate ground level).
    """
    if temperature < 0:
        raise DomainError("temperature must be non-negative")
    e = model.energies - model.energies[0]
    if temperature == 0:
        w = (np.abs(e) < 1e-12).astype(float)
    else:
        w = np.exp(-e / temperature)
    return np.diag(w / w.sum()).astype(complex)
