"""Purity, fidelity, linear absorption spectra and time series of observables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MissingReference, NotPSD, UnresolvedPeak
from .redfield import Liouvillian, Trajectory, evolve, vec

__all__ = [
    "Spectrum",
    "SpectrumGrid",
    "ScalarSeries",
    "purity",
    "fidelity",
    "absorption_spectrum",
    "series_from_trajectory",
    "upper_envelope",
    "half_life",
]

EIG_CLIP = 1e-10
WINDOW_FLOOR = 1e-8
DECAY_FLOOR = 1e-6


def _matrix(op) -> np.ndarray:
    for attr in ("rho", "mu"):
        op = getattr(op, attr, op)
    return np.asarray(op, dtype=complex)


def purity(rho) -> float:
    r = _matrix(rho)
    return float(np.einsum("ij,ji->", r, r).real)


def _clipped_eigvalsh(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    lam = np.linalg.eigvalsh(m)
    if np.any(lam < -EIG_CLIP):
        raise NotPSD(f"eigenvalue {lam.min():.3e} below -{EIG_CLIP:g}")
    return np.clip(lam, 0.0, None)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.conj().T)
    lam, U = np.linalg.eigh(m)
    if np.any(lam < -EIG_CLIP):
        raise NotPSD(f"eigenvalue {lam.min():.3e} below -{EIG_CLIP:g}")
    return (U * np.sqrt(np.clip(lam, 0.0, None))) @ U.conj().T


def _fidelity_many(ref: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    s = _psd_sqrt(ref)
    lam = _clipped_eigvalsh(s @ rhos @ s)
    # round-off eigenvalues of rank-deficient products would add ~sqrt(eps) each
    floor = 16 * lam.shape[-1] * np.finfo(float).eps * np.max(lam, axis=-1, keepdims=True)
    lam = np.where(lam > floor, lam, 0.0)
    return np.sum(np.sqrt(lam), axis=-1) ** 2


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(_fidelity_many(a, b[None])[0])


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True)
class SpectrumGrid:
    """Time sampling of the response and the frequency band kept in the output.

    ``pad`` zero-pads the FFT to at least ``pad * n_t`` points, which refines
    the frequency spacing without changing the information content.
    """

    t_max: float
    dt: float
    pad: int = 4
    band: tuple[float, float] | None = (0.0, None)

    def __post_init__(self):
        if not (self.t_max > 0 and self.dt > 0 and self.dt < self.t_max):
            raise ValueError("need 0 < dt < t_max")
        if self.pad < 1:
            raise ValueError("pad must be >= 1")

    @property
    def times(self) -> np.ndarray:
        n = int(round(self.t_max / self.dt)) + 1
        return self.dt * np.arange(n)

    def to_dict(self) -> dict:
        return {"t_max": self.t_max, "dt": self.dt, "pad": self.pad,
                "band": None if self.band is None else list(self.band)}


@dataclass(frozen=True)
class Spectrum:
    omegas: np.ndarray
    intensities: np.ndarray
    fwhm: float
    peak_positions: list
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def peak_height(self) -> float:
        return float(np.max(self.intensities)) if self.intensities.size else 0.0


def _refine(w: np.ndarray, s: np.ndarray, k: int) -> tuple[float, float]:
    if k == 0 or k == len(s) - 1:
        return float(w[k]), float(s[k])
    y0, y1, y2 = s[k - 1], s[k], s[k + 1]
    den = y0 - 2 * y1 + y2
    if den >= 0:
        return float(w[k]), float(y1)
    off = 0.5 * (y0 - y2) / den
    h = w[1] - w[0]
    return float(w[k] + off * h), float(y1 - 0.25 * (y0 - y2) * off)


def _half_width_edges(w: np.ndarray, s: np.ndarray, k: int):
    half = 0.5 * s[k]
    i = k
    while i > 0 and s[i] > half:
        i -= 1
    j = k
    while j < len(s) - 1 and s[j] > half:
        j += 1
    if s[i] > half or s[j] > half:
        return None
    left = w[i] + (half - s[i]) * (w[i + 1] - w[i]) / (s[i + 1] - s[i])
    right = w[j - 1] + (half - s[j - 1]) * (w[j] - w[j - 1]) / (s[j] - s[j - 1])
    return float(left), float(right)


def find_peaks(w: np.ndarray, s: np.ndarray, rel_floor: float = 1e-6) -> list[dict]:
    """Local maxima above ``rel_floor`` of the global maximum, tallest first.

    Each peak carries a width unless it overlaps a taller neighbour, i.e. the
    valley between them stays above half of the smaller one.
    """
    if s.size < 3 or s.max() <= 0:
        return []
    inner = (s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:])
    idx = np.flatnonzero(inner) + 1
    idx = idx[s[idx] >= rel_floor * s.max()]
    order = idx[np.argsort(-s[idx], kind="stable")]
    peaks = []
    for rank, k in enumerate(order):
        pos, height = _refine(w, s, k)
        width = None
        overlapping = False
        if rank > 0:
            for other in order[:rank]:
                lo, hi = sorted((k, other))
                if s[lo:hi + 1].min() > 0.5 * min(s[k], s[other]):
                    overlapping = True
                    break
        if not overlapping:
            edges = _half_width_edges(w, s, k)
            if edges is not None:
                width = edges[1] - edges[0]
        peaks.append({"omega": pos, "height": height, "fwhm": width})
    return peaks


def _spectral_lines(L: Liouvillian, probe: np.ndarray, x0: np.ndarray):
    dec = L.decomposition
    if dec is None:
        return None, None
    lam, V, Vinv = dec
    amp = (probe @ V) * (Vinv @ x0)
    lines = []
    for l, c in zip(lam, amp):
        gamma = -l.real
        weight = float(abs(c) ** 2)
        area = math.pi * weight / gamma if gamma > 0 else math.inf
        lines.append({"omega": float(-l.imag), "gamma": float(gamma), "weight": weight, "area": area})
    return lines, (lam, amp)


def absorption_spectrum(L: Liouvillian, mu, rho_init, grid: SpectrumGrid,
                        window: float = WINDOW_FLOOR) -> Spectrum:
    """Linear absorption ``|int_0^T e^{i w t} r(t) dt|**2`` of the dipole response.

    ``r(t) = -i tr(mu X(t))`` where ``X`` starts as the commutator
    ``[mu, rho_init]`` and evolves under the homogeneous part of ``L``.
    An exponential window ``exp(-eta t)`` brings the tail at ``t_max`` down
    to ``window`` times the initial envelope; ``eta`` is recorded in the
    metadata together with the per-mode line list and Parseval sums.
    """
    model = L.model
    d = L.dim
    m = _matrix(mu)
    r0 = _matrix(rho_init)
    if m.shape != (d, d) or r0.shape != (d, d):
        raise DimensionMismatch(f"operators must be {d}x{d}")
    m_e = model.to_eigenbasis(m)
    r_e = model.to_eigenbasis(r0)
    x0 = vec(m_e @ r_e - r_e @ m_e)
    probe = -1j * vec(m_e.T)

    t = grid.times
    lines, modes = _spectral_lines(L, probe, x0)
    if modes is not None:
        lam, amp = modes
        env0 = float(np.sum(np.abs(amp)))
        tail = float(np.sum(np.abs(amp) * np.exp(lam.real * t[-1])))
        xs, meta = evolve(L, x0, t, homogeneous=True)
        r = xs @ probe
    else:
        xs, meta = evolve(L, x0, t, homogeneous=True)
        r = xs @ probe
        env0 = float(np.max(np.abs(r)))
        n_tail = max(1, len(t) // 20)
        tail = float(np.max(np.abs(r[-n_tail:])))
    if env0 == 0.0:
        raise UnresolvedPeak("dipole response vanishes identically")
    ratio = tail / env0
    if ratio >= DECAY_FLOOR:
        raise UnresolvedPeak(f"response envelope at t_max is {ratio:.2e} of its initial value")
    eta = max(0.0, math.log(ratio / window) / t[-1]) if ratio > 0 else 0.0

    seq = r * np.exp(-eta * t)
    seq[0] *= 0.5  # trapezoid end point; the far end is already below the floor
    n_fft = 1 << int(math.ceil(math.log2(grid.pad * len(t))))
    F = grid.dt * n_fft * np.fft.ifft(seq, n_fft)  # sum_k seq_k e^{+i w t_k} dt
    w = 2 * np.pi * np.fft.fftfreq(n_fft, grid.dt)
    S = np.abs(F) ** 2
    dw = w[1] - w[0]
    parseval = {
        "spectral_weight": float(np.sum(S) * dw),
        "time_weight": float(2 * np.pi * grid.dt * np.sum(np.abs(seq) ** 2)),
        "response_norm": float(grid.dt * np.sum(np.abs(r) ** 2)),
    }
    order = np.argsort(w, kind="stable")
    w, S = w[order], S[order]
    if grid.band is not None:
        lo = -np.inf if grid.band[0] is None else grid.band[0]
        hi = np.inf if grid.band[1] is None else grid.band[1]
        keep = (w >= lo) & (w <= hi)
        w, S = w[keep], S[keep]

    peaks = find_peaks(w, S)
    fwhm = float("nan")
    if peaks and peaks[0]["fwhm"] is not None:
        fwhm = peaks[0]["fwhm"]
    metadata = {
        "window": {"kind": "exponential", "eta": eta, "floor": window, "tail_ratio": ratio},
        "grid": grid.to_dict(),
        "n_fft": n_fft,
        "domega": float(dw),
        "peaks": peaks,
        "parseval": parseval,
        "lines": lines,
        "integrator": meta["integrator"],
    }
    return Spectrum(w, S, fwhm, [p["omega"] for p in peaks], metadata)


# ---------------------------------------------------------------- series

@dataclass(frozen=True)
class ScalarSeries:
    times: np.ndarray
    values: np.ndarray
    label: str
    metadata: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.times)


def _parse_metric(metric) -> tuple[str, int | None]:
    if isinstance(metric, tuple):
        name, k = metric
        return str(name), int(k)
    name, _, arg = str(metric).partition(":")
    if name == "population":
        if not arg:
            raise ValueError("population metric needs an index, e.g. 'population:0'")
        return name, int(arg)
    if name in ("purity", "fidelity") and not arg:
        return name, None
    raise ValueError(f"unknown metric {metric!r}")


def series_from_trajectory(traj: Trajectory, metric, reference=None) -> ScalarSeries:
    """Evaluate ``purity``, ``fidelity`` or ``population:k`` along a trajectory.

    Fidelity is ``F(reference, rho_t)``; the reference defaults to the
    state at ``t = 0`` when the trajectory starts there.
    """
    name, k = _parse_metric(metric)
    d = traj.dim
    meta = {"dim": d}
    if name == "purity":
        values = traj.purity()
        label = "purity"
    elif name == "population":
        if not 0 <= k < d:
            raise ValueError(f"population index {k} outside 0..{d - 1}")
        values = traj.populations()[:, k]
        label = f"population:{k}"
    else:
        if reference is None:
            if len(traj) == 0 or traj.times[0] != 0:
                raise MissingReference("fidelity needs a reference state or a trajectory starting at t = 0")
            ref = traj.rhos[0]
        else:
            ref = _matrix(reference)
            if ref.shape != (d, d):
                raise DimensionMismatch(f"reference is {ref.shape}, trajectory is {d}x{d}")
        values = _fidelity_many(ref, traj.rhos)
        label = "fidelity"
    return ScalarSeries(np.asarray(traj.times, dtype=float).copy(), np.asarray(values, dtype=float), label, meta)


def upper_envelope(values) -> np.ndarray:
    """Running maximum taken from the end: the smallest non-increasing curve above ``values``."""
    v = np.asarray(values, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def default_level(series: ScalarSeries) -> float:
    if series.label == "purity":
        d = series.metadata.get("dim")
        if d is None:
            raise ValueError("purity series without dimension metadata needs an explicit level")
        return 0.5 * (1.0 + 1.0 / d)
    if series.label == "fidelity":
        return 0.75
    raise ValueError(f"no default half-life level for {series.label!r}")


def half_life(series: ScalarSeries, level: float | None = None, envelope: bool = False) -> float:
    """First time the series drops to ``level`` (linear interpolation), ``inf`` if it never does.

    Default levels: purity halfway between 1 and ``1/d``; fidelity 3/4,
    halfway between 1 and the 1/2 reached by a Bell state in the
    ``{|00>, |11>}`` manifold relaxing to ``|00>``.  With ``envelope=True``
    the upper envelope is used, which ignores coherent oscillations.
    """
    lvl = default_level(series) if level is None else float(level)
    v = upper_envelope(series.values) if envelope else np.asarray(series.values, dtype=float)
    t = np.asarray(series.times, dtype=float)
    below = np.flatnonzero(v <= lvl)
    if below.size == 0:
        return math.inf
    k = int(below[0])
    if k == 0:
        return float(t[0])
    return float(t[k - 1] + (v[k - 1] - lvl) * (t[k] - t[k - 1]) / (v[k - 1] - v[k]))
