"""Declarative scenarios: parsing, sweep execution and run comparison.

A scenario is a YAML document (``schema_version: 1``)::

    schema_version: 1
    system: {kind: qubit_pair, eps1: 1.0, eps2: 1.0, j_coupling: -0.2}
    noise:
      channels:
        - {site: 1, axis: x, gamma: 0.1, sigma: 0.01}
        - {site: 2, axis: x, gamma: 0.1, sigma: 0.01}
        - {site: 1, axis: z, gamma: 0.1, sigma: 0.02}
        - {site: 2, axis: z, gamma: 0.1, sigma: 0.02}
      correlate: [[2, 3]]
    xi_sweep: [-1, 0, 1]
    initial_state: phi+
    outputs: [purity, fidelity]
    grid:
      time: {t_max: 200, n: 2001}
    seed: 7

Unknown keys are rejected.  See README for the full key list.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import CorrNoiseError, GridMismatch, SchemaViolation, SweepFailure
from .export import fmt, to_jsonable, write_paths, write_series, write_spectrum, write_trajectory
from .models import (SIGMA_X, BellKind, DensityMatrix, QubitPairParams, bell_density, build_qubit_pair,
                     build_single_qubit, dipole_operator, gibbs_state)
from .observables import SpectrumGrid, absorption_spectrum, half_life, series_from_trajectory
from .redfield import liouvillian_for, propagate
from .stochastic import OUProcess, sample_paths, wiener_correlation

__all__ = ["Scenario", "SweepPoint", "RunManifest", "SummaryTable", "parse_scenario", "load_scenario",
           "run", "compare", "OUTPUT_ENV", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
OUTPUT_ENV = "CORRNOISE_OUT"
DEFAULT_OUTPUT_ROOT = "corrnoise-runs"

_TOP_KEYS = {"schema_version", "system", "noise", "xi_sweep", "initial_state", "temperature", "secular",
             "outputs", "grid", "seed", "sweep"}
_PLAIN_OUTPUTS = {"purity", "fidelity", "spectrum", "trajectory", "noise_samples"}
_TIME_OUTPUTS = {"purity", "fidelity", "trajectory"}
_INDEXED = re.compile(r"^([a-z_]+)(?:\[(\d+)\])?$")


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


class _Checker:
    """Accumulates ``(path, message)`` pairs instead of failing fast."""

    def __init__(self):
        self.errors: list[tuple[str, str]] = []

    def add(self, path: str, msg: str) -> None:
        self.errors.append((path, msg))

    def mapping(self, doc, path: str, allowed: set, required: set = frozenset()) -> dict:
        if not isinstance(doc, dict):
            self.add(path, "expected a mapping")
            return {}
        for k in sorted(set(doc) - allowed, key=str):
            self.add(f"{path}.{k}" if path else str(k), "unknown key")
        for k in sorted(required - set(doc)):
            self.add(f"{path}.{k}" if path else k, "required key missing")
        return doc

    def number(self, doc: dict, key: str, path: str, default=None, lo=None, lo_open=False, hi=None):
        p = f"{path}.{key}" if path else key
        if key not in doc:
            return default
        x = doc[key]
        if not _is_number(x):
            self.add(p, f"expected a finite number, got {x!r}")
            return default
        if lo is not None and (x <= lo if lo_open else x < lo):
            self.add(p, f"must be {'>' if lo_open else '>='} {lo}, got {x}")
        if hi is not None and x > hi:
            self.add(p, f"must be <= {hi}, got {x}")
        return float(x)

    def integer(self, doc: dict, key: str, path: str, default=None, lo=None):
        p = f"{path}.{key}" if path else key
        if key not in doc:
            return default
        x = doc[key]
        if not _is_int(x):
            self.add(p, f"expected an integer, got {x!r}")
            return default
        if lo is not None and x < lo:
            self.add(p, f"must be >= {lo}, got {x}")
        return int(x)


def _check_system(c: _Checker, doc) -> dict:
    sysd = c.mapping(doc, "system", {"kind", "eps", "eps1", "eps2", "j_coupling", "dipoles"}, {"kind"})
    kind = sysd.get("kind")
    out = {"kind": kind}
    if kind == "qubit_pair":
        for k in ("eps1", "eps2"):
            if k not in sysd:
                c.add(f"system.{k}", "required key missing")
        if "eps" in sysd:
            c.add("system.eps", "use eps1/eps2 for a qubit pair")
        out["eps1"] = c.number(sysd, "eps1", "system", lo=0, lo_open=True)
        out["eps2"] = c.number(sysd, "eps2", "system", lo=0, lo_open=True)
        out["j_coupling"] = c.number(sysd, "j_coupling", "system", default=0.0)
        dip = sysd.get("dipoles", [1.0, 1.0])
        if not (isinstance(dip, list) and len(dip) == 2 and all(_is_number(x) for x in dip)):
            c.add("system.dipoles", "expected two numbers")
            dip = [1.0, 1.0]
        out["dipoles"] = [float(x) for x in dip]
    elif kind == "single_qubit":
        for k in ("eps1", "eps2", "j_coupling"):
            if k in sysd:
                c.add(f"system.{k}", "not valid for a single qubit")
        if "eps" not in sysd:
            c.add("system.eps", "required key missing")
        out["eps"] = c.number(sysd, "eps", "system", lo=0, lo_open=True)
        dip = sysd.get("dipoles", [1.0])
        if not (isinstance(dip, list) and len(dip) == 1 and _is_number(dip[0])):
            c.add("system.dipoles", "expected one number")
            dip = [1.0]
        out["dipoles"] = [float(dip[0])]
    elif kind is not None:
        c.add("system.kind", f"expected qubit_pair or single_qubit, got {kind!r}")
    return out


def _check_noise(c: _Checker, doc, kind) -> dict:
    nd = c.mapping(doc, "noise", {"channels", "correlate"}, {"channels"})
    chans = nd.get("channels", [])
    out_ch = []
    if not isinstance(chans, list) or not chans:
        c.add("noise.channels", "expected a non-empty list")
        chans = []
    n_sites = 1 if kind == "single_qubit" else 2
    for i, ch in enumerate(chans):
        p = f"noise.channels[{i}]"
        ch = c.mapping(ch, p, {"site", "axis", "gamma", "sigma"}, {"axis", "gamma", "sigma"})
        site = ch.get("site", 1)
        if not _is_int(site) or not 1 <= site <= n_sites:
            c.add(f"{p}.site", f"must be an integer in 1..{n_sites}")
            site = 1
        axis = ch.get("axis")
        if axis not in ("x", "y", "z"):
            if "axis" in ch:
                c.add(f"{p}.axis", f"expected x, y or z, got {axis!r}")
            axis = "z"
        out_ch.append({
            "site": int(site),
            "axis": axis,
            "gamma": c.number(ch, "gamma", p, lo=0, lo_open=True),
            "sigma": c.number(ch, "sigma", p, lo=0),
        })
    pairs = nd.get("correlate", [])
    out_pairs = []
    if not isinstance(pairs, list):
        c.add("noise.correlate", "expected a list of index pairs")
        pairs = []
    for k, pr in enumerate(pairs):
        p = f"noise.correlate[{k}]"
        if not (isinstance(pr, list) and len(pr) == 2 and all(_is_int(v) for v in pr)):
            c.add(p, "expected a pair of channel indices")
            continue
        i, j = pr
        if not (0 <= i < len(out_ch) and 0 <= j < len(out_ch)) or i == j:
            c.add(p, f"indices must be distinct and in 0..{len(out_ch) - 1}")
            continue
        out_pairs.append([int(i), int(j)])
    return {"channels": out_ch, "correlate": out_pairs}


def _check_initial(c: _Checker, doc, kind):
    if isinstance(doc, str):
        if doc == "ground":
            return "ground"
        try:
            b = BellKind.parse(doc)
        except ValueError:
            c.add("initial_state", f"unknown state {doc!r}")
            return "ground"
        if kind != "qubit_pair":
            c.add("initial_state", "Bell states need a qubit pair")
        return b.value
    m = c.mapping(doc, "initial_state", {"matrix", "imag"}, {"matrix"})
    d = 4 if kind == "qubit_pair" else 2
    re_part = m.get("matrix")
    im_part = m.get("imag", [[0.0] * d for _ in range(d)])

    def square(x, p):
        ok = (isinstance(x, list) and len(x) == d
              and all(isinstance(r, list) and len(r) == d and all(_is_number(v) for v in r) for r in x))
        if not ok:
            c.add(p, f"expected a {d}x{d} numeric matrix")
        return ok

    if square(re_part, "initial_state.matrix") and square(im_part, "initial_state.imag"):
        rho = np.asarray(re_part, dtype=float) + 1j * np.asarray(im_part, dtype=float)
        try:
            DensityMatrix(rho)
        except ValueError as exc:
            c.add("initial_state", str(exc))
        return {"matrix": [[float(v) for v in r] for r in re_part],
                "imag": [[float(v) for v in r] for r in im_part]}
    return "ground"


def _check_outputs(c: _Checker, doc, d: int) -> list:
    if not isinstance(doc, list) or not doc:
        c.add("outputs", "expected a non-empty list")
        return []
    seen = []
    for i, o in enumerate(doc):
        p = f"outputs[{i}]"
        if not isinstance(o, str):
            c.add(p, "expected a string")
            continue
        if o.startswith("population:"):
            k = o.partition(":")[2]
            if not k.isdigit() or int(k) >= d:
                c.add(p, f"population index must be in 0..{d - 1}")
                continue
        elif o not in _PLAIN_OUTPUTS:
            c.add(p, f"unknown output {o!r}")
            continue
        if o in seen:
            c.add(p, f"duplicate output {o!r}")
            continue
        seen.append(o)
    return seen


def _check_grid(c: _Checker, doc, outputs: list) -> dict:
    g = c.mapping(doc, "grid", {"time", "spectrum", "samples"})
    out = {}
    need_time = any(o in _TIME_OUTPUTS or o.startswith("population:") for o in outputs)
    if need_time and "time" not in g:
        c.add("grid.time", "required by the requested outputs")
    if "spectrum" in outputs and "spectrum" not in g:
        c.add("grid.spectrum", "required by the spectrum output")
    if "noise_samples" in outputs and "samples" not in g:
        c.add("grid.samples", "required by the noise_samples output")
    if "time" in g:
        t = c.mapping(g["time"], "grid.time", {"t_max", "n"}, {"t_max", "n"})
        out["time"] = {"t_max": c.number(t, "t_max", "grid.time", lo=0, lo_open=True),
                       "n": c.integer(t, "n", "grid.time", lo=2)}
    if "spectrum" in g:
        s = c.mapping(g["spectrum"], "grid.spectrum", {"t_max", "dt", "pad", "band"}, {"t_max", "dt"})
        spec = {"t_max": c.number(s, "t_max", "grid.spectrum", lo=0, lo_open=True),
                "dt": c.number(s, "dt", "grid.spectrum", lo=0, lo_open=True),
                "pad": c.integer(s, "pad", "grid.spectrum", default=4, lo=1)}
        band = s.get("band", [0.0, None])
        if not (isinstance(band, list) and len(band) == 2 and all(b is None or _is_number(b) for b in band)):
            c.add("grid.spectrum.band", "expected [low, high] with numbers or nulls")
            band = [0.0, None]
        spec["band"] = [None if b is None else float(b) for b in band]
        if spec["t_max"] is not None and spec["dt"] is not None and spec["dt"] >= spec["t_max"]:
            c.add("grid.spectrum.dt", "must be smaller than t_max")
        out["spectrum"] = spec
    if "samples" in g:
        s = c.mapping(g["samples"], "grid.samples", {"t_max", "dt", "n_paths", "method"},
                      {"t_max", "dt", "n_paths"})
        method = s.get("method", "exact")
        if method not in ("exact", "euler"):
            c.add("grid.samples.method", f"expected exact or euler, got {method!r}")
            method = "exact"
        out["samples"] = {"t_max": c.number(s, "t_max", "grid.samples", lo=0, lo_open=True),
                          "dt": c.number(s, "dt", "grid.samples", lo=0, lo_open=True),
                          "n_paths": c.integer(s, "n_paths", "grid.samples", lo=1),
                          "method": method}
    return out


def _resolve(doc: dict, dotted: str):
    """Return ``(container, key)`` for a path like ``noise.channels[2].sigma``."""
    node, parts = doc, dotted.split(".")
    for i, part in enumerate(parts):
        m = _INDEXED.match(part)
        if not m:
            raise KeyError(dotted)
        key, idx = m.group(1), m.group(2)
        last = i == len(parts) - 1
        if idx is None:
            if last:
                if not isinstance(node, dict) or key not in node:
                    raise KeyError(dotted)
                return node, key
            node = node[key]
        else:
            seq = node[key]
            if last:
                raise KeyError(dotted)
            node = seq[int(idx)]
    raise KeyError(dotted)


def _check_sweep(c: _Checker, doc, normalized: dict):
    if doc is None:
        return None
    s = c.mapping(doc, "sweep", {"parameter", "values"}, {"parameter", "values"})
    param, values = s.get("parameter"), s.get("values")
    if not isinstance(param, str):
        c.add("sweep.parameter", "expected a dotted parameter path")
        return None
    try:
        holder, key = _resolve(normalized, param)
        if not _is_number(holder[key]):
            raise KeyError(param)
    except (KeyError, IndexError, TypeError):
        c.add("sweep.parameter", f"{param!r} does not name a numeric scenario parameter")
        return None
    if not isinstance(values, list) or not values or not all(_is_number(v) for v in values):
        c.add("sweep.values", "expected a non-empty list of numbers")
        return None
    for i, v in enumerate(values):
        doc = copy.deepcopy(normalized)
        holder, key = _resolve(doc, param)
        holder[key] = float(v)
        try:
            parse_scenario(doc)
        except SchemaViolation as exc:
            for path, msg in exc.violations:
                c.add(f"sweep.values[{i}]", f"{path}: {msg}")
    return {"parameter": param, "values": [float(v) for v in values]}


@dataclass(frozen=True)
class SweepPoint:
    index: int
    xi: float
    parameter: str | None
    value: float | None
    document: dict

    @property
    def label(self) -> str:
        extra = "" if self.parameter is None else f", {self.parameter}={self.value:g}"
        return f"point {self.index} (xi={self.xi:g}{extra})"


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; ``document`` is the normalised tree with defaults filled in."""

    document: dict

    def __getattr__(self, name):
        doc = object.__getattribute__(self, "document")
        if name in doc:
            return doc[name]
        raise AttributeError(name)

    @property
    def digest(self) -> str:
        text = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_seed(self, seed: int) -> "Scenario":
        doc = copy.deepcopy(self.document)
        doc["seed"] = int(seed)
        return Scenario(doc)

    def points(self) -> list[SweepPoint]:
        sweep = self.document.get("sweep")
        values = [None] if sweep is None else sweep["values"]
        out = []
        for xi in self.document["xi_sweep"]:
            for v in values:
                doc = copy.deepcopy(self.document)
                if v is not None:
                    holder, key = _resolve(doc, sweep["parameter"])
                    holder[key] = v
                out.append(SweepPoint(len(out), xi, None if v is None else sweep["parameter"], v, doc))
        return out


def parse_scenario(text) -> Scenario:
    """Parse and validate a YAML scenario; every violation is reported at once."""
    if isinstance(text, dict):
        raw = copy.deepcopy(text)
    else:
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise SchemaViolation([("<document>", f"not valid YAML: {exc}")]) from None
    c = _Checker()
    raw = c.mapping(raw, "", _TOP_KEYS, {"schema_version", "system", "noise", "outputs"})
    if "schema_version" in raw and raw["schema_version"] != SCHEMA_VERSION:
        c.add("schema_version", f"unsupported version {raw['schema_version']!r}; expected {SCHEMA_VERSION}")

    system = _check_system(c, raw.get("system", {}))
    kind = system.get("kind")
    d = 4 if kind == "qubit_pair" else 2
    noise = _check_noise(c, raw.get("noise", {}), kind)

    xis = raw.get("xi_sweep", [0.0])
    if not isinstance(xis, list) or not xis:
        c.add("xi_sweep", "expected a non-empty list")
        xis = []
    xi_out = []
    for i, x in enumerate(xis):
        if not _is_number(x):
            c.add(f"xi_sweep[{i}]", f"expected a number, got {x!r}")
        elif abs(x) > 1:
            c.add(f"xi_sweep[{i}]", f"xi={x} outside [-1, 1]")
        else:
            xi_out.append(float(x))

    normalized = {
        "schema_version": SCHEMA_VERSION,
        "system": system,
        "noise": noise,
        "xi_sweep": xi_out,
        "initial_state": _check_initial(c, raw.get("initial_state", "ground"), kind),
        "temperature": c.number(raw, "temperature", "", default=0.0, lo=0),
        "secular": raw.get("secular", True),
        "outputs": _check_outputs(c, raw.get("outputs"), d),
        "seed": c.integer(raw, "seed", "", default=0, lo=0),
    }
    if not isinstance(normalized["secular"], bool):
        c.add("secular", "expected true or false")
    normalized["grid"] = _check_grid(c, raw.get("grid", {}), normalized["outputs"])
    sweep = _check_sweep(c, raw.get("sweep"), normalized)
    if sweep is not None:
        normalized["sweep"] = sweep
    if c.errors:
        raise SchemaViolation(c.errors)
    return Scenario(normalized)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- execution

def _build(doc: dict, xi: float):
    sysd, noise = doc["system"], doc["noise"]
    chans = noise["channels"]
    if sysd["kind"] == "qubit_pair":
        wiring = tuple((ch["site"], ch["axis"]) for ch in chans)
        model = build_qubit_pair(QubitPairParams(sysd["eps1"], sysd["eps2"], sysd["j_coupling"], wiring))
        mu = dipole_operator(*sysd["dipoles"]).mu
    else:
        model = build_single_qubit(sysd["eps"], [ch["axis"] for ch in chans])
        mu = sysd["dipoles"][0] * SIGMA_X
    corr = wiener_correlation(len(chans), [tuple(p) for p in noise["correlate"]], xi)
    process = OUProcess.diagonal([ch["gamma"] for ch in chans], [ch["sigma"] for ch in chans], corr)
    return model, process, mu


def _initial_density(doc: dict, model) -> np.ndarray:
    init = doc["initial_state"]
    if init == "ground":
        return model.to_lab(gibbs_state(model, 0.0))
    if isinstance(init, str):
        return np.asarray(bell_density(init).rho)
    return np.asarray(init["matrix"], dtype=float) + 1j * np.asarray(init["imag"], dtype=float)


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0] >> 1)


def _run_point(pt: SweepPoint, directory: Path) -> dict:
    t0 = time.perf_counter()
    doc = pt.document
    grid = doc["grid"]
    outputs = doc["outputs"]
    stem = f"p{pt.index:02d}"
    files: dict[str, str] = {}
    summary: dict = {}

    model, process, mu = _build(doc, pt.xi)
    L = liouvillian_for(model, process, doc["temperature"], doc["secular"])
    rho0 = _initial_density(doc, model)

    time_outputs = [o for o in outputs if o in _TIME_OUTPUTS or o.startswith("population:")]
    if time_outputs:
        times = np.linspace(0.0, grid["time"]["t_max"], grid["time"]["n"])
        traj = propagate(L, rho0, times)
        summary["min_eigenvalue"] = traj.metadata["min_eigenvalue"]
        summary["final_purity"] = float(traj.purity()[-1])
        for o in time_outputs:
            if o == "trajectory":
                params = {"xi": pt.xi, "process": process.to_dict(), "system": doc["system"]}
                c, j = write_trajectory(traj, directory / f"{stem}_trajectory", params)
                files["trajectory"] = c.name
                files["trajectory_meta"] = j.name
                continue
            series = series_from_trajectory(traj, o)
            name = o.replace(":", "_")
            files[o] = write_series(series, directory / f"{stem}_{name}.csv").name
            if o == "purity":
                summary["purity_half_life"] = half_life(series)
            elif o == "fidelity":
                summary["final_fidelity"] = float(series.values[-1])
                summary["fidelity_envelope_half_life"] = half_life(series, envelope=True)

    if "spectrum" in outputs:
        sg = grid["spectrum"]
        sgrid = SpectrumGrid(sg["t_max"], sg["dt"], sg["pad"], tuple(sg["band"]))
        sp = absorption_spectrum(L, mu, model.to_lab(L.rho_eq), sgrid)
        c, j = write_spectrum(sp, directory / f"{stem}_spectrum")
        files["spectrum"] = c.name
        files["spectrum_meta"] = j.name
        summary["fwhm"] = sp.fwhm
        summary["peak_height"] = sp.peak_height

    if "noise_samples" in outputs:
        sm = grid["samples"]
        n = int(round(sm["t_max"] / sm["dt"])) + 1
        ens = sample_paths(process, sm["dt"] * np.arange(n), sm["n_paths"], _point_seed(doc["seed"], pt.index),
                           method=sm["method"])
        c, j = write_paths(ens, directory / f"{stem}_noise")
        files["noise_samples"] = c.name
        files["noise_samples_meta"] = j.name

    return {"files": files, "summary": summary, "seconds": time.perf_counter() - t0}


@dataclass
class RunManifest:
    scenario_hash: str
    tool_version: str
    seed: int
    scenario: dict
    grid: dict
    points: list
    timing: dict
    positivity_watermark: float | None
    directory: Path | None = field(default=None, compare=False)

    @property
    def files(self) -> list[str]:
        out = []
        for p in self.points:
            out.extend(p["files"].values())
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "manifest_version": 1,
            "scenario_hash": self.scenario_hash,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "scenario": self.scenario,
            "grid": self.grid,
            "points": self.points,
            "files": self.files,
            "timing": self.timing,
            "positivity_watermark": self.positivity_watermark,
        }

    def write(self) -> Path:
        path = Path(self.directory) / "manifest.json"
        path.write_text(json.dumps(to_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        d = json.loads(path.read_text(encoding="utf-8"))
        return cls(d["scenario_hash"], d["tool_version"], d["seed"], d["scenario"], d["grid"], d["points"],
                   d["timing"], d["positivity_watermark"], path.parent)


def output_root(out=None) -> Path:
    return Path(out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_ROOT)


def run(s: Scenario, out=None, *, threads: int = 1, seed: int | None = None) -> RunManifest:
    """Execute every sweep point and write results plus ``manifest.json``.

    The output directory is named after the scenario hash, so identical
    scenarios land in the same place and produce identical CSV files for any
    ``threads``.  Failed points are recorded in the manifest and reported
    together in a :class:`SweepFailure` after all other points finished.
    """
    if seed is not None:
        s = s.with_seed(seed)
    digest = s.digest
    directory = output_root(out) / digest[:16]
    directory.mkdir(parents=True, exist_ok=True)
    pts = s.points()
    t0 = time.perf_counter()

    def work(pt: SweepPoint):
        try:
            return _run_point(pt, directory), None
        except CorrNoiseError as exc:
            return None, exc

    if threads > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, pts))
    else:
        results = [work(pt) for pt in pts]

    points, failures, watermark = [], [], None
    for pt, (res, exc) in zip(pts, results):
        entry = {"index": pt.index, "xi": pt.xi, "parameter": pt.parameter, "value": pt.value}
        if exc is None:
            entry.update(status="ok", files=res["files"], summary=res["summary"])
            m = res["summary"].get("min_eigenvalue")
            if m is not None:
                watermark = m if watermark is None else min(watermark, m)
        else:
            entry.update(status="failed", files={}, summary={}, error=f"{type(exc).__name__}: {exc}")
            failures.append((pt.label, exc))
        points.append(entry)
    timing = {"total_seconds": time.perf_counter() - t0,
              "point_seconds": [None if r is None else r["seconds"] for r, _ in results]}
    manifest = RunManifest(digest, __version__, s.document["seed"], s.document, s.document["grid"], points, timing,
                           watermark, directory)
    manifest.write()
    if failures:
        raise SweepFailure(failures, manifest)
    return manifest


# ---------------------------------------------------------------- comparison

@dataclass(frozen=True)
class SummaryTable:
    header: tuple
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    def __len__(self) -> int:
        return len(self.rows)


_COLUMNS = ("scenario", "initial_state", "xi", "parameter", "value", "fwhm", "purity_half_life",
            "fidelity_envelope_half_life", "final_fidelity")


def _cell(x) -> str:
    return "" if x is None else fmt(x)


def compare(manifests) -> SummaryTable:
    """Tabulate linewidth, purity half-life and long-time fidelity over all points."""
    loaded = [m if isinstance(m, RunManifest) else RunManifest.load(m) for m in manifests]
    if not loaded:
        raise ValueError("compare needs at least one manifest")
    ref = loaded[0].grid
    for m in loaded[1:]:
        if m.grid != ref:
            raise GridMismatch(f"grid of {m.scenario_hash[:16]} differs from {loaded[0].scenario_hash[:16]}")
    rows = []
    for m in loaded:
        init = m.scenario.get("initial_state")
        init = init if isinstance(init, str) else "matrix"
        for p in m.points:
            if p.get("status") != "ok":
                continue
            s = p["summary"]
            rows.append([m.scenario_hash[:16], init, fmt(p["xi"]), p.get("parameter") or "",
                         _cell(p.get("value")), _cell(s.get("fwhm")), _cell(s.get("purity_half_life")),
                         _cell(s.get("fidelity_envelope_half_life")), _cell(s.get("final_fidelity"))])
    return SummaryTable(_COLUMNS, rows)
