"""CSV and JSON writers for paths, trajectories, spectra and scalar series.

Numbers are written with 17 significant digits so that repeated runs can be
compared byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .observables import ScalarSeries, Spectrum
from .redfield import Trajectory
from .stochastic import PathEnsemble

__all__ = [
    "fmt",
    "paths_csv",
    "write_paths",
    "trajectory_csv",
    "write_trajectory",
    "spectrum_csv",
    "write_spectrum",
    "series_csv",
    "write_series",
    "to_jsonable",
]


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def to_jsonable(obj):
    """Recursively convert numpy and complex values into JSON-friendly objects."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def paths_csv(ens: PathEnsemble) -> str:
    n = ens.values.shape[-1]
    header = ["path_id", "t"] + [f"E_{i + 1}" for i in range(n)]
    rows = (
        [str(k), fmt(t)] + [fmt(v) for v in ens.values[k, i]]
        for k in range(len(ens))
        for i, t in enumerate(ens.times)
    )
    return _csv(header, rows)


def write_paths(ens: PathEnsemble, stem) -> tuple[Path, Path]:
    stem = Path(stem)
    csv_path = _write(stem.with_suffix(".csv"), paths_csv(ens))
    envelope = {
        "kind": "sample_paths",
        "data": csv_path.name,
        "seed": ens.seed,
        "method": ens.method,
        "n_paths": len(ens),
        "n_times": len(ens.times),
        "process": ens.process.to_dict(),
    }
    return csv_path, _write(stem.with_suffix(".json"), _dump_json(envelope))


def trajectory_csv(traj: Trajectory) -> str:
    d = traj.dim
    header = ["t"]
    for i in range(d):
        for j in range(d):
            header += [f"re_{i}{j}", f"im_{i}{j}"]
    header.append("purity")
    pur = traj.purity()
    rows = []
    for k, t in enumerate(traj.times):
        flat = traj.rhos[k].reshape(-1)
        row = [fmt(t)]
        for z in flat:
            row += [fmt(z.real), fmt(z.imag)]
        row.append(fmt(pur[k]))
        rows.append(row)
    return _csv(header, rows)


def write_trajectory(traj: Trajectory, stem, params: dict | None = None) -> tuple[Path, Path]:
    stem = Path(stem)
    csv_path = _write(stem.with_suffix(".csv"), trajectory_csv(traj))
    envelope = {
        "kind": "trajectory",
        "data": csv_path.name,
        "parameters": params or {},
        "secular": traj.metadata.get("secular"),
        "positivity_watermark": traj.metadata.get("min_eigenvalue"),
        "metadata": traj.metadata,
    }
    return csv_path, _write(stem.with_suffix(".json"), _dump_json(envelope))


def spectrum_csv(sp: Spectrum) -> str:
    return _csv(["omega", "S"], ([fmt(w), fmt(s)] for w, s in zip(sp.omegas, sp.intensities)))


def write_spectrum(sp: Spectrum, stem) -> tuple[Path, Path]:
    stem = Path(stem)
    csv_path = _write(stem.with_suffix(".csv"), spectrum_csv(sp))
    meta = {
        "kind": "spectrum",
        "data": csv_path.name,
        "fwhm": sp.fwhm,
        "peak_positions": sp.peak_positions,
        "peaks": sp.metadata.get("peaks", []),
        "window": sp.metadata.get("window", {}),
        "parseval": sp.metadata.get("parseval", {}),
        "grid": sp.metadata.get("grid", {}),
    }
    return csv_path, _write(stem.with_suffix(".json"), _dump_json(meta))


def series_csv(s: ScalarSeries) -> str:
    return _csv(["t", "value"], ([fmt(t), fmt(v)] for t, v in zip(s.times, s.values)))


def write_series(s: ScalarSeries, path) -> Path:
    return _write(Path(path), series_csv(s))
