"""CSV/JSON writers and the run manifest.

Floats are written with 17 significant digits so reruns can be compared
byte for byte.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from kppspeed import __version__


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite(obj):
    # JSON has no NaN/inf; map them to null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Mapping):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_finite(json.loads(json.dumps(obj, default=_json_default))), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


def canonical_hash(obj) -> str:
    """sha256 of the key-sorted compact JSON form (stable under key reordering)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------- tables

def write_hamiltonian(path, table) -> Path:
    return write_csv(path, ["medium_id", "engine", "p", "H_under", "H_over"],
                     ([r["medium_id"], r["engine"], r["p"], r["H_under"], r["H_over"]] for r in table.rows()))


def write_eigen(path, rows: Iterable[Mapping]) -> Path:
    cols = ["medium_id", "engine", "p", "R", "value", "residual"]
    return write_csv(path, cols, ([r.get(c) for c in cols] for r in rows))


def write_fronts(path, trajectory) -> Path:
    fr = trajectory.fronts

    def rows():
        for i, t in enumerate(fr.t):
            for j, lam in enumerate(fr.levels):
                yield t, lam, fr.x_front[i, j]
    return write_csv(path, ["t", "level", "x_front"], rows())


def write_snapshots(path, trajectory) -> Path:
    def rows():
        for s in trajectory.snapshots:
            for x, u in zip(s.grid.x, s.u):
                yield s.t, x, u
    return write_csv(path, ["t", "x", "u"], rows())


# --------------------------------------------------------------------- manifest

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class Manifest:
    """Run manifest: written when a run starts and finalized when it ends."""

    def __init__(self, out_dir, config: Mapping, seed=None):
        self.out_dir = Path(out_dir)
        self.data = {
            "tool": "kppspeed",
            "version": __version__,
            "config_hash": canonical_hash(config),
            "seed": seed,
            "started": _now(),
            "finished": None,
            "status": "running",
            "stages": {},
            "outputs": [],
        }
        self.write()

    @property
    def path(self) -> Path:
        return self.out_dir / "manifest.json"

    def stage(self, name: str, status: str, **extra):
        self.data["stages"][name] = {"status": status, **extra}
        self.write()

    def finalize(self, status: str, files: Iterable = ()):
        inventory = []
        for f in sorted({Path(f) for f in files}):
            if f.exists() and f.resolve() != self.path.resolve():
                inventory.append({"file": os.path.relpath(f, self.out_dir), "sha256": file_hash(f),
                                  "bytes": f.stat().st_size})
        self.data["outputs"] = inventory
        self.data["status"] = status
        self.data["finished"] = _now()
        self.write()

    def write(self):
        write_json(self.path, self.data)
