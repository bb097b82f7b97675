"""File formats: CSV tables, JSON sidecars, the content cache, run manifests.

All CSV files are comma separated with a header row, '.' decimal point and a
``schema`` version column; floats are written with repr (shortest round trip)
so identical data produces identical bytes.  Files are written atomically
(temp file + rename).  Cache entries are single JSON files that embed a
sha256 digest of their canonical payload, so corruption is detectable
per entry.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
import time
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list, rows: list) -> None:
    """Write rows (sequences matching header) plus the schema column."""
    import io as _io

    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema"] + list(header))
    for row in rows:
        writer.writerow([SCHEMA_VERSION] + [_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_json(path, payload: dict) -> None:
    payload = dict(payload)
    payload.setdefault("schema_version", SCHEMA_VERSION)
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True)
                      + "\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def estimate_set_csv_rows(est) -> tuple:
    header = ["observable", "mean", "stderr", "mean_per_site", "n_bins",
              "tau_int"]
    n_sites = est.meta.get("L", 0) ** 2
    rows = []
    for name, e in est.estimates.items():
        per_site = e.mean / n_sites if n_sites else float("nan")
        rows.append([name, e.mean, e.stderr, per_site, e.n_bins, e.tau_int])
    return header, rows


def bins_csv_rows(est) -> tuple:
    header = ["bin_index", "observable", "value"]
    rows = []
    for name, series in est.bins.items():
        for k, v in enumerate(series):
            rows.append([k, name, float(v)])
    return header, rows


def tf_curve_csv_rows(curve) -> tuple:
    header = ["h_f", "T_f", "T_lo", "T_hi", "cooling_flag", "n_steps",
              "status"]
    rows = []
    for p in curve.points:
        if p.result is not None:
            rows.append([p.h_f, p.result.T_f, p.result.T_lo, p.result.T_hi,
                         p.cooling, p.result.n_bisection_steps, "ok"])
        else:
            rows.append([p.h_f, float("nan"), float("nan"), float("nan"),
                         False, 0, p.status.split(":")[0]])
    return header, rows


def critical_line_csv_rows(line) -> tuple:
    header = ["h", "T_c", "dT_c", "source"]
    rows = [[h, t, d, s] for h, t, d, s in
            zip(line.h, line.T_c, line.dT_c, line.sources)]
    return header, rows


def read_critical_line_csv(path):
    """Rebuild a CriticalLine from its CSV export."""
    from .phases import CriticalLine

    h, t, d, src = [], [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            h.append(float(row["h"]))
            t.append(float(row["T_c"]))
            d.append(float(row["dT_c"]))
            src.append(row["source"])
    order = np.argsort(h)
    return CriticalLine(h=np.array(h)[order], T_c=np.array(t)[order],
                        dT_c=np.array(d)[order],
                        sources=[src[i] for i in order])


def phase_diagram_csv_rows(diagram) -> tuple:
    header = ["T_i", "h_f", "T_f", "T_lo", "T_hi", "phase", "cooling_flag"]
    rows = []
    for row_idx, T_i in enumerate(diagram.T_i_grid):
        curve = diagram.curves[row_idx]
        for col_idx, p in enumerate(curve.points):
            phase = diagram.phases[row_idx][col_idx]
            if p.result is not None:
                rows.append([float(T_i), p.h_f, p.result.T_f, p.result.T_lo,
                             p.result.T_hi, phase, p.cooling])
            else:
                rows.append([float(T_i), p.h_f, float("nan"), float("nan"),
                             float("nan"), phase, False])
    return header, rows


def phase_boundary_csv_rows(diagram) -> tuple:
    header = ["T_i", "branch", "h_c_d", "h_lo", "h_hi"]
    rows = []
    for T_i, pts in zip(diagram.T_i_grid, diagram.critical_points):
        for p in pts:
            rows.append([float(T_i), p.branch, p.h_c, p.h_lo, p.h_hi])
    return header, rows


def time_series_csv_rows(series) -> tuple:
    header = ["t", "value"]
    rows = [[float(t), float(v)] for t, v in
            zip(series.times, series.values)]
    return header, rows


class CacheStore:
    """Content cache: one JSON file per entry with an embedded digest."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def _path(self, key: str) -> Path:
        safe = hashlib.blake2b(key.encode(), digest_size=12).hexdigest()
        return self.directory / f"{safe}.json"

    @staticmethod
    def _digest(payload: dict) -> str:
        canonical = json.dumps(payload, sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def put_json(self, key: str, payload: dict) -> Path:
        path = self._path(key)
        entry = {"key": key, "digest": self._digest(payload),
                 "payload": payload}
        atomic_write_text(path, json.dumps(entry, sort_keys=True, indent=1)
                          + "\n")
        return path

    def get_json(self, key: str):
        path = self._path(key)
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as f:
                entry = json.load(f)
        except (json.JSONDecodeError, OSError):
            return None
        if entry.get("digest") != self._digest(entry.get("payload", {})):
            return None
        return entry["payload"]

    def entries(self) -> list:
        if not self.directory.exists():
            return []
        out = []
        for path in sorted(self.directory.glob("*.json")):
            try:
                with open(path, encoding="utf-8") as f:
                    entry = json.load(f)
                out.append({"file": path.name, "key": entry.get("key", "?")})
            except (json.JSONDecodeError, OSError):
                out.append({"file": path.name, "key": "<unreadable>"})
        return out

    def verify(self) -> list:
        """(file name, ok, detail) for every entry in the cache."""
        results = []
        if not self.directory.exists():
            return results
        for path in sorted(self.directory.glob("*.json")):
            try:
                with open(path, encoding="utf-8") as f:
                    entry = json.load(f)
            except (json.JSONDecodeError, OSError) as exc:
                results.append((path.name, False, f"unreadable: {exc}"))
                continue
            ok = entry.get("digest") == self._digest(entry.get("payload", {}))
            results.append((path.name, ok,
                            "ok" if ok else "digest mismatch"))
        return results

    def purge(self) -> int:
        """Remove all entries; idempotent; returns the number removed."""
        if not self.directory.exists():
            return 0
        n = 0
        for path in self.directory.glob("*.json"):
            path.unlink()
            n += 1
        return n


class RunManifest:
    """Reproducibility record: config echo, seeds, digests of every output."""

    def __init__(self, command: str, config_text: str, master_seed: int):
        from . import __version__

        self.data = {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "command": command,
            "config_text": config_text,
            "master_seed": master_seed,
            "seeds": {},
            "outputs": {},
            "wall_time_s": None,
        }
        self._t0 = time.monotonic()

    def record_seed(self, label: str, seed: int) -> None:
        self.data["seeds"][label] = seed

    def record_output(self, path) -> None:
        path = Path(path)
        self.data["outputs"][path.name] = sha256_file(path)

    def write(self, path) -> None:
        self.data["wall_time_s"] = round(time.monotonic() - self._t0, 3)
        write_json(path, self.data)

    @staticmethod
    def load(path) -> dict:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
