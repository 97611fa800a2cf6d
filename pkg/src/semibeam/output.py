"""Atomic file output: CSV tables and run manifests."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

__all__ = ["atomic_write", "format_value", "emit_csv", "read_csv", "sha256_of", "RunManifest"]


def atomic_write(path, data: bytes) -> Path:
    """Write ``data`` to a temporary sibling of ``path`` and rename it into place."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as exc:
        raise OSError(f"{path}: cannot create output: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        if isinstance(exc, OSError):
            raise OSError(f"{path}: write failed: {exc}") from exc
        raise
    return path


def format_value(value) -> str:
    """Text form of one CSV cell; reals use 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if value is None:
        return ""
    return str(value)


def _rows(records, columns):
    for rec in records:
        if dataclasses.is_dataclass(rec):
            rec = dataclasses.asdict(rec)
        if isinstance(rec, dict):
            missing = [c for c in columns if c not in rec]
            if missing:
                raise ValueError(f"record lacks columns {missing}")
            yield [rec[c] for c in columns]
        else:
            rec = list(rec)
            if len(rec) != len(columns):
                raise ValueError(f"record has {len(rec)} fields, header has {len(columns)}")
            yield rec


def emit_csv(records, path, columns) -> Path:
    """Write ``records`` under the header ``columns`` atomically.

    Records may be dicts, dataclasses (looked up by column name) or
    sequences in column order.  An empty record list gives a header-only
    file.  Lines end in ``\\n``, including the last.
    """
    columns = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in _rows(records, columns):
        w.writerow([format_value(v) for v in row])
    return atomic_write(path, buf.getvalue().encode("utf-8"))


def read_csv(path):
    """Header and rows of a CSV written by ``emit_csv`` (cells as strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], rows[1:]


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


@dataclasses.dataclass
class RunManifest:
    """Provenance record for one CLI run.

    ``outputs`` maps file names (relative to the manifest) to sha256 digests.
    """

    command: str
    config: dict
    version: str
    derived: dict = dataclasses.field(default_factory=dict)
    results: dict = dataclasses.field(default_factory=dict)
    outputs: dict = dataclasses.field(default_factory=dict)
    status: str = "ok"
    started: str = ""
    finished: str = ""

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def add_output(self, path):
        path = Path(path)
        self.outputs[path.name] = sha256_of(path)

    def to_json(self) -> str:
        return json.dumps(_jsonable(dataclasses.asdict(self)), indent=2, sort_keys=False) + "\n"

    def write(self, path) -> Path:
        return atomic_write(path, self.to_json().encode("utf-8"))

    def verify(self, directory) -> dict:
        """Recompute each output checksum; maps name to match flag."""
        directory = Path(directory)
        return {name: (directory / name).is_file() and sha256_of(directory / name) == digest
                for name, digest in self.outputs.items()}
