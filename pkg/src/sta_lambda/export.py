"""Reproducible CSV output with a commented metadata header.

Floats are written with ``repr``, the shortest string that round-trips
exactly, and no timestamps are recorded, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .robustness import PHASE_CONVENTION


def config_hash(payload: Mapping) -> str:
    """SHA-256 of the canonical JSON form of ``payload``."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def metadata_lines(digest: str, command: str, extra: Mapping | None = None) -> list[str]:
    lines = [
        f"# sta_lambda {__version__}",
        f"# command {command}",
        f"# config_sha256 {digest}",
        f"# phase_convention {PHASE_CONVENTION}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key} {_cell(value)}")
    return lines


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence],
               digest: str, command: str, extra: Mapping | None = None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in metadata_lines(digest, command, extra):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def write_columns(path: Path, columns: Mapping[str, np.ndarray], digest: str,
                  command: str, extra: Mapping | None = None) -> Path:
    """Write equal-length arrays as named CSV columns."""
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    lengths = {len(d) for d in data}
    if len(lengths) != 1:
        raise ValueError("columns must have equal length")
    return write_rows(path, names, zip(*data), digest, command, extra)


def read_csv(path: Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Inverse of :func:`write_columns` for numeric files: ``(metadata, columns)``."""
    meta: dict[str, str] = {}
    body: list[str] = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(" ")
            meta[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(body))
    header, values = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        col = [r[j] for r in values]
        try:
            cols[name] = np.array([float(v) for v in col])
        except ValueError:
            cols[name] = np.array(col)
    return meta, cols
