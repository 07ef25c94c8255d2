"""Disk cache for tabulated transfer functions: CSV table plus JSON provenance."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
import tempfile

import numpy as np

ENV_VAR = "GEXIT_CACHE"


def default_dir() -> Path:
    return Path(os.environ.get(ENV_VAR, Path.home() / ".cache" / "gexit"))


def key_of(provenance: dict) -> str:
    blob = json.dumps(provenance, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:20]


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def table_to_csv(columns: list[str], data: np.ndarray) -> str:
    lines = [",".join(columns)]
    lines += [",".join(repr(float(v)) for v in row) for row in np.atleast_2d(data)]
    return "\n".join(lines) + "\n"


def table_from_csv(text: str) -> tuple[list[str], np.ndarray]:
    rows = text.strip().splitlines()
    cols = rows[0].split(",")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]], dtype=float)
    return cols, data.reshape(-1, len(cols))


class TableCache:
    """Content-addressed store; ``None`` directory disables caching."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None

    def paths(self, name: str, provenance: dict) -> tuple[Path, Path]:
        stem = f"{name}-{key_of(provenance)}"
        return self.directory / f"{stem}.csv", self.directory / f"{stem}.json"

    def get_or_compute(self, name: str, provenance: dict, columns: list[str], compute) -> np.ndarray:
        if self.directory is None:
            return np.asarray(compute(), dtype=float)
        csv_path, meta_path = self.paths(name, provenance)
        if csv_path.exists() and meta_path.exists():
            cols, data = table_from_csv(csv_path.read_text())
            if cols == columns:
                return data
        data = np.asarray(compute(), dtype=float)
        _atomic_write(csv_path, table_to_csv(columns, data))
        _atomic_write(meta_path, json.dumps({"name": name, "columns": columns, **provenance},
                                            indent=2, sort_keys=True, default=str) + "\n")
        return data
