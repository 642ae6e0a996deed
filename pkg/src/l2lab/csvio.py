"""Versioned CSV writers and readers.

Every file starts with a schema comment line ``# l2lab-csv <version> <name>``
and numbers are written as shortest round-trip decimals, so re-parsing a
file reproduces the exact in-memory values on any platform.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .errors import ConfigError

__all__ = ["CSV_VERSION", "write_csv", "read_csv"]

CSV_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    try:  # numpy scalars
        import numpy as np

        if isinstance(value, np.floating):
            return repr(float(value))
        if isinstance(value, np.integer):
            return str(int(value))
    except ImportError:  # pragma: no cover
        pass
    return str(value)


def write_csv(path: str | Path, name: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# l2lab-csv {CSV_VERSION} {name}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path: str | Path, expect_name: str | None = None) -> tuple[str, list[str], list[list[str]]]:
    """Read a versioned CSV; rejects files with a mismatched schema line."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        parts = first.split()
        if len(parts) != 4 or parts[0] != "#" or parts[1] != "l2lab-csv":
            raise ConfigError(f"{path}: missing schema line, got {first!r}")
        if int(parts[2]) != CSV_VERSION:
            raise ConfigError(f"{path}: schema version {parts[2]} unsupported (want {CSV_VERSION})")
        name = parts[3]
        if expect_name is not None and name != expect_name:
            raise ConfigError(f"{path}: schema {name!r} does not match expected {expect_name!r}")
        reader = csv.reader(fh)
        header = next(reader)
        return name, header, [row for row in reader]
