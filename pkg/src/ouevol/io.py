"""CSV output with round-trippable numbers."""
from __future__ import annotations

import csv
from pathlib import Path

__all__ = ["fmt", "write_csv"]


def fmt(x) -> str:
    """17 significant digits for floats; everything else via ``str``."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    try:
        return f"{float(x):.17g}"
    except (TypeError, ValueError):
        return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path
