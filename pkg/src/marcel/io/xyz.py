"""Multi-frame XYZ reader."""

from __future__ import annotations

import re

import numpy as np

from marcel import elements
from marcel.errors import ParseError
from marcel.io.sdf import Source, _read_text

DEFAULT_ENERGY_PATTERN = r"(?:^|[\s,;])(?:E|energy)\s*[=:]\s*([-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)"


def parse_xyz(source: Source):
    """Parse concatenated XYZ frames into ``(symbols, coords, comment)`` tuples."""
    lines = _read_text(source).splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    frames = []
    k = 0
    while k < len(lines):
        if not lines[k].strip():
            k += 1
            continue
        try:
            count = int(lines[k].split()[0])
        except ValueError:
            raise ParseError(f"expected an atom count, got {lines[k]!r}", k + 1) from None
        comment = lines[k + 1] if k + 1 < len(lines) else ""
        rows = lines[k + 2:k + 2 + count]
        if len(rows) != count:
            raise ParseError(f"frame declares {count} atoms but has {len(rows)} rows", k + 1)
        symbols, coords = [], []
        for m, row in enumerate(rows):
            parts = row.split()
            if len(parts) < 4:
                raise ParseError(f"malformed atom row {row!r}", k + 3 + m)
            sym = parts[0]
            if sym.isdigit():
                sym = elements.symbol(int(sym))
            if not elements.is_element(sym):
                raise ParseError(f"unknown element symbol {sym!r}", k + 3 + m)
            try:
                coords.append([float(v) for v in parts[1:4]])
            except ValueError:
                raise ParseError(f"malformed atom row {row!r}", k + 3 + m) from None
            symbols.append(sym)
        frames.append((symbols, np.array(coords, dtype=np.float64).reshape(-1, 3), comment))
        k += 2 + count
    return frames


def energy_from_comment(comment: str, pattern: str = DEFAULT_ENERGY_PATTERN) -> float | None:
    m = re.search(pattern, comment)
    return float(m.group(1)) if m else None
