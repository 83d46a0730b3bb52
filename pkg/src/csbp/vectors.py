"""Plain-text vector files: header ``csvec v1 <len>``, one value per line.

Values are written with shortest round-trip formatting, so save/load is
bit-exact for float64.
"""

import numpy as np

from .errors import ParseError


def dump_vector(x: np.ndarray) -> str:
    lines = [f"csvec v1 {len(x)}"]
    lines.extend(repr(float(v)) for v in np.asarray(x, dtype=float))
    return "\n".join(lines) + "\n"


def parse_vector(text: str) -> np.ndarray:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty vector file", line=1)
    head = lines[0].split()
    if len(head) != 3 or head[0] != "csvec" or head[1] != "v1":
        raise ParseError(f"bad header {lines[0]!r}", line=1)
    try:
        n = int(head[2])
    except ValueError:
        raise ParseError(f"bad length field {head[2]!r}", line=1) from None
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise ParseError(f"expected {n} values, found {len(body)}", line=len(lines))
    out = np.empty(n)
    for i, raw in enumerate(body):
        try:
            out[i] = float(raw)
        except ValueError:
            raise ParseError(f"bad value {raw!r}", line=i + 2) from None
    return out


def save_vector(x: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_vector(x))


def load_vector(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_vector(fh.read())
