"""Plain-text chain files.

Discrete chain file::

    # comments and blank lines are ignored
    n 2
    t0 0
    count 2
    extension repeat          # identity | repeat | cycle | generator
    generator family=gossip-pairs n=2 seed=7 pair_prob=1.0 mixing=0.5
    1 0
    0.5 0.5
    0.5 0.5
    0 1

The ``generator`` line is only present (and then required) for the
``generator`` extension; the stored blocks are ``A(t0) .. A(t0+count-1)``
and later times are regenerated from the header.

Continuous-time file::

    n 2
    segments 1
    duration 0.5
    -1 1
    1 -1

Reals are written with 17 significant digits so a write/read cycle is
lossless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from .chain_core import EXTENSIONS, ChainWindow
from .continuous_time import CtChain
from .errors import ChainError, DimensionMismatch


class UnreadableInput(ChainError):
    pass


class MalformedSpec(ChainError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


def _lines(text: str) -> list:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableInput(f"{path}: {exc}") from exc


def _header(lines: list, key: str, pos: int) -> str:
    if pos >= len(lines):
        raise MalformedSpec(f"missing header field {key!r}")
    parts = lines[pos].split(None, 1)
    if parts[0] != key or len(parts) != 2:
        raise MalformedSpec(f"expected '{key} <value>' on header line {pos + 1}, got {lines[pos]!r}")
    return parts[1].strip()


def _int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise MalformedSpec(f"{key} must be an integer, got {value!r}") from None


def _rows(lines: Iterable[str], n: int, what: str) -> np.ndarray:
    rows = []
    for line in lines:
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError:
            raise MalformedSpec(f"non-numeric entry in {what}: {line!r}") from None
        if len(row) != n:
            raise DimensionMismatch(f"{what} has a row of length {len(row)}, expected n={n}")
        rows.append(row)
    return np.array(rows, dtype=float).reshape(-1, n)


def parse_chain(text: str) -> ChainWindow:
    from .random_chains import GeneratorSpec, sample_matrix

    lines = _lines(text)
    n = _int(_header(lines, "n", 0), "n")
    t0 = _int(_header(lines, "t0", 1), "t0")
    count = _int(_header(lines, "count", 2), "count")
    extension = _header(lines, "extension", 3)
    if n < 1 or count < 1 or t0 < 0:
        raise MalformedSpec("need n >= 1, count >= 1 and t0 >= 0")
    if extension not in EXTENSIONS:
        raise MalformedSpec(f"extension must be one of {EXTENSIONS}, got {extension!r}")
    body = lines[4:]
    kwargs = {}
    if extension == "generator":
        try:
            spec = GeneratorSpec.from_header(_header(lines, "generator", 4))
        except (KeyError, ValueError) as exc:
            if isinstance(exc, MalformedSpec):
                raise
            raise MalformedSpec(f"bad generator line: {exc}") from None
        if spec.n != n:
            raise DimensionMismatch(f"generator n={spec.n} differs from header n={n}")
        kwargs = {"generator": lambda t: sample_matrix(spec, t), "generator_spec": spec}
        body = lines[5:]
    if len(body) != n * count:
        raise MalformedSpec(f"expected {count} blocks of {n} rows ({n * count} lines), found {len(body)}")
    mats = _rows(body, n, "matrix block").reshape(count, n, n)
    return ChainWindow(mats, t0=t0, extension=extension, **kwargs)


def format_chain(chain: ChainWindow) -> str:
    ext = chain.extension or "identity"
    out = [f"n {chain.n}", f"t0 {chain.t0}", f"count {chain.count}", f"extension {ext}"]
    if ext == "generator":
        if chain.generator_spec is None:
            raise ChainError("only generator chains built from a GeneratorSpec can be written")
        out.append("generator " + chain.generator_spec.header())
    for k, m in enumerate(chain.matrices):
        out.append(f"# A({chain.t0 + k})")
        out.extend(" ".join(fmt(v) for v in row) for row in m)
    return "\n".join(out) + "\n"


def read_chain(path) -> ChainWindow:
    return parse_chain(_read(path))


def write_chain(chain: ChainWindow, path) -> None:
    Path(path).write_text(format_chain(chain))


def parse_ct(text: str) -> CtChain:
    lines = _lines(text)
    n = _int(_header(lines, "n", 0), "n")
    k = _int(_header(lines, "segments", 1), "segments")
    if n < 1 or k < 1:
        raise MalformedSpec("need n >= 1 and segments >= 1")
    if len(lines) != 2 + k * (n + 1):
        raise MalformedSpec(f"expected {k} segments of 1 + {n} lines, found {len(lines) - 2} lines")
    durations, gens = [], []
    for s in range(k):
        base = 2 + s * (n + 1)
        try:
            durations.append(float(_header(lines, "duration", base)))
        except ValueError:
            raise MalformedSpec(f"bad duration on segment {s}") from None
        gens.append(_rows(lines[base + 1:base + 1 + n], n, f"generator of segment {s}"))
    return CtChain(np.array(durations), np.stack(gens))


def format_ct(chain: CtChain) -> str:
    out = [f"n {chain.n}", f"segments {len(chain.durations)}"]
    for d, g in zip(chain.durations, chain.generators):
        out.append(f"duration {fmt(d)}")
        out.extend(" ".join(fmt(v) for v in row) for row in g)
    return "\n".join(out) + "\n"


def read_ct(path) -> CtChain:
    return parse_ct(_read(path))


def parse_grid(text: str) -> np.ndarray:
    """Comma- or whitespace-separated times."""
    try:
        return np.array([float(tok) for tok in text.replace(",", " ").split()])
    except ValueError:
        raise MalformedSpec(f"grid must be a list of reals, got {text!r}") from None
