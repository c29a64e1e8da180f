"""Flat-file formats and atomic file writing."""

from __future__ import annotations

import contextlib
import hashlib
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .engine import Candidate
from .errors import ParseError


@contextlib.contextmanager
def atomic_write(path, mode: str = "w") -> Iterator:
    """Write to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_pairs(fh, candidates: Iterable[Candidate], names: Sequence[str] | None = None) -> None:
    """``a<TAB>b<TAB>est`` lines; candidates should already be sorted by (a, b)."""
    for a, b, est in candidates:
        if names is not None:
            a, b = names[a], names[b]
        fh.write(f"{a}\t{b}\t{float(est)!r}\n")


def read_pairs(fh) -> list[tuple[str, str, float]]:
    out = []
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(lineno, "expected a<TAB>b<TAB>est")
        try:
            est = float(parts[2])
        except ValueError:
            raise ParseError(lineno, f"estimate {parts[2]!r} is not a number") from None
        out.append((parts[0], parts[1], est))
    return out
