"""Pull-based observation streams consumed by the test procedures."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Protocol

import numpy as np

from .exceptions import DomainError, InputError


class ObservationSource(Protocol):
    def read(self, k: int) -> np.ndarray:
        """Return the next ``k`` observations, fewer only if the stream is exhausted."""

    def replay(self) -> "ObservationSource":
        """A fresh source yielding the identical sequence from the start."""


class ArraySource:
    """Finite stream backed by an in-memory array."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float).ravel()
        self._pos = 0

    def __len__(self):
        return self.values.size

    def read(self, k: int) -> np.ndarray:
        out = self.values[self._pos:self._pos + k]
        self._pos += out.size
        return out

    def replay(self) -> "ArraySource":
        return ArraySource(self.values)


class NormalStream:
    """Unbounded i.i.d. ``N(mu, var)`` stream.

    The generator is Philox keyed by ``(seed, rep_index)``, so replicate
    ``r`` is a pure function of the pair. Reads are chunking-invariant.
    """

    def __init__(self, seed: int, rep_index: int, mu: float, var: float):
        if not var > 0:
            raise DomainError(f"variance must be positive, got {var}")
        self.seed = int(seed)
        self.rep_index = int(rep_index)
        self.mu = float(mu)
        self.var = float(var)
        self._sd = math.sqrt(self.var)
        key = np.array([self.seed, self.rep_index], dtype=np.uint64)
        self._rng = np.random.Generator(np.random.Philox(key=key))

    def read(self, k: int) -> np.ndarray:
        return self.mu + self._sd * self._rng.standard_normal(k)

    def replay(self) -> "NormalStream":
        return NormalStream(self.seed, self.rep_index, self.mu, self.var)


def parse_observations(text: str, origin: str = "<data>") -> np.ndarray:
    """One decimal number per line; blank lines skipped, CRLF tolerated."""
    values = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        s = line.strip()
        if not s:
            continue
        try:
            x = float(s)
        except ValueError:
            raise InputError(f"{origin}:{lineno}: cannot parse {s!r} as a number") from None
        if not math.isfinite(x):
            raise InputError(f"{origin}:{lineno}: non-finite value {s!r}")
        values.append(x)
    return np.array(values, dtype=float)


class FileSource(ArraySource):
    """Stream read from a UTF-8 text file of one observation per line."""

    def __init__(self, path):
        self.path = Path(path)
        text = self.path.read_text(encoding="utf-8")
        super().__init__(parse_observations(text, origin=str(self.path)))

    def replay(self) -> ArraySource:
        return ArraySource(self.values)
