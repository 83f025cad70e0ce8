"""Domain types for ±1 code families, variable index sets and the family file format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CodeFamily",
    "IndexSet",
    "FamilyFormatError",
    "acz_parameter",
    "check_family",
    "is_acz",
    "save_family",
    "load_family",
    "format_family",
    "parse_family",
]


class FamilyFormatError(ValueError):
    """Raised when a family file cannot be parsed.

    ``line`` and ``column`` are 1-based; ``column`` is None for whole-line
    problems such as a bad header or a wrong line length.
    """

    def __init__(self, message: str, line: int, column: int | None = None):
        where = f"line {line}" if column is None else f"line {line} col {column}"
        super().__init__(f"{message} at {where}")
        self.line = line
        self.column = column


def acz_parameter(n: int) -> int:
    """Largest admissible |shift-one autocorrelation|: 0 for even n, 1 for odd n."""
    return n % 2


def check_family(chips, *, copy: bool = False) -> np.ndarray:
    """Validate a chip matrix and return it as an ``(n, m)`` int8 array.

    Accepts any array-like of ±1 values.  A 1-D input is treated as a single
    code (m = 1).
    """
    arr = np.array(chips, copy=copy) if copy else np.asarray(chips)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D chip matrix, got shape {arr.shape}")
    n, m = arr.shape
    if n < 2 or m < 1:
        raise ValueError(f"need n >= 2 and m >= 1, got n={n}, m={m}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("chips must be exactly -1 or +1")
    return arr.astype(np.int8, copy=False)


@dataclass(frozen=True, eq=False)
class CodeFamily:
    """An ``n × m`` matrix of ±1 chips; column ``i`` is code ``x^i``."""

    chips: np.ndarray

    def __post_init__(self):
        arr = check_family(self.chips, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "chips", arr)

    @property
    def n(self) -> int:
        return self.chips.shape[0]

    @property
    def m(self) -> int:
        return self.chips.shape[1]

    @property
    def g(self) -> int:
        return acz_parameter(self.n)

    def code(self, i: int) -> np.ndarray:
        return self.chips[:, i]

    def with_chips(self, updates: Iterable[tuple[tuple[int, int], int]]) -> "CodeFamily":
        """Return a copy with ``((i, r), value)`` assignments applied."""
        arr = self.chips.copy()
        for (i, r), value in updates:
            arr[r, i] = value
        return CodeFamily(arr)

    def subset(self, columns: Sequence[int]) -> "CodeFamily":
        return CodeFamily(self.chips[:, list(columns)])

    def __eq__(self, other):
        if not isinstance(other, CodeFamily):
            return NotImplemented
        return self.chips.shape == other.chips.shape and bool(np.array_equal(self.chips, other.chips))

    def __repr__(self):
        return f"CodeFamily(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class IndexSet:
    """Ordered set of free chip indices ``(i, r)``: code ``i``, chip ``r``."""

    entries: tuple[tuple[int, int], ...]
    active_columns: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        entries = tuple((int(i), int(r)) for i, r in self.entries)
        if len(set(entries)) != len(entries):
            raise ValueError("duplicate (i, r) entries in index set")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "active_columns", tuple(sorted({i for i, _ in entries})))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self, n: int, m: int) -> None:
        for i, r in self.entries:
            if not (0 <= i < m and 0 <= r < n):
                raise IndexError(f"index ({i}, {r}) out of range for n={n}, m={m}")


def is_acz(code) -> bool:
    """True iff the shift-one circular autocorrelation of ``code`` is minimal."""
    w = np.asarray(code, dtype=np.int64)
    if w.ndim != 1 or w.size < 2 or not np.all(np.abs(w) == 1):
        raise ValueError("code must be a 1-D ±1 vector of length >= 2")
    shift_one = int(np.dot(w, np.roll(w, -1)))
    return abs(shift_one) <= acz_parameter(w.size)


def format_family(family: CodeFamily) -> str:
    # 0 <-> +1, 1 <-> -1; one line per code
    bits = (family.chips < 0).astype(np.uint8) + ord("0")
    lines = [f"{family.n} {family.m}"]
    lines.extend(bits[:, i].tobytes().decode("ascii") for i in range(family.m))
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> CodeFamily:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FamilyFormatError("missing header", 1)
    header = lines[0].split()
    if len(header) != 2 or not all(tok.isdigit() for tok in header):
        raise FamilyFormatError("malformed header, expected 'n m'", 1)
    n, m = int(header[0]), int(header[1])
    if n < 2 or m < 1:
        raise FamilyFormatError(f"invalid dimensions n={n}, m={m}", 1)
    if len(lines) - 1 < m:
        raise FamilyFormatError(f"expected {m} code lines, found {len(lines) - 1}", len(lines) + 1)
    if len(lines) - 1 > m:
        raise FamilyFormatError(f"unexpected extra line after {m} codes", m + 2)
    chips = np.empty((n, m), dtype=np.int8)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        line = line.rstrip("\r")
        for col, ch in enumerate(line[:n], start=1):
            if ch not in "01":
                raise FamilyFormatError(f"illegal character {ch!r}", lineno, col)
        if len(line) != n:
            raise FamilyFormatError(f"expected {n} characters, found {len(line)}", lineno)
        chips[:, i] = 1 - 2 * (np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0"))
    return CodeFamily(chips)


def save_family(family: CodeFamily, path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_family(family))


def load_family(path: str | os.PathLike) -> CodeFamily:
    with open(path) as fh:
        return parse_family(fh.read())
