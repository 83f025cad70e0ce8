"""Circular correlations, the sum-of-squares objective and incremental table updates.

All correlation values are exact integers.  ``CorrelationTable`` keeps the
full ``m × m × n`` array so that row ``i`` holds every correlation involving
code ``i``; the lower triangle is the index-reversed mirror of the upper one,
``(x^j ⋆ x^i)_k = (x^i ⋆ x^j)_{-k}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import CodeFamily, acz_parameter

__all__ = [
    "ObjectiveValue",
    "CorrelationTable",
    "cross_correlation",
    "build_table",
    "isl",
    "stage_one_objective",
    "apply_assignment",
    "parseval_check",
    "expected_random_mos",
    "acz_count",
]


def _shift_index(n: int) -> np.ndarray:
    # entry [k, s] = (s + k) mod n
    return (np.arange(n)[None, :] + np.arange(n)[:, None]) % n


def cross_correlation(w, v) -> np.ndarray:
    """Return ``c`` with ``c[k] = sum_s w[s] * v[(s + k) % n]``."""
    w = np.asarray(w, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if w.ndim != 1 or v.ndim != 1:
        raise ValueError("expected 1-D sequences")
    if w.shape != v.shape:
        raise ValueError(f"length mismatch: {w.size} vs {v.size}")
    return v[_shift_index(w.size)] @ w


@dataclass(frozen=True)
class ObjectiveValue:
    """Sum of squared correlations over all pairs ``i <= j`` and shifts.

    ``mos`` divides ``isl`` by the number of summed terms, ``n·m(m+1)/2``.
    ``sidelobe_mos`` uses the same denominator but drops the ``m`` zero-shift
    autocorrelation peaks (each worth ``n²``) from the numerator; this is the
    figure usually quoted for Gold/Weil baselines.
    """

    isl: int
    n: int
    m: int

    @property
    def n_terms(self) -> int:
        return self.n * self.m * (self.m + 1) // 2

    @property
    def mos(self) -> float:
        return self.isl / self.n_terms

    @property
    def sidelobe_isl(self) -> int:
        return self.isl - self.m * self.n * self.n

    @property
    def sidelobe_mos(self) -> float:
        return self.sidelobe_isl / self.n_terms


class CorrelationTable:
    """All pairwise circular correlations of a family, kept exact under updates."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.int64)
        if values.ndim != 3 or values.shape[0] != values.shape[1]:
            raise ValueError(f"expected shape (m, m, n), got {values.shape}")
        self.values = values
        self._isl = _isl_from_values(values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    @property
    def isl(self) -> int:
        return self._isl

    def pair(self, i: int, j: int) -> np.ndarray:
        """``(x^i ⋆ x^j)_k`` for ``k = 0..n-1``."""
        return self.values[i, j]

    def shift_one(self) -> np.ndarray:
        """Shift-one autocorrelation of every code."""
        idx = np.arange(self.m)
        return self.values[idx, idx, 1]

    def objective(self) -> ObjectiveValue:
        return ObjectiveValue(self._isl, self.n, self.m)

    def copy(self) -> "CorrelationTable":
        return CorrelationTable(self.values.copy())

    def __eq__(self, other):
        if not isinstance(other, CorrelationTable):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"CorrelationTable(n={self.n}, m={self.m}, isl={self._isl})"


def _isl_from_values(values: np.ndarray) -> int:
    # each off-diagonal pair appears twice with the same sum of squares
    sq = np.einsum("ijk,ijk->ij", values, values)
    return int((sq.sum() + np.trace(sq)) // 2)


def build_table(family: CodeFamily) -> CorrelationTable:
    """Correlations of every code pair at every shift."""
    x = family.chips.astype(np.float64)
    n, m = family.n, family.m
    values = np.empty((m, m, n), dtype=np.int64)
    for k in range(n):
        # float64 sums of ±1 products are exact far beyond any practical n
        values[:, :, k] = np.rint(x.T @ np.roll(x, -k, axis=0))
    return CorrelationTable(values)


def isl(table: CorrelationTable) -> ObjectiveValue:
    return ObjectiveValue(_isl_from_values(table.values), table.n, table.m)


def stage_one_objective(table: CorrelationTable) -> int:
    """Sum over codes of the squared shift-one autocorrelation."""
    s1 = table.shift_one()
    return int(np.dot(s1, s1))


def _flip(chips: np.ndarray, values: np.ndarray, i: int, r: int) -> int:
    """Negate chip ``(i, r)`` in place and patch ``values``; return the isl change."""
    n = chips.shape[0]
    a = int(chips[r, i])
    ks = np.arange(n)
    before = int(np.einsum("jk,jk->", values[i], values[i]))
    plus = chips[(r + ks) % n].T.astype(np.int64)   # [j, k] = x^j_{r+k}
    minus = chips[(r - ks) % n].T.astype(np.int64)  # [j, k] = x^j_{r-k}
    values[i] -= 2 * a * plus
    values[:, i] -= 2 * a * minus
    # both updates hit (i, i, 0) with the chip's own square; the peak is unchanged
    values[i, i, 0] += 4 * a * a
    chips[r, i] = -a
    after = int(np.einsum("jk,jk->", values[i], values[i]))
    return after - before


def apply_assignment(
    family: CodeFamily,
    table: CorrelationTable,
    assignment: Iterable[tuple[tuple[int, int], int]],
) -> tuple[CodeFamily, CorrelationTable, ObjectiveValue]:
    """Set chips ``(i, r)`` to the given ±1 values, updating ``table`` in place.

    Only chips that actually change are touched; each change costs O(n·m).
    Returns the new family, the (same, mutated) table and the new objective.
    """
    n, m = family.n, family.m
    if table.values.shape != (m, m, n):
        raise ValueError("table does not match family dimensions")
    chips = family.chips.copy()
    changes = []
    for (i, r), value in assignment:
        if not (0 <= i < m and 0 <= r < n):
            raise IndexError(f"index ({i}, {r}) out of range for n={n}, m={m}")
        if value not in (1, -1):
            raise ValueError(f"chip value must be ±1, got {value}")
        changes.append((int(i), int(r), int(value)))
    delta = 0
    for i, r, value in changes:
        if chips[r, i] != value:
            delta += _flip(chips, table.values, i, r)
    table._isl += delta
    return CodeFamily(chips), table, table.objective()


def parseval_check(w, v, rtol: float = 1e-9) -> bool:
    """Check sum_k (w⋆v)_k² against the DFT energy identity.

    The correlation sequence has DFT ``conj(W)·V``, so its energy equals
    ``(1/n) sum_j |W_j|² |V_j|²``.
    """
    c = cross_correlation(w, v)
    lhs = float(np.dot(c, c))
    W = np.fft.fft(np.asarray(w, dtype=float))
    V = np.fft.fft(np.asarray(v, dtype=float))
    rhs = float(np.sum(np.abs(W) ** 2 * np.abs(V) ** 2)) / len(c)
    return abs(lhs - rhs) <= rtol * max(abs(lhs), abs(rhs), 1.0)


def expected_random_mos(n: int, m: int) -> float:
    """Mean ``mos`` of a family with i.i.d. uniform chips.

    Every non-peak correlation is a sum of n independent ±1 products, so its
    second moment is n; the m peaks contribute n² each.  Exact for odd n (for
    even n the half-period autocorrelation has second moment 2n).
    """
    n_terms = n * m * (m + 1) / 2
    return (n_terms * n + m * (n * n - n)) / n_terms


def acz_count(family: CodeFamily) -> int:
    """Number of codes whose shift-one autocorrelation is minimal."""
    x = family.chips.astype(np.int64)
    s1 = np.einsum("si,si->i", x, np.roll(x, -1, axis=0))
    return int(np.sum(np.abs(s1) <= acz_parameter(family.n)))
