"""Baseline and initial code families: Gold, Weil and uniform random."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CodeFamily, is_acz

__all__ = [
    "GoldSpec",
    "WeilSpec",
    "PREFERRED_PAIRS",
    "m_sequence",
    "gold_family",
    "legendre_sequence",
    "weil_family",
    "random_family",
    "acz_subset",
    "is_prime",
]

# Characteristic polynomials as exponent tuples, e.g. (7, 3, 0) is x^7 + x^3 + 1.
PREFERRED_PAIRS = {
    5: ((5, 2, 0), (5, 4, 3, 2, 0)),
    6: ((6, 1, 0), (6, 5, 2, 1, 0)),
    7: ((7, 3, 0), (7, 3, 2, 1, 0)),
    9: ((9, 4, 0), (9, 6, 4, 3, 0)),
    10: ((10, 3, 0), (10, 9, 8, 6, 3, 2, 0)),
}


@dataclass(frozen=True)
class GoldSpec:
    degree: int
    taps_u: tuple[int, ...] | None = None
    taps_v: tuple[int, ...] | None = None
    state_u: tuple[int, ...] | None = None
    state_v: tuple[int, ...] | None = None

    def resolved(self) -> "GoldSpec":
        d = self.degree
        if self.taps_u is None or self.taps_v is None:
            if d not in PREFERRED_PAIRS:
                raise ValueError(f"no default preferred pair for degree {d}; pass taps explicitly")
            pu, pv = PREFERRED_PAIRS[d]
        else:
            pu, pv = self.taps_u, self.taps_v
        return GoldSpec(
            degree=d,
            taps_u=tuple(pu),
            taps_v=tuple(pv),
            state_u=self.state_u or (1,) * d,
            state_v=self.state_v or (1,) * d,
        )


@dataclass(frozen=True)
class WeilSpec:
    p: int
    # value of the Legendre bit at t = 0; residues map to 1, non-residues to 0
    legendre_zero_bit: int = 0


def m_sequence(taps, state=None) -> np.ndarray:
    """One period of the 0/1 sequence of a Fibonacci LFSR.

    ``taps`` lists the exponents of the characteristic polynomial (the degree
    and 0 must both be present).  The sequence obeys
    ``a[t + d] = XOR_{e in taps, e < d} a[t + e]`` and starts with ``state``.
    Raises ValueError if the register does not have maximal period 2^d - 1.
    """
    taps = sorted(set(int(t) for t in taps), reverse=True)
    d = taps[0]
    if d < 2 or taps[-1] != 0:
        raise ValueError(f"taps {taps} do not describe a polynomial with a constant term")
    lower = [t for t in taps if t < d]
    state = list(state) if state is not None else [1] * d
    if len(state) != d or not any(state):
        raise ValueError("initial state must have length d and be nonzero")
    period = 2**d - 1
    seq = np.zeros(period + d, dtype=np.uint8)
    seq[:d] = state
    for t in range(period):
        bit = 0
        for e in lower:
            bit ^= seq[t + e]
        seq[t + d] = bit
    # maximal iff the state first recurs after exactly 2^d - 1 steps
    head = seq[:d]
    for t in range(1, period):
        if np.array_equal(seq[t:t + d], head):
            raise ValueError(f"polynomial {taps} is not primitive (period {t})")
    if not np.array_equal(seq[period:period + d], head):
        raise ValueError(f"polynomial {taps} is not primitive")
    return seq[:period].copy()


def _to_chips(bits: np.ndarray) -> np.ndarray:
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


def gold_family(spec: GoldSpec | int) -> CodeFamily:
    """All ``2^d + 1`` Gold codes: u, v, then u XOR shift^k(v) for k ascending."""
    if isinstance(spec, int):
        spec = GoldSpec(spec)
    spec = spec.resolved()
    u = m_sequence(spec.taps_u, spec.state_u)
    v = m_sequence(spec.taps_v, spec.state_v)
    if u.size != v.size:
        raise ValueError("preferred pair must share a degree")
    codes = [u, v] + [u ^ np.roll(v, -k) for k in range(u.size)]
    return CodeFamily(np.stack([_to_chips(c) for c in codes], axis=1))


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def legendre_sequence(p: int, zero_bit: int = 0) -> np.ndarray:
    """0/1 Legendre sequence: 1 at nonzero quadratic residues mod p, else 0."""
    if not is_prime(p) or p < 3:
        raise ValueError(f"{p} is not an odd prime")
    seq = np.zeros(p, dtype=np.uint8)
    seq[(np.arange(1, p, dtype=np.int64) ** 2) % p] = 1
    seq[0] = zero_bit
    return seq


def weil_family(spec: WeilSpec | int) -> CodeFamily:
    """The ``(p - 1)/2`` Weil codes ``l(t) XOR l((t + k) mod p)``, k = 1..(p-1)/2."""
    if isinstance(spec, int):
        spec = WeilSpec(spec)
    if spec.p < 5 or not is_prime(spec.p):
        raise ValueError(f"Weil codes need a prime p >= 5, got {spec.p}")
    if spec.legendre_zero_bit not in (0, 1):
        raise ValueError("legendre_zero_bit must be 0 or 1")
    l = legendre_sequence(spec.p, spec.legendre_zero_bit)
    codes = [l ^ np.roll(l, -k) for k in range(1, (spec.p - 1) // 2 + 1)]
    return CodeFamily(np.stack([_to_chips(c) for c in codes], axis=1))


def random_family(n: int, m: int, seed=None) -> CodeFamily:
    """Independent fair ±1 chips drawn from numpy's PCG64 generator."""
    if n < 2 or m < 1:
        raise ValueError(f"need n >= 2 and m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n, m), dtype=np.int8)
    return CodeFamily(1 - 2 * bits)


def acz_subset(family: CodeFamily) -> CodeFamily:
    """Codes satisfying the ACZ property, in their original order."""
    keep = [i for i in range(family.m) if is_acz(family.code(i))]
    if not keep:
        raise ValueError("no code in the family satisfies ACZ")
    return family.subset(keep)
