"""Karp-Rabin multiset fingerprints with bit-exact injective index maps.

A multiset over a finite indexed domain hashes to sum(b^idx(x)) mod q.
Equal multisets always agree; unequal ones agree with probability at most
max_index/q over a random base, provided every multiplicity stays below q.
Powers b^idx are computed by modular fast exponentiation since indices can
be astronomically large in full-precision mode.
"""

from __future__ import annotations

import hashlib
import random

from .field import is_probable_prime
from .rational import GaussianRat, Rat, is_u_rational


class DomainViolation(ValueError):
    """A value fed to an index map falls outside its declared domain."""


def code_rat(r: Rat, bound: int) -> int:
    """Injective code (num + bound) * bound + (den - 1) for bound-rational r.

    The code is strictly below (2*bound + 1) * bound.
    """
    if not is_u_rational(r, bound):
        raise DomainViolation(f"{r} is not {bound}-rational")
    return (r.numerator + bound) * bound + (r.denominator - 1)


def idx_point(z: GaussianRat, bound: int) -> int:
    """Injective index of a bound-rational complex point into [1, (2*bound+1)^4]."""
    side = (2 * bound + 1) ** 2
    idx = code_rat(z.re, bound) * side + code_rat(z.im, bound) + 1
    assert 1 <= idx <= (2 * bound + 1) ** 4
    return idx


def idx_point_max(bound: int) -> int:
    return (2 * bound + 1) ** 4


def idx_gamma(d1: Rat, d2: Rat, sigma: int, bound: int) -> int:
    """Injective index of an ordered bound-rational distance pair plus a sign.

    The pair stays ordered (distance to the first anchor, then to the
    second): collapsing it to a sorted set would make the fingerprint blind
    to reflections, since swapping the anchors both flips every sign and
    swaps every distance pair, reproducing the mirrored multiset exactly.
    """
    if sigma not in (-1, 0, 1):
        raise DomainViolation(f"sigma must be in {{-1,0,1}}, got {sigma}")
    k = (2 * bound + 1) * bound
    return (code_rat(d1, bound) * k + code_rat(d2, bound)) * 3 + (sigma + 1) + 1


def idx_gamma_max(bound: int) -> int:
    k = (2 * bound + 1) * bound
    return ((k - 1) * k + (k - 1)) * 3 + 3


def choose_q(lo: int, hi: int, rng: random.Random, max_attempts: int = 200_000) -> int:
    """Random prime in [lo, hi] by rejection sampling."""
    if lo < 3 or hi < lo:
        raise ValueError("invalid prime range")
    for _ in range(max_attempts):
        cand = rng.randrange(lo, hi + 1) | 1
        if cand > hi:
            continue
        if is_probable_prime(cand, rng):
            return cand
    raise RuntimeError(f"no prime found in [{lo}, {hi}]")


def derive_base(q: int, seed: bytes, tag: bytes = b"") -> int:
    """Deterministic base in [1, q) derived from a broadcast seed.

    Comparable fingerprints across independently processed sets require an
    identical (q, base) pair, so the base comes from a shared seed rather
    than per-set randomness.
    """
    counter = 0
    while True:
        digest = hashlib.sha256(seed + tag + counter.to_bytes(4, "big")).digest()
        val = int.from_bytes(digest, "big") % q
        if val != 0:
            return val
        counter += 1


class KRState:
    """Accumulator for sum(base^idx) mod q over a fed multiset."""

    __slots__ = ("q", "base", "acc", "aborted")

    def __init__(self, q: int, base: int):
        self.q = q
        self.base = base % q
        self.acc = 0
        self.aborted = False

    def feed(self, idx: int) -> None:
        if self.aborted:
            return
        self.acc = (self.acc + pow(self.base, idx, self.q)) % self.q

    def abort(self) -> None:
        self.aborted = True

    def value(self) -> int:
        return self.acc

    def merge(self, other: "KRState") -> "KRState":
        if (self.q, self.base) != (other.q, other.base):
            raise ValueError("fingerprint states use different (q, base)")
        merged = KRState(self.q, self.base)
        merged.acc = (self.acc + other.acc) % self.q
        merged.aborted = self.aborted or other.aborted
        return merged

    def state_bits(self) -> int:
        return self.q.bit_length() + 1
