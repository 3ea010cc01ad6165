"""F_p and F_p[i] arithmetic, prime sampling, and rational reconstruction.

F_p[i] = F_p[x]/(x^2+1) is a field exactly when p = 3 (mod 4); that class
is enforced at construction.  The reduction map phi_p sends a reduced
fraction a/b to a*b^(-1) mod p and extends componentwise to Gaussian
rationals; it is undefined when p divides a denominator.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Optional

from .rational import GaussianRat, Rat

_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67)


class UndefinedUnderPhi(ArithmeticError):
    """phi_p hit a denominator divisible by p (symptom of a bad prime)."""


class PrimeSearchExhausted(RuntimeError):
    """Rejection sampling failed to find a prime within the attempt budget."""


def is_probable_prime(n: int, rng: random.Random, rounds: int = 40) -> bool:
    """Miller-Rabin with ``rounds`` independent random witnesses."""
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n == q:
            return True
        if n % q == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class FpPrime:
    """Prime modulus p = residue_class (mod modulus_class), with p = 3 (mod 4)."""

    __slots__ = ("p", "residue_class", "modulus_class")

    def __init__(self, p: int, residue_class: int = 3, modulus_class: int = 4):
        if modulus_class % 4 != 0:
            raise ValueError("modulus class must be a multiple of 4")
        if p % modulus_class != residue_class or residue_class % 4 != 3:
            raise ValueError(f"{p} is not {residue_class} mod {modulus_class}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "residue_class", residue_class)
        object.__setattr__(self, "modulus_class", modulus_class)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("FpPrime is immutable")

    def __repr__(self) -> str:
        return f"FpPrime({self.p}, {self.residue_class} mod {self.modulus_class})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FpPrime) and self.p == other.p

    def __hash__(self) -> int:
        return hash(self.p)

    def bit_length(self) -> int:
        return self.p.bit_length()


def sample_prime(
    delta: int,
    residue: int,
    modulus: int,
    rng: random.Random,
    max_attempts: int = 200_000,
) -> FpPrime:
    """Uniform-ish prime in [delta, 4*delta] in the given residue class.

    Rejection sampling: draw a residue-class representative in range, then
    probable-prime test with 40 witness rounds.
    """
    if delta < 3:
        raise ValueError("delta must be >= 3")
    lo, hi = delta, 4 * delta
    for _ in range(max_attempts):
        base = rng.randrange(lo, hi + 1)
        cand = base - (base - residue) % modulus
        if cand < lo:
            cand += modulus
        if cand > hi:
            continue
        if is_probable_prime(cand, rng):
            return FpPrime(cand, residue, modulus)
    raise PrimeSearchExhausted(
        f"no prime = {residue} mod {modulus} found in [{delta}, {4*delta}]"
    )


def fp_inv(x: int, p: int) -> int:
    if x % p == 0:
        raise ZeroDivisionError("inverse of 0 in F_p")
    return pow(x, p - 2, p)


def phi_p_rat(r: Rat, p: int) -> int:
    """phi_p(a/b) = a * b^(-1) mod p on the reduced fraction a/b."""
    if r.denominator % p == 0:
        raise UndefinedUnderPhi(f"denominator {r.denominator} divisible by p")
    return r.numerator * fp_inv(r.denominator, p) % p


class FpiElem:
    """Element of F_p[i]; multiplication obeys i^2 = -1."""

    __slots__ = ("re", "im", "p")

    def __init__(self, re: int, im: int, p: int):
        object.__setattr__(self, "re", re % p)
        object.__setattr__(self, "im", im % p)
        object.__setattr__(self, "p", p)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("FpiElem is immutable")

    def __repr__(self) -> str:
        return f"FpiElem({self.re}, {self.im} | p={self.p})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FpiElem)
            and self.p == other.p
            and self.re == other.re
            and self.im == other.im
        )

    def __hash__(self) -> int:
        return hash((self.re, self.im, self.p))

    def __add__(self, other: FpiElem) -> FpiElem:
        return FpiElem(self.re + other.re, self.im + other.im, self.p)

    def __sub__(self, other: FpiElem) -> FpiElem:
        return FpiElem(self.re - other.re, self.im - other.im, self.p)

    def __neg__(self) -> FpiElem:
        return FpiElem(-self.re, -self.im, self.p)

    def __mul__(self, other: FpiElem) -> FpiElem:
        return FpiElem(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
            self.p,
        )

    def __pow__(self, k: int) -> FpiElem:
        if k < 0:
            return fpi_inv(self) ** (-k)
        out = FpiElem(1, 0, self.p)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> FpiElem:
        return FpiElem(self.re, -self.im, self.p)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def norm(self) -> int:
        """re^2 + im^2 in F_p (the field norm to F_p)."""
        return (self.re * self.re + self.im * self.im) % self.p

    def sort_key(self) -> tuple[int, int]:
        return (self.re, self.im)


def fpi_zero(p: int) -> FpiElem:
    return FpiElem(0, 0, p)


def fpi_one(p: int) -> FpiElem:
    return FpiElem(1, 0, p)


def fpi_inv(x: FpiElem) -> FpiElem:
    """(a+bi)^(-1) = (a - bi) / (a^2 + b^2); needs p = 3 (mod 4) to be total."""
    n = x.norm()
    if n == 0:
        raise ZeroDivisionError("inverse of 0 in F_p[i]")
    ninv = fp_inv(n, x.p)
    return FpiElem(x.re * ninv, -x.im * ninv, x.p)


def phi_p(z: GaussianRat, p: int) -> FpiElem:
    """Componentwise reduction of a Gaussian rational into F_p[i]."""
    return FpiElem(phi_p_rat(z.re, p), phi_p_rat(z.im, p), p)


def fp_sqrt(a: int, p: int) -> Optional[int]:
    """Square root in F_p for p = 3 (mod 4): a^((p+1)/4), verified."""
    a %= p
    if a == 0:
        return 0
    x = pow(a, (p + 1) // 4, p)
    return x if x * x % p == a else None


def fpi_sqrt(w: FpiElem) -> list[FpiElem]:
    """All z in F_p[i] with z^2 = w (0, 1, or 2 roots), for p = 3 (mod 4).

    Uses the norm map: if z = x + yi then x^2 + y^2 = ±sqrt(norm(w)) in F_p
    and x^2 - y^2 = Re(w), so x is one F_p square root away per sign branch.
    """
    p = w.p
    a, b = w.re, w.im
    if w.is_zero():
        return [fpi_zero(p)]
    if b == 0:
        x = fp_sqrt(a, p)
        if x is not None:
            return sorted({FpiElem(x, 0, p), FpiElem(-x, 0, p)}, key=FpiElem.sort_key)
        y = fp_sqrt(-a % p, p)
        if y is not None:
            return sorted({FpiElem(0, y, p), FpiElem(0, -y, p)}, key=FpiElem.sort_key)
        return []
    s = fp_sqrt(w.norm(), p)
    if s is None:
        return []
    inv2 = (p + 1) // 2
    for sgn in (s, (-s) % p):
        x2 = (a + sgn) * inv2 % p
        x = fp_sqrt(x2, p)
        if x is None or x == 0:
            continue
        y = b * fp_inv(2 * x % p, p) % p
        root = FpiElem(x, y, p)
        if root * root == w:
            return sorted({root, -root}, key=FpiElem.sort_key)
    return []


def pow2root_in_fpi(w: FpiElem, j: int) -> list[FpiElem]:
    """All z in F_p[i] with z^(2^j) = w, by iterated square roots.

    For p = 3 (mod 16) the 2-part of |F_p[i]*| = p^2 - 1 is exactly 8, so
    for j >= 3 the result has size 0 or 8 and the live set never exceeds 8.
    """
    if j < 0:
        raise ValueError("exponent level must be >= 0")
    current = {w}
    for _ in range(j):
        nxt: set[FpiElem] = set()
        for c in current:
            nxt.update(fpi_sqrt(c))
        if not nxt:
            return []
        current = nxt
    return sorted(current, key=FpiElem.sort_key)


def rational_reconstruct(x: int, n_bound: int, d_bound: int, p: int) -> Optional[Rat]:
    """Unique a/b with |a| <= n_bound, 1 <= b <= d_bound, phi_p(a/b) = x.

    Half-extended Euclidean sweep on (p, x), stopping at the first remainder
    <= n_bound; the cofactor is the candidate denominator.  Uniqueness holds
    when p > 2 * n_bound * d_bound, which callers must ensure.
    """
    if n_bound < 0 or d_bound < 1:
        raise ValueError("invalid reconstruction bounds")
    x %= p
    if x == 0:
        return Fraction(0)
    r0, r1 = p, x
    t0, t1 = 0, 1
    while r1 > n_bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    a, b = r1, t1
    if b == 0:
        return None
    if b < 0:
        a, b = -a, -b
    if a == 0 or b > d_bound or math.gcd(a, b) != 1:
        return None
    return Fraction(a, b)


def reconstruct_gaussian(
    z: FpiElem, n_bound: int, d_bound: int
) -> Optional[GaussianRat]:
    """Componentwise rational reconstruction of an F_p[i] element."""
    re = rational_reconstruct(z.re, n_bound, d_bound, z.p)
    if re is None:
        return None
    im = rational_reconstruct(z.im, n_bound, d_bound, z.p)
    if im is None:
        return None
    return GaussianRat(re, im)
