"""Exact rational, Gaussian-rational, and 3D rational arithmetic.

Every value in this module is an arbitrary-precision rational in canonical
reduced form (positive denominator, gcd 1, zero stored as 0/1), backed by
``fractions.Fraction``.  No floating point is used anywhere: square roots
are decided by perfect-square tests on reduced numerators and denominators.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Optional, Sequence

Rat = Fraction

_RAT_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


class SingularSystem(ValueError):
    """Raised when a linear solve meets a zero determinant."""


def parse_rat(text: str) -> Rat:
    """Parse the textual form ``±p/q`` (``/q`` omitted when q = 1)."""
    if not _RAT_RE.match(text):
        raise ValueError(f"not a rational literal: {text!r}")
    return Fraction(text)


def format_rat(r: Rat) -> str:
    """Canonical text form ``±p/q``, with ``/q`` dropped when q = 1."""
    return str(r)


def precision_of(r: Rat) -> int:
    """Smallest U such that r is U-rational (1 for zero)."""
    return max(abs(r.numerator), r.denominator)


def is_u_rational(r: Rat, bound: int) -> bool:
    """True iff r = 0 or the reduced form has |num| <= bound and den <= bound."""
    if bound < 1:
        raise ValueError("precision bound must be >= 1")
    if r == 0:
        return True
    return abs(r.numerator) <= bound and r.denominator <= bound


def product_precision_bound(bounds: Sequence[int]) -> int:
    """Precision class of a product of values that are U_i-rational."""
    if not bounds:
        raise ValueError("empty bound list")
    out = 1
    for b in bounds:
        out *= b
    return out


def sum_precision_bound(bounds: Sequence[int]) -> int:
    """Precision class of a sum of k values that are U_i-rational: k * prod(U_i)."""
    return len(bounds) * product_precision_bound(bounds)


def rational_sqrt(r: Rat) -> Optional[Rat]:
    """Exact nonnegative square root of r, or None when r is not a rational square."""
    if r < 0:
        return None
    if r == 0:
        return Fraction(0)
    n, d = r.numerator, r.denominator
    sn, sd = math.isqrt(n), math.isqrt(d)
    if sn * sn != n or sd * sd != d:
        return None
    return Fraction(sn, sd)


class GaussianRat:
    """Immutable complex number with exact rational components."""

    __slots__ = ("re", "im")

    def __init__(self, re: Rat | int | str = 0, im: Rat | int | str = 0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("GaussianRat is immutable")

    def __repr__(self) -> str:
        return f"GaussianRat({self.re!s}, {self.im!s})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GaussianRat)
            and self.re == other.re
            and self.im == other.im
        )

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __add__(self, other: GaussianRat) -> GaussianRat:
        return GaussianRat(self.re + other.re, self.im + other.im)

    def __sub__(self, other: GaussianRat) -> GaussianRat:
        return GaussianRat(self.re - other.re, self.im - other.im)

    def __neg__(self) -> GaussianRat:
        return GaussianRat(-self.re, -self.im)

    def __mul__(self, other: GaussianRat) -> GaussianRat:
        return GaussianRat(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __pow__(self, k: int) -> GaussianRat:
        if k < 0:
            raise ValueError("negative exponent")
        out = GaussianRat(1, 0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> GaussianRat:
        return GaussianRat(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def norm_sq(self) -> Rat:
        return self.re * self.re + self.im * self.im

    def times_i(self) -> GaussianRat:
        return GaussianRat(-self.im, self.re)

    def sort_key(self) -> tuple:
        return (self.re, self.im)

    def is_u_rational(self, bound: int) -> bool:
        return is_u_rational(self.re, bound) and is_u_rational(self.im, bound)

    def precision(self) -> int:
        return max(precision_of(self.re), precision_of(self.im))


GR_ZERO = GaussianRat(0, 0)
GR_ONE = GaussianRat(1, 0)
GR_I = GaussianRat(0, 1)


class Rat3:
    """Immutable 3D point/vector with exact rational coordinates."""

    __slots__ = ("x", "y", "z")

    def __init__(self, x: Rat | int | str = 0, y: Rat | int | str = 0, z: Rat | int | str = 0):
        object.__setattr__(self, "x", Fraction(x))
        object.__setattr__(self, "y", Fraction(y))
        object.__setattr__(self, "z", Fraction(z))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Rat3 is immutable")

    def __repr__(self) -> str:
        return f"Rat3({self.x!s}, {self.y!s}, {self.z!s})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Rat3)
            and self.x == other.x
            and self.y == other.y
            and self.z == other.z
        )

    def __hash__(self) -> int:
        return hash((self.x, self.y, self.z))

    def __add__(self, other: Rat3) -> Rat3:
        return Rat3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Rat3) -> Rat3:
        return Rat3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> Rat3:
        return Rat3(-self.x, -self.y, -self.z)

    def scale(self, c: Rat | int) -> Rat3:
        c = Fraction(c)
        return Rat3(self.x * c, self.y * c, self.z * c)

    def dot(self, other: Rat3) -> Rat:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: Rat3) -> Rat3:
        return Rat3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0 and self.z == 0

    def norm_sq(self) -> Rat:
        return self.dot(self)

    def coords(self) -> tuple[Rat, Rat, Rat]:
        return (self.x, self.y, self.z)

    def sort_key(self) -> tuple:
        return (self.x, self.y, self.z)

    def is_u_rational(self, bound: int) -> bool:
        return all(is_u_rational(c, bound) for c in self.coords())

    def precision(self) -> int:
        return max(precision_of(c) for c in self.coords())


R3_ZERO = Rat3(0, 0, 0)


def norm_sq(z: GaussianRat | Rat3) -> Rat:
    """Exact squared modulus / squared Euclidean norm."""
    return z.norm_sq()


def dist_sq(u: GaussianRat | Rat3, v: GaussianRat | Rat3) -> Rat:
    """Exact squared Euclidean distance between two points of the same kind."""
    return (u - v).norm_sq()


def solve_2x2(
    a1: Rat, a2: Rat, a3: Rat, a4: Rat, a5: Rat, a6: Rat
) -> tuple[Rat, Rat]:
    """Solve a1*x + a2*y = a5, a3*x + a4*y = a6 exactly.

    When the six coefficients are U-rational the solution components are
    4U^8-rational; that closure is asserted here because downstream
    reconstruction bounds rely on it.
    """
    det = a1 * a4 - a2 * a3
    if det == 0:
        raise SingularSystem("2x2 system has zero determinant")
    x = (a4 * a5 - a2 * a6) / det
    y = (a1 * a6 - a3 * a5) / det
    u_in = max(precision_of(a) for a in (a1, a2, a3, a4, a5, a6))
    u_out = 4 * u_in**8
    assert is_u_rational(x, u_out) and is_u_rational(y, u_out)
    return x, y


def recover_rotation(
    a1: GaussianRat, a2: GaussianRat, b1: GaussianRat, b2: GaussianRat
) -> Optional[tuple[GaussianRat, GaussianRat]]:
    """Recover the unique (rho, t) with |rho| = 1 and b_j = rho*a_j + t, if any.

    Requires a1 != a2.  Returns None when b1 = b2 or when the induced unit
    ratio fails |rho|^2 = 1 exactly (no rigid motion matches the two pairs).
    """
    if a1 == a2:
        raise ValueError("recover_rotation needs distinct source points")
    if b1 == b2:
        return None
    d = a2 - a1
    c = b2 - b1
    # [ -d2 d1 ; d1 d2 ] [ sin ; cos ] = [ c1 ; c2 ], determinant -(d1^2+d2^2) != 0
    sin_t, cos_t = solve_2x2(-d.im, d.re, d.re, d.im, c.re, c.im)
    rho = GaussianRat(cos_t, sin_t)
    if rho.norm_sq() != 1:
        return None
    t = b1 - rho * a1
    assert rho * a2 + t == b2
    return rho, t


def sqrt_in_qi(w: GaussianRat) -> list[GaussianRat]:
    """All z in Q[i] with z^2 = w (0, 1, or 2 roots)."""
    a, b = w.re, w.im
    if a == 0 and b == 0:
        return [GR_ZERO]
    if b == 0:
        if a > 0:
            x = rational_sqrt(a)
            return [GaussianRat(x, 0), GaussianRat(-x, 0)] if x is not None else []
        y = rational_sqrt(-a)
        return [GaussianRat(0, y), GaussianRat(0, -y)] if y is not None else []
    m = rational_sqrt(a * a + b * b)
    if m is None:
        return []
    x = rational_sqrt((a + m) / 2)
    if x is None or x == 0:
        return []
    y = b / (2 * x)
    root = GaussianRat(x, y)
    if root * root != w:
        return []
    return [root, -root]


def _fourth_roots_in_qi(w: GaussianRat) -> list[GaussianRat]:
    roots: list[GaussianRat] = []
    for r in sqrt_in_qi(w):
        roots.extend(sqrt_in_qi(r))
    return roots


def pow2root_in_qi(w: GaussianRat, j: int) -> list[GaussianRat]:
    """All z in Q[i] with z^(2^j) = w.

    For j >= 2 the result is empty or the full orbit {r, -r, ir, -ir} of a
    single root r, since the only roots of unity in Q[i] are {±1, ±i}.  The
    search reduces the exponent by a factor of four per step and keeps a
    single live branch, backtracking only across the at-most-four quartic
    roots at each level.
    """
    if j < 0:
        raise ValueError("exponent level must be >= 0")
    if j == 0:
        return [w]
    if w.is_zero():
        return [GR_ZERO]
    if j == 1:
        return sqrt_in_qi(w)
    for y in _fourth_roots_in_qi(w):
        partial = pow2root_in_qi(y, j - 2)
        if partial:
            r = partial[0]
            orbit = [r, -r, r.times_i(), -r.times_i()]
            return sorted(orbit, key=GaussianRat.sort_key)
    return []


def pythagorean_unit(t: Rat) -> GaussianRat:
    """Exact unit-modulus Gaussian rational ((t^2-1) + 2t*i) / (t^2+1)."""
    t = Fraction(t)
    den = t * t + 1
    rho = GaussianRat((t * t - 1) / den, 2 * t / den)
    assert rho.norm_sq() == 1
    return rho


def gaussian_sum(values: Iterable[GaussianRat]) -> GaussianRat:
    re = Fraction(0)
    im = Fraction(0)
    for v in values:
        re += v.re
        im += v.im
    return GaussianRat(re, im)
