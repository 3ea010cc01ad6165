"""Complex moments, exact and in F_p[i], plus the power-of-two moment sketch.

The load-bearing fact: a nonempty multiset of equal-modulus Gaussian
rationals has a nonzero moment M_{2^j} for some j no larger than the 2-adic
valuation of its size.  The sketch therefore tracks moments for
j = 0 .. floor(log2 n); the circle subset can have higher 2-adic valuation
than the full multiset, so floor(log2 n) is used rather than v2(n).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .field import FpiElem, fp_inv, fpi_zero, phi_p
from .rational import GaussianRat, Rat, dist_sq, gaussian_sum, pythagorean_unit
from .stream import InstanceHeader, PointRecord, bits_of_fp, bits_of_point


class BadPrimeSuspected(RuntimeError):
    """Algorithm state reachable only under a bad reduction prime."""


class NoWitness(AssertionError):
    """No nonzero power-of-two moment found; unreachable on valid input."""


def complex_moment(points: Sequence[GaussianRat], p: int, q: int) -> GaussianRat:
    """Order-(p, q) complex moment: sum of z^p * conj(z)^q over the multiset."""
    return gaussian_sum((z**p) * (z.conj() ** q) for z in points)


def cross_set(points: Sequence[GaussianRat]) -> list[GaussianRat]:
    """Multiset of pairwise products u_j * u_k over unordered index pairs j < k."""
    if len(points) < 2:
        raise ValueError("cross set needs at least 2 elements")
    out = []
    for j in range(len(points)):
        for k in range(j + 1, len(points)):
            out.append(points[j] * points[k])
    return out


def v2(n: int) -> int:
    """2-adic valuation of a positive integer."""
    if n <= 0:
        raise ValueError("v2 needs a positive integer")
    return (n & -n).bit_length() - 1


def nonzero_moment_witness(points: Sequence[GaussianRat]) -> int:
    """Smallest j with M_{2^j}(S) != 0, for a nonempty equal-modulus multiset.

    Guaranteed to exist with j <= v2(|S|); hitting NoWitness means the
    equal-modulus precondition was violated (or there is a genuine bug).
    """
    if not points:
        raise ValueError("empty multiset")
    ns = points[0].norm_sq()
    if any(z.norm_sq() != ns for z in points):
        raise ValueError("elements must share the same squared modulus")
    s = v2(len(points))
    power = [z for z in points]
    for j in range(s + 1):
        if not gaussian_sum(power).is_zero():
            return j
        power = [z * z for z in power]
    raise NoWitness(f"all moments M_(2^j) vanished for j <= {s}")


def equal_modulus_set(
    rng: random.Random,
    size: int,
    radius: Rat | int = 1,
    t_bound: int = 9,
) -> list[GaussianRat]:
    """Random multiset of ``size`` points sharing one exact squared modulus.

    Points are rational rotations of a common radius via the Pythagorean
    parametrization ((t^2-1) + 2t*i) / (t^2+1), so equal norms hold exactly.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    r = Fraction(radius)
    if r <= 0:
        raise ValueError("radius must be positive")
    scale = GaussianRat(r, 0)
    out = []
    for _ in range(size):
        t = Fraction(rng.randint(-t_bound, t_bound), rng.randint(1, t_bound))
        u = pythagorean_unit(t)
        if rng.random() < 0.5:
            u = u.conj()
        out.append(u * scale)
    return out


@dataclass
class ExactMomentSet:
    """Exact recentred moments of one labeled multiset (oracle-side)."""

    centroid: GaussianRat
    r_sq: Optional[Rat]  # None when every point equals the centroid
    moments: list[GaussianRat]  # M'_{2^j} for j = 0 .. J

    def min_nonzero_j(self) -> Optional[int]:
        for j, m in enumerate(self.moments):
            if not m.is_zero():
                return j
        return None


def exact_recentred_moments(
    points: Sequence[GaussianRat],
    j_max: int,
    r_sq: Optional[Rat] = None,
) -> ExactMomentSet:
    """Centroid, reference radius, and exact moments over the reference circle.

    When ``r_sq`` is None the radius comes from the first point at a nonzero
    distance from the centroid (stream order = sequence order).
    """
    if not points:
        raise ValueError("empty multiset")
    n = len(points)
    c = gaussian_sum(points)
    c = GaussianRat(c.re / n, c.im / n)
    if r_sq is None:
        for z in points:
            d = dist_sq(z, c)
            if d != 0:
                r_sq = d
                break
    moments = []
    if r_sq is not None:
        on_circle = [z - c for z in points if dist_sq(z, c) == r_sq]
        power = on_circle
        for _ in range(j_max + 1):
            moments.append(gaussian_sum(power))
            power = [w * w for w in power]
    else:
        moments = [GaussianRat(0, 0) for _ in range(j_max + 1)]
    return ExactMomentSet(centroid=c, r_sq=r_sq, moments=moments)


def reduced_abs_sq(u: FpiElem) -> int:
    """phi_p(|z|^2) computed from phi_p(z): re^2 + im^2 in F_p."""
    return u.norm()


def moment_count(n: int) -> int:
    """J = floor(log2 n); the sketch tracks J + 1 power-of-two moments."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n.bit_length() - 1


@dataclass
class MomentSketch:
    """Finite-field pass-2 state for a two-label stream.

    Holds per-label reduced centroids, the shared radius reference r*, and
    J+1 power-of-two moments per label, all in F_p[i].
    """

    p: int
    j_max: int
    c_hat: dict[str, FpiElem]
    r_star: Optional[int] = None
    z_star: Optional[PointRecord] = None
    moments: dict[str, list[FpiElem]] = field(default_factory=dict)

    def __post_init__(self):
        for label in ("A", "B"):
            self.moments.setdefault(
                label, [fpi_zero(self.p) for _ in range(self.j_max + 1)]
            )

    @property
    def degenerate(self) -> bool:
        return self.z_star is None

    def absorb(self, record: PointRecord) -> None:
        zhat = phi_p(record.value, self.p)
        u = zhat - self.c_hat[record.label]
        d = reduced_abs_sq(u)
        if self.r_star is None:
            if d == 0:
                return
            self.r_star = d
            self.z_star = record
        if d != self.r_star:
            return
        acc = self.moments[record.label]
        power = u
        for j in range(self.j_max + 1):
            acc[j] = acc[j] + power
            power = power * power

    def merge(self, other: MomentSketch) -> MomentSketch:
        """Componentwise addition; z* resolves to the earliest stream position.

        Shards must agree on the pass-1 centroids and on the radius
        reference (or one side must be degenerate), otherwise their moment
        filters were inconsistent and the merge is rejected.
        """
        if self.p != other.p or self.j_max != other.j_max or self.c_hat != other.c_hat:
            raise ValueError("sketches come from different runs")
        if (
            self.r_star is not None
            and other.r_star is not None
            and self.r_star != other.r_star
        ):
            raise ValueError("sketches disagree on the radius reference")
        z_star = self.z_star
        if z_star is None or (
            other.z_star is not None and other.z_star.position < z_star.position
        ):
            z_star = other.z_star
        merged = MomentSketch(
            p=self.p,
            j_max=self.j_max,
            c_hat=dict(self.c_hat),
            r_star=self.r_star if self.r_star is not None else other.r_star,
            z_star=z_star,
            moments={
                label: [
                    self.moments[label][j] + other.moments[label][j]
                    for j in range(self.j_max + 1)
                ]
                for label in ("A", "B")
            },
        )
        return merged

    def state_bits(self) -> int:
        bits = bits_of_fp(self.p, 4)  # two centroids
        bits += bits_of_fp(self.p, 1)  # r*
        bits += bits_of_fp(self.p, 4 * (self.j_max + 1))  # moments, both labels
        if self.z_star is not None:
            bits += bits_of_point(self.z_star.value)
        return bits


class CentroidPass:
    """Pass 1: reduced centroids phi_p(c_A), phi_p(c_B)."""

    def __init__(self, p: int, conjugate_a: bool = False):
        self.p = p
        self.conjugate_a = conjugate_a
        self.sums: dict[str, FpiElem] = {}
        self.counts: dict[str, int] = {"A": 0, "B": 0}
        self.centroids: dict[str, FpiElem] = {}

    def begin(self, header: InstanceHeader) -> None:
        self.sums = {"A": fpi_zero(self.p), "B": fpi_zero(self.p)}
        self.counts = {"A": 0, "B": 0}

    def update(self, record: PointRecord) -> None:
        value = record.value
        if self.conjugate_a and record.label == "A":
            value = value.conj()
        self.sums[record.label] = self.sums[record.label] + phi_p(value, self.p)
        self.counts[record.label] += 1

    def finish(self) -> None:
        for label in ("A", "B"):
            n = self.counts[label]
            if n == 0:
                self.centroids[label] = fpi_zero(self.p)
                continue
            if n % self.p == 0:
                raise ZeroDivisionError("p divides the multiset size")
            ninv = fp_inv(n % self.p, self.p)
            s = self.sums[label]
            self.centroids[label] = FpiElem(s.re * ninv, s.im * ninv, self.p)

    def state_bits(self) -> int:
        return bits_of_fp(self.p, 4)


class MomentPass:
    """Pass 2: radius reference, z*, and power-of-two finite-field moments."""

    def __init__(self, p: int, j_max: int, centroid_pass: CentroidPass):
        self.p = p
        self.j_max = j_max
        self._centroid_pass = centroid_pass
        self.conjugate_a = centroid_pass.conjugate_a
        self.sketch: Optional[MomentSketch] = None

    def begin(self, header: InstanceHeader) -> None:
        self.sketch = MomentSketch(
            p=self.p, j_max=self.j_max, c_hat=dict(self._centroid_pass.centroids)
        )

    def update(self, record: PointRecord) -> None:
        assert self.sketch is not None
        if self.conjugate_a and record.label == "A":
            record = PointRecord(
                label=record.label, value=record.value.conj(), position=record.position
            )
        self.sketch.absorb(record)

    def finish(self) -> None:
        pass

    def state_bits(self) -> int:
        return self.sketch.state_bits() if self.sketch is not None else 0
