"""Six-pass streaming congruence identification for 3D rational multisets.

Anchor triples are built per set: the first reference point comes from a
case split on the reduced-distance sphere around the implicit centroid; the
second and third come from birthday-paradox sampling on exact spheres
around the (explicit, rational) first anchor.  Matching triples across the
two sets are verified by Karp-Rabin fingerprints of per-point distance and
orientation tuples, and the rigid motion is recovered from the matched
frames by an exact linear solve.

Sphere radii for the sampling stages are the minimum realized squared
distances (maintained with resettable accumulators), which makes every
selection canonical under congruence regardless of stream order.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .field import UndefinedUnderPhi, fp_inv, phi_p_rat, sample_prime
from .fingerprint import KRState, choose_q, code_rat
from .moments import BadPrimeSuspected
from .rational import Rat, Rat3, dist_sq
from .stream import (
    CombinedPass,
    InstanceHeader,
    PointRecord,
    StreamSource,
    bits_of_fp,
    bits_of_point,
    bits_of_rat,
    pass_driver,
)

VERDICT_CONGRUENT = "congruent"
VERDICT_NOT_CONGRUENT = "not-congruent"
VERDICT_BAD_PRIME = "bad-prime-suspected"

Mat3 = tuple[tuple[Rat, Rat, Rat], ...]


class SamplerExhausted(RuntimeError):
    """Candidate generation exceeded its configured budget."""


class DegenerateFrame(ValueError):
    """Anchor triple does not span a usable frame."""


class NotOrthogonal(ValueError):
    """Recovered linear map failed the exact orthogonality check."""


def full_delta3(u: int, n: int) -> int:
    """Prime-range base: comfortably more primes than bad ones, poly(n, log U)."""
    return 2**16 * n**3 * max(1, u.bit_length())


def sample_budget_v2(n: int) -> int:
    s = math.isqrt(3 * n)
    if s * s < 3 * n:
        s += 1
    return 80 * s


def icbrt_ceil(n: int) -> int:
    c = round(n ** (1.0 / 3.0))
    while c**3 < n:
        c += 1
    while c > 1 and (c - 1) ** 3 >= n:
        c -= 1
    return c


def sample_budget_v3(n: int) -> int:
    return 80 * icbrt_ceil(n)


def slice_cap(n: int) -> int:
    return icbrt_ceil(n)


def sparse_threshold(n: int) -> int:
    """Largest integer count still considered sparse: floor(n^(2/3))."""
    t = int(round(n ** (2.0 / 3.0)))
    while (t + 1) ** 3 <= n * n:
        t += 1
    while t**3 > n * n:
        t -= 1
    return t


# --- exact 3x3 linear algebra -------------------------------------------------


def mat_identity() -> Mat3:
    one, zero = Fraction(1), Fraction(0)
    return (
        (one, zero, zero),
        (zero, one, zero),
        (zero, zero, one),
    )


def mat_vec(m: Mat3, v: Rat3) -> Rat3:
    c = v.coords()
    return Rat3(
        sum(m[0][k] * c[k] for k in range(3)),
        sum(m[1][k] * c[k] for k in range(3)),
        sum(m[2][k] * c[k] for k in range(3)),
    )


def mat_mul(a: Mat3, b: Mat3) -> Mat3:
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3))
        for i in range(3)
    )


def mat_transpose(m: Mat3) -> Mat3:
    return tuple(tuple(m[j][i] for j in range(3)) for i in range(3))


def mat_det(m: Mat3) -> Rat:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def mat_from_columns(c1: Rat3, c2: Rat3, c3: Rat3) -> Mat3:
    return (
        (c1.x, c2.x, c3.x),
        (c1.y, c2.y, c3.y),
        (c1.z, c2.z, c3.z),
    )


def mat_inv(m: Mat3) -> Mat3:
    det = mat_det(m)
    if det == 0:
        raise SingularMatrix("matrix is singular")
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            minor = (
                m[rows[0]][cols[0]] * m[rows[1]][cols[1]]
                - m[rows[0]][cols[1]] * m[rows[1]][cols[0]]
            )
            cof[i][j] = (-1) ** (i + j) * minor
    return tuple(tuple(cof[j][i] / det for j in range(3)) for i in range(3))


class SingularMatrix(ValueError):
    pass


def solve_3x3(m: Mat3, b: Rat3) -> Rat3:
    """Cramer's rule on an exact 3x3 system."""
    det = mat_det(m)
    if det == 0:
        raise SingularMatrix("3x3 system has zero determinant")
    cols = [Rat3(m[0][j], m[1][j], m[2][j]) for j in range(3)]
    out = []
    for j in range(3):
        replaced = cols[:j] + [b] + cols[j + 1 :]
        out.append(mat_det(mat_from_columns(*replaced)) / det)
    return Rat3(*out)


def mat_is_rotation(m: Mat3) -> bool:
    return mat_mul(mat_transpose(m), m) == mat_identity() and mat_det(m) == 1


def householder(w: Rat3) -> Mat3:
    """Reflection I - 2*w*w^T / (w.w); exact and orthogonal for rational w."""
    ww = w.norm_sq()
    if ww == 0:
        raise DegenerateFrame("zero reflection axis")
    c = w.coords()
    return tuple(
        tuple(
            (Fraction(1) if i == j else Fraction(0)) - 2 * c[i] * c[j] / ww
            for j in range(3)
        )
        for i in range(3)
    )


def circumcenter_coplanar(a: Rat3, b: Rat3, c: Rat3) -> Rat3:
    """Center of the circle through three non-collinear points."""
    nvec = (b - a).cross(c - a)
    if nvec.is_zero():
        raise DegenerateFrame("collinear points have no circumcircle")
    m: Mat3 = (
        tuple((b - a).scale(2).coords()),
        tuple((c - a).scale(2).coords()),
        tuple(nvec.coords()),
    )
    rhs = Rat3(
        b.norm_sq() - a.norm_sq(),
        c.norm_sq() - a.norm_sq(),
        nvec.dot(a),
    )
    o = solve_3x3(m, rhs)
    assert dist_sq(o, a) == dist_sq(o, b) == dist_sq(o, c)
    return o


def circumcenter_sphere(a: Rat3, b: Rat3, c: Rat3, d: Rat3) -> Rat3:
    """Center of the sphere through four non-coplanar points (Cramer solve)."""
    m: Mat3 = (
        tuple((b - a).coords()),
        tuple((c - a).coords()),
        tuple((d - a).coords()),
    )
    rhs = Rat3(
        (b.norm_sq() - a.norm_sq()) / 2,
        (c.norm_sq() - a.norm_sq()) / 2,
        (d.norm_sq() - a.norm_sq()) / 2,
    )
    o = solve_3x3(m, rhs)
    assert dist_sq(o, a) == dist_sq(o, b) == dist_sq(o, c) == dist_sq(o, d)
    return o


def canonical_orthogonal(d: Rat3) -> Rat3:
    """A deterministic nonzero rational vector orthogonal to d != 0."""
    for axis in (Rat3(1, 0, 0), Rat3(0, 1, 0), Rat3(0, 0, 1)):
        u = d.cross(axis)
        if not u.is_zero():
            return u
    raise DegenerateFrame("zero direction vector")


@dataclass(frozen=True)
class TripleCandidate:
    v1: Rat3
    v2: Rat3
    v3: Rat3
    collinear: bool
    provenance: str  # "a", "b", "c" for v1, plus the slice key for v3

    def sort_key(self):
        return self.v1.sort_key() + self.v2.sort_key() + self.v3.sort_key()

    def frame_lengths(self) -> tuple[Rat, Rat, Rat]:
        return (
            dist_sq(self.v1, self.v2),
            dist_sq(self.v1, self.v3),
            dist_sq(self.v2, self.v3),
        )


def triples_compatible(ta: TripleCandidate, tb: TripleCandidate) -> bool:
    if ta.collinear != tb.collinear:
        return False
    if ta.collinear:
        return dist_sq(ta.v1, ta.v2) == dist_sq(tb.v1, tb.v2)
    return ta.frame_lengths() == tb.frame_lengths()


def recover_rigid(ta: TripleCandidate, tb: TripleCandidate) -> tuple[Mat3, Rat3]:
    """Exact rotation and translation mapping triple A onto triple B.

    For non-collinear triples with equal pairwise distances the frame solve
    always yields a proper rotation; for collinear (degenerate) triples the
    map is assembled from at most two Householder reflections, which leaves
    the line's pointwise geometry intact.
    """
    if ta.collinear != tb.collinear:
        raise DegenerateFrame("mixed collinearity flags")
    if ta.collinear:
        da, db = ta.v2 - ta.v1, tb.v2 - tb.v1
        if da.norm_sq() != db.norm_sq():
            raise DegenerateFrame("mismatched segment lengths")
        if da == db:
            rot = mat_identity()
        else:
            flip = householder(da - db)
            fix = householder(canonical_orthogonal(db))
            rot = mat_mul(fix, flip)
        if mat_vec(rot, da) != db:
            raise NotOrthogonal("reflection composition failed to align the line")
    else:
        u1, u2 = ta.v2 - ta.v1, ta.v3 - ta.v1
        w1, w2 = tb.v2 - tb.v1, tb.v3 - tb.v1
        u3, w3 = u1.cross(u2), w1.cross(w2)
        if u3.is_zero() or w3.is_zero():
            raise DegenerateFrame("collinear triple without degenerate flag")
        try:
            rot = mat_mul(mat_from_columns(w1, w2, w3), mat_inv(mat_from_columns(u1, u2, u3)))
        except SingularMatrix as exc:
            raise DegenerateFrame(str(exc)) from None
    if not mat_is_rotation(rot):
        raise NotOrthogonal("map is not a proper rotation")
    t = tb.v1 - mat_vec(rot, ta.v1)
    return rot, t


# --- distinct-value sampling ---------------------------------------------------


def _value_key(seed: bytes, value: Rat3) -> int:
    blob = repr(value.coords()).encode()
    return int.from_bytes(hashlib.sha256(seed + blob).digest(), "big")


class BottomKSampler:
    """Uniform sample of up to k distinct values: keep the k smallest seeded hashes."""

    def __init__(self, k: int, seed: bytes):
        if k < 1:
            raise ValueError("sample size must be >= 1")
        self.k = k
        self.seed = seed
        self.entries: dict[Rat3, int] = {}

    def offer(self, value: Rat3) -> None:
        if value in self.entries:
            return
        key = _value_key(self.seed, value)
        self.entries[value] = key
        if len(self.entries) > self.k:
            worst = max(self.entries, key=lambda v: self.entries[v])
            del self.entries[worst]

    def values(self) -> list[Rat3]:
        return sorted(self.entries, key=lambda v: self.entries[v])

    def clear(self) -> None:
        self.entries = {}

    def state_bits(self) -> int:
        return sum(bits_of_point(v) + 256 for v in self.entries)


class MinSphereSampler:
    """Bottom-k sample of distinct values at the minimum realized distance.

    The filter evolves: a strictly smaller distance resets the reservoir, so
    the final sample covers exactly the minimum-distance sphere, which is a
    canonical (order-free) choice.
    """

    def __init__(self, center: Rat3, k: int, seed: bytes):
        self.center = center
        self.sampler = BottomKSampler(k, seed)
        self.min_dist: Optional[Rat] = None

    def offer(self, value: Rat3) -> None:
        if value == self.center:
            return
        d = dist_sq(value, self.center)
        if self.min_dist is None or d < self.min_dist:
            self.min_dist = d
            self.sampler.clear()
        if d == self.min_dist:
            self.sampler.offer(value)

    def values(self) -> list[Rat3]:
        return self.sampler.values()

    def state_bits(self) -> int:
        bits = self.sampler.state_bits()
        if self.min_dist is not None:
            bits += bits_of_rat(self.min_dist)
        return bits


class SliceCounter:
    """Per-(v1, v2) slice occupancy over the minimum non-collinear sphere.

    Tracks multiset counts for the nearest ``cap`` slice keys (inner products
    against v2 - v1), with points on the line through v1, v2 excluded.  A
    strictly smaller sphere radius resets all counters.
    """

    def __init__(self, v1: Rat3, v2: Rat3, n: int):
        self.v1 = v1
        self.v2 = v2
        self.direction = v2 - v1
        self.cap = slice_cap(n)
        self.threshold = sparse_threshold(n)
        self.min_dist: Optional[Rat] = None
        self.counts: dict[Rat, int] = {}
        self.sphere_count = 0

    @staticmethod
    def rank(kappa: Rat) -> tuple[Rat, int]:
        return (abs(kappa), 0 if kappa >= 0 else 1)

    def offer(self, value: Rat3) -> None:
        rel = value - self.v1
        if self.direction.cross(rel).is_zero():
            return
        d = rel.norm_sq()
        if self.min_dist is None or d < self.min_dist:
            self.min_dist = d
            self.counts = {}
            self.sphere_count = 0
        if d != self.min_dist:
            return
        self.sphere_count += 1
        kappa = self.direction.dot(rel)
        if kappa in self.counts:
            self.counts[kappa] += 1
            return
        if len(self.counts) < self.cap:
            self.counts[kappa] = 1
            return
        worst = max(self.counts, key=self.rank)
        if self.rank(kappa) < self.rank(worst):
            del self.counts[worst]
            self.counts[kappa] = 1

    def select(self) -> Optional[Rat]:
        """Nearest tracked sparse slice key, or None (candidate pair discarded)."""
        dense = sum(1 for c in self.counts.values() if c > self.threshold)
        assert dense * (self.threshold + 1) <= max(self.sphere_count, 1)
        for kappa in sorted(self.counts, key=self.rank):
            if self.counts[kappa] <= self.threshold:
                return kappa
        return None

    def state_bits(self) -> int:
        bits = sum(bits_of_rat(k) + 32 for k in self.counts)
        if self.min_dist is not None:
            bits += bits_of_rat(self.min_dist)
        return bits


# --- six-pass pipeline ----------------------------------------------------------


@dataclass(frozen=True)
class Config3:
    mode: str = "full"
    delta: Optional[int] = None
    seed: int = 0
    allow_reflection: bool = False
    retry_bad_prime: int = 0

    def __post_init__(self):
        if self.mode not in ("full", "fast"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "fast" and self.delta is None:
            raise ValueError("fast mode needs an explicit delta")


@dataclass
class Result3:
    verdict: str
    rotation: Optional[Mat3] = None
    translation: Optional[Rat3] = None
    reflected: bool = False
    prime: Optional[int] = None
    fingerprint_prime: Optional[int] = None
    passes: int = 0
    peak_sketch_bits: int = 0
    triple_counts: dict = field(default_factory=dict)
    matched_pairs: int = 0
    runs: int = 1


def _child_seed(*parts) -> bytes:
    return hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()


def _reflect_a(record: PointRecord) -> PointRecord:
    if record.label != "A":
        return record
    v = record.value
    return PointRecord(label="A", value=Rat3(-v.x, v.y, v.z), position=record.position)


class ReflectAWrapper:
    """Feed a pipeline the stream with set A reflected through x -> -x."""

    def __init__(self, inner):
        self.inner = inner

    def begin(self, header: InstanceHeader) -> None:
        self.inner.begin(header)

    def update(self, record: PointRecord) -> None:
        self.inner.update(_reflect_a(record))

    def finish(self) -> None:
        self.inner.finish()

    def state_bits(self) -> int:
        return self.inner.state_bits()


class Centroid3Pass:
    """Pass 1: reduced centroids (three F_p registers per label) and
    single-value detection."""

    def __init__(self, p: int):
        self.p = p
        self.sums = {"A": [0, 0, 0], "B": [0, 0, 0]}
        self.counts = {"A": 0, "B": 0}
        self.first_value: dict[str, Optional[Rat3]] = {"A": None, "B": None}
        self.uniform = {"A": True, "B": True}
        self.centroids: dict[str, tuple[int, int, int]] = {}

    def begin(self, header: InstanceHeader) -> None:
        pass

    def update(self, record: PointRecord) -> None:
        label, v = record.label, record.value
        acc = self.sums[label]
        for i, c in enumerate(v.coords()):
            acc[i] = (acc[i] + phi_p_rat(c, self.p)) % self.p
        self.counts[label] += 1
        if self.first_value[label] is None:
            self.first_value[label] = v
        elif v != self.first_value[label]:
            self.uniform[label] = False

    def finish(self) -> None:
        for label in ("A", "B"):
            n = self.counts[label]
            if n == 0:
                self.centroids[label] = (0, 0, 0)
                continue
            if n % self.p == 0:
                raise ZeroDivisionError("p divides the multiset size")
            ninv = fp_inv(n % self.p, self.p)
            self.centroids[label] = tuple(c * ninv % self.p for c in self.sums[label])

    @property
    def degenerate_instance(self) -> bool:
        return self.uniform["A"] and self.uniform["B"]

    def state_bits(self) -> int:
        bits = bits_of_fp(self.p, 6)
        for v in self.first_value.values():
            if v is not None:
                bits += bits_of_point(v)
        return bits


class _CaseSplitState:
    """O(1) witnesses for the centroid-sphere case split of one label."""

    def __init__(self):
        self.first_distinct: list[Rat3] = []
        self.more_than_four = False
        self.w3: Optional[Rat3] = None
        self.w4: Optional[Rat3] = None

    def offer(self, v: Rat3) -> None:
        fd = self.first_distinct
        if v not in fd:
            if len(fd) < 4:
                fd.append(v)
            else:
                self.more_than_four = True
        if len(fd) >= 2:
            w1, w2 = fd[0], fd[1]
            if self.w3 is None:
                if not (w2 - w1).cross(v - w1).is_zero():
                    self.w3 = v
            elif self.w4 is None:
                if (v - w1).dot((w2 - w1).cross(self.w3 - w1)) != 0:
                    self.w4 = v

    def candidates(self) -> list[tuple[Rat3, str]]:
        fd = self.first_distinct
        if not fd:
            return []
        if not self.more_than_four and len(fd) <= 3:
            return [(v, "a") for v in fd]
        if self.w3 is None:
            raise BadPrimeSuspected("four collinear points on a reduced sphere")
        if self.w4 is None:
            return [(circumcenter_coplanar(fd[0], fd[1], self.w3), "b")]
        return [(circumcenter_sphere(fd[0], fd[1], self.w3, self.w4), "c")]

    def state_bits(self) -> int:
        pts = list(self.first_distinct)
        pts += [w for w in (self.w3, self.w4) if w is not None]
        return sum(bits_of_point(v) for v in pts) + 2


class CaseSplit3Pass:
    """Pass 2: fix the reduced radius at the first nonzero reduced distance
    (shared across labels) and collect case-split witnesses per label."""

    def __init__(self, p: int, centroid_pass: Centroid3Pass):
        self.p = p
        self._centroid_pass = centroid_pass
        self.r_star: Optional[int] = None
        self.states = {"A": _CaseSplitState(), "B": _CaseSplitState()}
        self.v1_candidates: dict[str, list[tuple[Rat3, str]]] = {"A": [], "B": []}
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._centroid_pass.degenerate_instance

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        label, v = record.label, record.value
        chat = self._centroid_pass.centroids[label]
        d = 0
        for i, c in enumerate(v.coords()):
            diff = (phi_p_rat(c, self.p) - chat[i]) % self.p
            d = (d + diff * diff) % self.p
        if self.r_star is None:
            if d == 0:
                return
            self.r_star = d
        if d == self.r_star:
            self.states[label].offer(v)

    def finish(self) -> None:
        if self.skip:
            return
        if self.r_star is None:
            raise BadPrimeSuspected("no nonzero reduced distance on a non-uniform stream")
        for label in ("A", "B"):
            cands = self.states[label].candidates()
            if len(cands) > 4:
                raise SamplerExhausted("more centroid-sphere candidates than possible")
            self.v1_candidates[label] = cands

    def state_bits(self) -> int:
        bits = bits_of_fp(self.p, 1)
        for st in self.states.values():
            bits += st.state_bits()
        return bits


class V2SamplePass:
    """Pass 3: per first-anchor bottom-k sample of the minimum-distance sphere."""

    def __init__(self, case_pass: CaseSplit3Pass, seed_salt: int):
        self._case_pass = case_pass
        self.seed_salt = seed_salt
        self.samplers: dict[tuple[str, Rat3], MinSphereSampler] = {}
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._case_pass.skip
        if self.skip:
            return
        k2 = sample_budget_v2(header.n_a)
        for label in ("A", "B"):
            for v1, _prov in self._case_pass.v1_candidates[label]:
                seed = _child_seed(self.seed_salt, "v2", label, v1.coords())
                self.samplers[(label, v1)] = MinSphereSampler(v1, k2, seed)

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        for (label, _v1), sampler in self.samplers.items():
            if label == record.label:
                sampler.offer(record.value)

    def finish(self) -> None:
        pass

    def state_bits(self) -> int:
        return sum(s.state_bits() for s in self.samplers.values())


class SlicePass:
    """Pass 4: slice occupancy counters for every (v1, v2) candidate pair."""

    def __init__(self, v2_pass: V2SamplePass):
        self._v2_pass = v2_pass
        self.counters: dict[tuple[str, Rat3, Rat3], SliceCounter] = {}
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._v2_pass.skip
        if self.skip:
            return
        n = header.n_a
        for (label, v1), sampler in self._v2_pass.samplers.items():
            for v2 in sampler.values():
                self.counters[(label, v1, v2)] = SliceCounter(v1, v2, n)

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        for (label, _v1, _v2), counter in self.counters.items():
            if label == record.label:
                counter.offer(record.value)

    def finish(self) -> None:
        pass

    def state_bits(self) -> int:
        return sum(c.state_bits() for c in self.counters.values())


class V3SamplePass:
    """Pass 5: sample the selected sparse slice of each surviving pair."""

    def __init__(self, slice_pass: SlicePass, seed_salt: int):
        self._slice_pass = slice_pass
        self.seed_salt = seed_salt
        # (label, v1, v2) -> ("slice", kappa, sampler) | ("line",) | ("discard",)
        self.plans: dict[tuple[str, Rat3, Rat3], tuple] = {}
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._slice_pass.skip
        if self.skip:
            return
        k3 = sample_budget_v3(header.n_a)
        for key, counter in self._slice_pass.counters.items():
            if counter.min_dist is None:
                self.plans[key] = ("line",)
                continue
            kappa = counter.select()
            if kappa is None:
                self.plans[key] = ("discard",)
                continue
            seed = _child_seed(
                self.seed_salt, "v3", key[0], key[1].coords(), key[2].coords()
            )
            self.plans[key] = ("slice", kappa, BottomKSampler(k3, seed))

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        v = record.value
        for (label, v1, v2), plan in self.plans.items():
            if label != record.label or plan[0] != "slice":
                continue
            kappa, sampler = plan[1], plan[2]
            counter = self._slice_pass.counters[(label, v1, v2)]
            rel = v - v1
            if (v2 - v1).cross(rel).is_zero():
                continue
            if rel.norm_sq() != counter.min_dist:
                continue
            if (v2 - v1).dot(rel) != kappa:
                continue
            sampler.offer(v)

    def finish(self) -> None:
        pass

    def state_bits(self) -> int:
        bits = 0
        for plan in self.plans.values():
            if plan[0] == "slice":
                bits += plan[2].state_bits() + bits_of_rat(plan[1])
        return bits


def _theta_precision_bound(u: int, triples: Sequence[TripleCandidate]) -> int:
    w = u
    for t in triples:
        for anchor in (t.v1, t.v2, t.v3):
            w = max(w, anchor.precision())
    return 3 * (2 * u * w) ** 6


class ThetaPass:
    """Pass 6: per-triple Karp-Rabin fingerprints of distance/orientation tuples."""

    def __init__(self, v3_pass: V3SamplePass, rng: random.Random, u: int):
        self._v3_pass = v3_pass
        self._rng = rng
        self.u = u
        self.skip = False
        self.triples: dict[str, list[TripleCandidate]] = {"A": [], "B": []}
        self.matched: list[tuple[TripleCandidate, TripleCandidate]] = []
        self.accs: dict[tuple[str, TripleCandidate], KRState] = {}
        self.normals: dict[tuple[str, TripleCandidate], Rat3] = {}
        self.v_bound = 1
        self.idx_span = 1
        self.q3: Optional[int] = None
        self.survivor: Optional[tuple[TripleCandidate, TripleCandidate, Mat3, Rat3]] = None

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._v3_pass.skip
        if self.skip:
            return
        case_pass = self._v3_pass._slice_pass._v2_pass._case_pass
        prov = {
            (label, v1): pr
            for label in ("A", "B")
            for v1, pr in case_pass.v1_candidates[label]
        }
        seen: dict[str, set] = {"A": set(), "B": set()}
        for (label, v1, v2), plan in self._v3_pass.plans.items():
            if plan[0] == "discard":
                continue
            if plan[0] == "line":
                v3 = v1 + canonical_orthogonal(v2 - v1)
                cands = [
                    TripleCandidate(v1, v2, v3, True, f"{prov[(label, v1)]}|line")
                ]
            else:
                kappa, sampler = plan[1], plan[2]
                cands = [
                    TripleCandidate(
                        v1, v2, v3, False, f"{prov[(label, v1)]}|k={kappa}"
                    )
                    for v3 in sampler.values()
                ]
            for cand in cands:
                key = (cand.v1, cand.v2, cand.v3, cand.collinear)
                if key not in seen[label]:
                    seen[label].add(key)
                    self.triples[label].append(cand)
        self.matched = [
            (ta, tb)
            for ta in self.triples["A"]
            for tb in self.triples["B"]
            if triples_compatible(ta, tb)
        ]
        self.matched.sort(key=lambda pr: pr[0].sort_key() + pr[1].sort_key())
        needed = {
            "A": {ta for ta, _ in self.matched},
            "B": {tb for _, tb in self.matched},
        }
        active = [
            (label, t) for label in ("A", "B") for t in needed[label]
        ]
        if not active:
            return
        self.v_bound = _theta_precision_bound(self.u, [t for _, t in active])
        k = (2 * self.v_bound + 1) * self.v_bound
        self.idx_span = k
        idx_max = 3 * k**3
        n = header.n_a
        self.q3 = choose_q(16 * n * idx_max, 32 * n * idx_max, self._rng)
        base = self._rng.randrange(self.q3)
        for label, t in active:
            self.accs[(label, t)] = KRState(self.q3, base)
            if not t.collinear:
                self.normals[(label, t)] = (t.v2 - t.v1).cross(t.v3 - t.v1)

    def _theta_idx(self, label: str, t: TripleCandidate, v: Rat3) -> int:
        d1 = dist_sq(v, t.v1)
        d2 = dist_sq(v, t.v2)
        if t.collinear:
            d3, sigma = Fraction(0), 0
        else:
            d3 = dist_sq(v, t.v3)
            mixed = (v - t.v1).dot(self.normals[(label, t)])
            sigma = 0 if mixed == 0 else (1 if mixed > 0 else -1)
        k = self.idx_span
        code = (
            code_rat(d1, self.v_bound) * k + code_rat(d2, self.v_bound)
        ) * k + code_rat(d3, self.v_bound)
        return code * 3 + (sigma + 1) + 1

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        for (label, t), acc in self.accs.items():
            if label == record.label:
                acc.feed(self._theta_idx(label, t, record.value))

    def finish(self) -> None:
        if self.skip:
            return
        for ta, tb in self.matched:
            if self.accs[("A", ta)].value() != self.accs[("B", tb)].value():
                continue
            try:
                rot, t = recover_rigid(ta, tb)
            except (DegenerateFrame, NotOrthogonal):
                continue
            self.survivor = (ta, tb, rot, t)
            return

    def state_bits(self) -> int:
        bits = 0
        for (_label, t), acc in self.accs.items():
            bits += acc.state_bits()
            bits += sum(bits_of_point(v) for v in (t.v1, t.v2, t.v3))
        return bits


def run3d(source: StreamSource, config: Config3) -> Result3:
    header = source.header
    if header.dim != 3 or header.single_set:
        raise ValueError("run3d needs a two-set 3D stream")
    if header.n_a < 1:
        raise ValueError("empty instance")
    if header.n_a != header.n_b:
        return Result3(verdict=VERDICT_NOT_CONGRUENT, passes=0)
    rng = random.Random(config.seed)
    attempts = 1 + max(0, config.retry_bad_prime)
    result = Result3(verdict=VERDICT_BAD_PRIME)
    for attempt in range(attempts):
        result = _run3d_once(source, config, rng)
        result.runs = attempt + 1
        if result.verdict != VERDICT_BAD_PRIME:
            break
    return result


def _run3d_once(source: StreamSource, config: Config3, rng: random.Random) -> Result3:
    header = source.header
    u, n = header.u, header.n_a
    delta = full_delta3(u, n) if config.mode == "full" else config.delta
    prime = sample_prime(delta, 3, 4, rng)
    p = prime.p
    seed_salt = rng.getrandbits(64)

    branches = [False] + ([True] if config.allow_reflection else [])
    pipelines = []
    for reflected in branches:
        cp = Centroid3Pass(p)
        sp = CaseSplit3Pass(p, cp)
        v2p = V2SamplePass(sp, seed_salt + (1 if reflected else 0))
        slp = SlicePass(v2p)
        v3p = V3SamplePass(slp, seed_salt + (1 if reflected else 0))
        tp = ThetaPass(v3p, rng, u)
        stages = [cp, sp, v2p, slp, v3p, tp]
        if reflected:
            stages = [ReflectAWrapper(s) for s in stages]
        pipelines.append((reflected, cp, tp, stages))

    handlers = [
        CombinedPass([pipe[3][i] for pipe in pipelines]) for i in range(6)
    ]
    try:
        stats = pass_driver(source, handlers)
    except (UndefinedUnderPhi, ZeroDivisionError, BadPrimeSuspected):
        return Result3(verdict=VERDICT_BAD_PRIME, prime=p, passes=source.passes)

    result = Result3(
        verdict=VERDICT_NOT_CONGRUENT,
        prime=p,
        passes=stats.passes,
        peak_sketch_bits=stats.peak_sketch_bits,
    )
    for reflected, cp, tp, _stages in pipelines:
        if cp.degenerate_instance:
            v_a, v_b = cp.first_value["A"], cp.first_value["B"]
            assert v_a is not None and v_b is not None
            result.verdict = VERDICT_CONGRUENT
            result.rotation = mat_identity()
            result.translation = v_b - v_a
            result.reflected = False
            break
        result.triple_counts[("reflected" if reflected else "plain")] = {
            "A": len(tp.triples["A"]),
            "B": len(tp.triples["B"]),
        }
        result.matched_pairs += len(tp.matched)
        if tp.q3 is not None:
            result.fingerprint_prime = tp.q3
        if tp.survivor is not None and result.verdict != VERDICT_CONGRUENT:
            _ta, _tb, rot, t = tp.survivor
            if reflected:
                reflect = (
                    (Fraction(-1), Fraction(0), Fraction(0)),
                    (Fraction(0), Fraction(1), Fraction(0)),
                    (Fraction(0), Fraction(0), Fraction(1)),
                )
                rot = mat_mul(rot, reflect)
            result.verdict = VERDICT_CONGRUENT
            result.rotation = rot
            result.translation = t
            result.reflected = reflected
    return result
