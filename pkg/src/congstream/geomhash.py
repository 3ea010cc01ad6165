"""Six-pass geometric signatures and the multi-set congruence hash.

Every choice in the signature pipeline is canonical (invariant under rigid
motions of the input), so congruent sets produce bit-identical signatures
under a good prime: the radius pair (r, r') comes from minima of reduced
distances viewed as integers in [1, p-1], the moment index is the first
nonzero power-of-two moment, anchors satisfy the double radius condition,
and the final value is the lexicographic minimum over ordered anchor pairs
of (squared pair length, fingerprint).

All parallel executions share one (p, q, base) triple so signatures are
comparable offline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .field import FpiElem, UndefinedUnderPhi, fp_inv, phi_p, sample_prime
from .fingerprint import KRState, choose_q, derive_base, idx_gamma
from .moments import BadPrimeSuspected, moment_count, reduced_abs_sq
from .rational import GaussianRat, Rat, dist_sq
from .stream import (
    CombinedPass,
    InstanceHeader,
    PointRecord,
    StreamSource,
    bits_of_fp,
    bits_of_point,
    pass_driver,
)

VERDICT_OK = "ok"
VERDICT_BAD_PRIME = "bad-prime-suspected"

ANCHOR_LIMIT = 64


class EmptyDistanceSet(BadPrimeSuspected):
    """Every reduced distance hashed to zero on a non-degenerate set."""


def full_delta_sign(u: int, n: int, m: int) -> int:
    return 2**87 * u**128 * n**6 * m**3


def gamma_bound(u: int) -> int:
    """Precision class of the anchor-distance domain fed to idx_gamma."""
    return 2**11 * u**16


def second_min(values: Iterable[int]) -> tuple[int, int]:
    """Two smallest distinct values under the integer order on [1, p-1].

    With a single distinct value v the result degenerates to (v, v).
    """
    m1: Optional[int] = None
    m2: Optional[int] = None
    for v in values:
        if v == 0:
            raise ValueError("zero is excluded from the distance set")
        if m1 is None or v < m1:
            if m1 is not None and m1 != v:
                m2 = m1 if m2 is None or m1 < m2 else m2
            m1 = v
        elif v != m1 and (m2 is None or v < m2):
            m2 = v
    if m1 is None:
        raise EmptyDistanceSet("empty distance set")
    return (m1, m2 if m2 is not None else m1)


@dataclass(frozen=True)
class SharedRandomness:
    """Broadcast randomness shared by all parallel signature executions."""

    p: int
    q: int
    base_seed: int
    base: int
    u: int
    n: int
    m: int

    @property
    def w_bound(self) -> int:
        return gamma_bound(self.u)

    @property
    def len_field_bits(self) -> int:
        return (2 * self.w_bound * self.w_bound).bit_length()

    @property
    def fp_field_bits(self) -> int:
        return (self.q - 1).bit_length()

    @property
    def signature_bits(self) -> int:
        return 2 * self.len_field_bits + self.fp_field_bits

    @property
    def signature_hex_len(self) -> int:
        return (self.signature_bits + 3) // 4


@dataclass(frozen=True)
class Signature:
    encoded: str  # fixed-length hex; the comparable form
    len_sq: Optional[Rat]
    fp: Optional[int]
    degenerate: bool


def make_shared(
    u: int, n: int, m: int, seed: int, mode: str = "full", delta: Optional[int] = None
) -> SharedRandomness:
    rng = random.Random(seed)
    if mode == "full":
        d = full_delta_sign(u, n, m)
    else:
        if delta is None:
            raise ValueError("fast mode needs an explicit delta")
        d = delta
    p = sample_prime(d, 3, 4, rng).p
    q = choose_q(2**47 * u**64 * n * m * m, 2**48 * u**64 * n * m * m, rng)
    base_seed = rng.getrandbits(64)
    base = derive_base(q, base_seed.to_bytes(8, "big"))
    return SharedRandomness(p=p, q=q, base_seed=base_seed, base=base, u=u, n=n, m=m)


def encode_signature(shared: SharedRandomness, len_sq: Rat, fp: int) -> str:
    """Fixed-width encoding: (num + W) and den of len_sq, then the fingerprint."""
    w = shared.w_bound
    num_field = len_sq.numerator + w
    den_field = len_sq.denominator - 1
    assert 0 < num_field <= 2 * w and 0 <= den_field < w
    packed = ((num_field << shared.len_field_bits) | den_field) << shared.fp_field_bits
    packed |= fp
    return format(packed, f"0{shared.signature_hex_len}x")


def degenerate_signature(shared: SharedRandomness) -> Signature:
    """Fixed signature for single-valued sets; all-zero never collides with a
    real encoding because the shifted numerator field is always positive."""
    return Signature(
        encoded="0" * shared.signature_hex_len, len_sq=None, fp=None, degenerate=True
    )


class SignCentroidPass:
    """Pass 1: reduced centroid of the single set, plus single-value detection."""

    def __init__(self, shared: SharedRandomness, conjugate: bool = False):
        self.shared = shared
        self.conjugate = conjugate
        self.total = FpiElem(0, 0, shared.p)
        self.count = 0
        self.first_value: Optional[GaussianRat] = None
        self.degenerate = True
        self.centroid: Optional[FpiElem] = None

    def _value(self, record: PointRecord) -> GaussianRat:
        value = record.value
        return value.conj() if self.conjugate else value

    def begin(self, header: InstanceHeader) -> None:
        pass

    def update(self, record: PointRecord) -> None:
        z = self._value(record)
        self.total = self.total + phi_p(z, self.shared.p)
        self.count += 1
        if self.first_value is None:
            self.first_value = z
        elif z != self.first_value:
            self.degenerate = False

    def finish(self) -> None:
        p = self.shared.p
        if self.count % p == 0:
            raise ZeroDivisionError("p divides the set size")
        ninv = fp_inv(self.count % p, p)
        self.centroid = FpiElem(self.total.re * ninv, self.total.im * ninv, p)

    def state_bits(self) -> int:
        bits = bits_of_fp(self.shared.p, 2) + 32
        if self.first_value is not None:
            bits += bits_of_point(self.first_value)
        return bits


class RadiusPass:
    """Pass 2: minimum and second-minimum nonzero reduced distances."""

    def __init__(self, centroid_pass: SignCentroidPass):
        self._cp = centroid_pass
        self.shared = centroid_pass.shared
        self.m1: Optional[int] = None
        self.m2: Optional[int] = None
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._cp.degenerate

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        u = phi_p(self._cp._value(record), self.shared.p) - self._cp.centroid
        d = reduced_abs_sq(u)
        if d == 0:
            return
        if self.m1 is None or d < self.m1:
            if self.m1 is not None and self.m1 != d:
                self.m2 = self.m1 if self.m2 is None or self.m1 < self.m2 else self.m2
            self.m1 = d
        elif d != self.m1 and (self.m2 is None or d < self.m2):
            self.m2 = d

    def finish(self) -> None:
        if self.skip:
            return
        if self.m1 is None:
            raise EmptyDistanceSet("all reduced centroid distances are zero")
        if self.m2 is None:
            self.m2 = self.m1

    def state_bits(self) -> int:
        return bits_of_fp(self.shared.p, 2)


class SignMomentPass:
    """Pass 3: power-of-two moments over the canonical radius circle."""

    def __init__(self, radius_pass: RadiusPass):
        self._rp = radius_pass
        self._cp = radius_pass._cp
        self.shared = radius_pass.shared
        self.moments: list[FpiElem] = []
        self.j_max = 0
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._rp.skip
        self.j_max = moment_count(header.n_a)
        p = self.shared.p
        self.moments = [FpiElem(0, 0, p) for _ in range(self.j_max + 1)]

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        u = phi_p(self._cp._value(record), self.shared.p) - self._cp.centroid
        if reduced_abs_sq(u) != self._rp.m1:
            return
        power = u
        for j in range(self.j_max + 1):
            self.moments[j] = self.moments[j] + power
            power = power * power

    def finish(self) -> None:
        pass

    def state_bits(self) -> int:
        return bits_of_fp(self.shared.p, 2 * len(self.moments))


class KRadiusPass:
    """Pass 4: first nonzero moment index, then the k-th moment distance minima."""

    def __init__(self, moment_pass: SignMomentPass):
        self._mp = moment_pass
        self._cp = moment_pass._cp
        self.shared = moment_pass.shared
        self.j_star: Optional[int] = None
        self.m_k: Optional[FpiElem] = None
        self.mk1: Optional[int] = None
        self.mk2: Optional[int] = None
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._mp.skip
        if self.skip:
            return
        for j, m in enumerate(self._mp.moments):
            if not m.is_zero():
                self.j_star = j
                self.m_k = m
                break
        if self.j_star is None:
            raise BadPrimeSuspected("all tracked moments vanished")

    def _k_distance(self, record: PointRecord) -> int:
        u = phi_p(self._cp._value(record), self.shared.p) - self._cp.centroid
        v = u ** (1 << self.j_star) - self.m_k
        return reduced_abs_sq(v)

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        d = self._k_distance(record)
        if d == 0:
            return
        if self.mk1 is None or d < self.mk1:
            if self.mk1 is not None and self.mk1 != d:
                self.mk2 = self.mk1 if self.mk2 is None or self.mk1 < self.mk2 else self.mk2
            self.mk1 = d
        elif d != self.mk1 and (self.mk2 is None or d < self.mk2):
            self.mk2 = d

    def finish(self) -> None:
        if self.skip:
            return
        if self.mk1 is None:
            raise EmptyDistanceSet("all k-th moment distances are zero")
        if self.mk2 is None:
            self.mk2 = self.mk1

    def state_bits(self) -> int:
        return bits_of_fp(self.shared.p, 4)


class AnchorPass:
    """Pass 5: collect distinct points meeting the double radius condition.

    The primary anchor set intersects the radius condition with the moment
    distance condition; if it collects fewer than two points (the paper's
    two-anchor premise can fail), the canonical fallback is the plain
    radius-condition set, which always has at least two distinct points on
    non-degenerate input under a good prime.
    """

    def __init__(self, k_pass: KRadiusPass):
        self._kp = k_pass
        self._rp = k_pass._mp._rp
        self._cp = k_pass._cp
        self.shared = k_pass.shared
        self.and_set: set[GaussianRat] = set()
        self.radius_set: set[GaussianRat] = set()
        self.and_overflow = False
        self.radius_overflow = False
        self.anchors: list[GaussianRat] = []
        self.used_fallback = False
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._kp.skip

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        z = self._cp._value(record)
        u = phi_p(z, self.shared.p) - self._cp.centroid
        d = reduced_abs_sq(u)
        if d not in (self._rp.m1, self._rp.m2):
            return
        if len(self.radius_set) <= ANCHOR_LIMIT:
            self.radius_set.add(z)
            if len(self.radius_set) > ANCHOR_LIMIT:
                self.radius_overflow = True
        dk = self._kp._k_distance(record)
        if dk not in (self._kp.mk1, self._kp.mk2):
            return
        if len(self.and_set) <= ANCHOR_LIMIT:
            self.and_set.add(z)
            if len(self.and_set) > ANCHOR_LIMIT:
                self.and_overflow = True

    def finish(self) -> None:
        if self.skip:
            return
        if self.and_overflow:
            raise BadPrimeSuspected(f"anchor set exceeded {ANCHOR_LIMIT}")
        if len(self.and_set) >= 2:
            self.anchors = sorted(self.and_set, key=GaussianRat.sort_key)
            return
        self.used_fallback = True
        if self.radius_overflow or len(self.radius_set) < 2:
            raise BadPrimeSuspected("no usable anchor pair")
        self.anchors = sorted(self.radius_set, key=GaussianRat.sort_key)

    def state_bits(self) -> int:
        pts = list(self.and_set) + list(self.radius_set)
        return sum(bits_of_point(z) for z in pts)


class PairFingerprintPass:
    """Pass 6: Karp-Rabin hash per ordered anchor pair, lexicographic minimum."""

    def __init__(self, anchor_pass: AnchorPass):
        self._ap = anchor_pass
        self._cp = anchor_pass._cp
        self.shared = anchor_pass.shared
        self.pairs: list[tuple[GaussianRat, GaussianRat, Rat, KRState]] = []
        self.signature: Optional[Signature] = None
        self.skip = False

    def begin(self, header: InstanceHeader) -> None:
        self.skip = self._ap.skip
        if self.skip:
            self.signature = degenerate_signature(self.shared)
            return
        shared = self.shared
        for a in self._ap.anchors:
            for b in self._ap.anchors:
                if a == b:
                    continue
                self.pairs.append(
                    (a, b, dist_sq(a, b), KRState(shared.q, shared.base))
                )

    def update(self, record: PointRecord) -> None:
        if self.skip:
            return
        z = self._cp._value(record)
        w = self.shared.w_bound
        for a, b, _len_sq, acc in self.pairs:
            diff = b - a
            rel = z - a
            det = diff.re * rel.im - diff.im * rel.re
            sigma = 0 if det == 0 else (1 if det > 0 else -1)
            acc.feed(idx_gamma(dist_sq(z, a), dist_sq(z, b), sigma, w))

    def finish(self) -> None:
        if self.skip:
            return
        best: Optional[tuple[Rat, int]] = None
        for _a, _b, len_sq, acc in self.pairs:
            key = (len_sq, acc.value())
            if best is None or key < best:
                best = key
        assert best is not None
        self.signature = Signature(
            encoded=encode_signature(self.shared, best[0], best[1]),
            len_sq=best[0],
            fp=best[1],
            degenerate=False,
        )

    def state_bits(self) -> int:
        bits = 0
        for a, b, len_sq, acc in self.pairs:
            bits += bits_of_point(a) + bits_of_point(b)
            bits += acc.state_bits()
        return bits


@dataclass
class SignOutcome:
    verdict: str  # "ok" | "bad-prime-suspected"
    signature: Optional[Signature] = None
    passes: int = 0
    peak_sketch_bits: int = 0
    anchor_count: int = 0
    used_fallback: bool = False
    error: Optional[str] = None


def geomsign(
    source: StreamSource, shared: SharedRandomness, reflection_invariant: bool = False
) -> SignOutcome:
    """Six-pass signature of one single-set stream under shared randomness.

    With ``reflection_invariant`` the mirrored pipeline runs inside the same
    six passes and the smaller of the two encodings is returned, making the
    signature invariant under reflections as well.
    """
    header = source.header
    if header.dim != 2 or not header.single_set:
        raise ValueError("geomsign needs a single-set 2D stream")
    if header.u != shared.u or header.n_a != shared.n:
        raise ValueError("stream does not match the shared randomness parameters")
    if header.n_a < 1:
        raise ValueError("empty set")
    branches = [False] + ([True] if reflection_invariant else [])
    chains = []
    for conj in branches:
        cp = SignCentroidPass(shared, conjugate=conj)
        rp = RadiusPass(cp)
        mp = SignMomentPass(rp)
        kp = KRadiusPass(mp)
        ap = AnchorPass(kp)
        fp = PairFingerprintPass(ap)
        chains.append((cp, rp, mp, kp, ap, fp))
    handlers = [CombinedPass([chain[i] for chain in chains]) for i in range(6)]
    try:
        stats = pass_driver(source, handlers)
    except (UndefinedUnderPhi, ZeroDivisionError, BadPrimeSuspected) as exc:
        return SignOutcome(
            verdict=VERDICT_BAD_PRIME, passes=source.passes, error=str(exc)
        )
    signatures = [chain[5].signature for chain in chains]
    assert all(sig is not None for sig in signatures)
    best = min(signatures, key=lambda s: s.encoded)
    anchor_count = max(len(chain[4].anchors) for chain in chains)
    return SignOutcome(
        verdict=VERDICT_OK,
        signature=best,
        passes=stats.passes,
        peak_sketch_bits=stats.peak_sketch_bits,
        anchor_count=anchor_count,
        used_fallback=any(chain[4].used_fallback for chain in chains),
    )


def geomhash(
    sources: Sequence[StreamSource],
    seed: int,
    mode: str = "full",
    delta: Optional[int] = None,
    reflection_invariant: bool = False,
) -> tuple[list[SignOutcome], SharedRandomness]:
    """Signatures for m sets under one SharedRandomness; H(i) = signature(i)."""
    if not sources:
        raise ValueError("empty query collection")
    u = sources[0].header.u
    n = sources[0].header.n_a
    for src in sources:
        if src.header.u != u or src.header.n_a != n:
            raise ValueError("all query sets must share n and U")
    shared = make_shared(u, n, len(sources), seed, mode=mode, delta=delta)
    outcomes = [
        geomsign(src, shared, reflection_invariant=reflection_invariant)
        for src in sources
    ]
    return outcomes, shared
