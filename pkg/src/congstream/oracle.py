"""Exact-arithmetic reference oracles: shortlist algorithm and brute force.

These run with unbounded exact rationals and no space discipline; they
exist to manufacture ground truth for the probabilistic pipelines.  The
shortlist algorithm mirrors the two-pass real-register procedure: exact
centroids, exact recentred moments over the circle through the first
off-centroid datum, one moment quotient, and at most four candidate
rotations.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .cong3d import (
    Mat3,
    TripleCandidate,
    mat_det,
    mat_identity,
    mat_vec,
    recover_rigid,
)
from .moments import exact_recentred_moments, moment_count
from .rational import (
    GR_ONE,
    GaussianRat,
    Rat3,
    dist_sq,
    pow2root_in_qi,
    recover_rotation,
)


@dataclass
class ShortlistResult:
    """Either up to four (t, rho) candidate pairs or a certified rejection."""

    candidates: list[tuple[GaussianRat, GaussianRat]]  # (t, rho)
    certified_not_congruent: bool = False


def transform_2d(points: Sequence[GaussianRat], rho: GaussianRat, t: GaussianRat):
    return [rho * z + t for z in points]


def verify_transform_2d(
    a: Sequence[GaussianRat],
    b: Sequence[GaussianRat],
    rho: GaussianRat,
    t: GaussianRat,
    reflected: bool = False,
) -> bool:
    """Exact multiset check of B = rho * (sigma A) + t."""
    src = [z.conj() for z in a] if reflected else list(a)
    return Counter(transform_2d(src, rho, t)) == Counter(b)


def congslist_exact(
    a: Sequence[GaussianRat], b: Sequence[GaussianRat]
) -> ShortlistResult:
    """Two-pass exact congruence shortlist.

    Contract: whenever the inputs are congruent, a valid (t, rho) pair is in
    the output list.  Aborts certify non-congruence; surviving candidates
    may still be spurious and need an equality check.
    """
    if len(a) != len(b) or not a:
        raise ValueError("shortlist needs two nonempty equal-size multisets")
    n = len(a)
    j_max = moment_count(n)
    c_a = _centroid(a)
    c_b = _centroid(b)
    # Radius reference: first datum (A-block then B-block order) off its centroid.
    r_sq = None
    for z, c in [(z, c_a) for z in a] + [(z, c_b) for z in b]:
        d = dist_sq(z, c)
        if d != 0:
            r_sq = d
            break
    if r_sq is None:
        # Both multisets are n copies of their centroids.
        return ShortlistResult(candidates=[(c_b - c_a, GR_ONE)])
    ma = exact_recentred_moments(a, j_max, r_sq=r_sq)
    mb = exact_recentred_moments(b, j_max, r_sq=r_sq)
    j = ma.min_nonzero_j()
    if j is None:
        # A has no point on the reference circle while B put z* there (or
        # vice versa); congruent sets share distance multisets.
        return ShortlistResult(candidates=[], certified_not_congruent=True)
    if mb.moments[j].is_zero():
        return ShortlistResult(candidates=[], certified_not_congruent=True)
    w = mb.moments[j] * _gaussian_inverse(ma.moments[j])
    if w.norm_sq() != 1:
        return ShortlistResult(candidates=[], certified_not_congruent=True)
    rotations = pow2root_in_qi(w, j)
    cands = [
        (mb.centroid - rho * ma.centroid, rho)
        for rho in rotations
    ]
    return ShortlistResult(candidates=cands)


def _centroid(points: Sequence[GaussianRat]) -> GaussianRat:
    n = len(points)
    total = points[0]
    for z in points[1:]:
        total = total + z
    return GaussianRat(total.re / n, total.im / n)


def _gaussian_inverse(z: GaussianRat) -> GaussianRat:
    ns = z.norm_sq()
    if ns == 0:
        raise ZeroDivisionError("inverse of zero")
    conj = z.conj()
    return GaussianRat(conj.re / ns, conj.im / ns)


def brute_force_congruence_2d(
    a: Sequence[GaussianRat],
    b: Sequence[GaussianRat],
    allow_reflection: bool = False,
) -> Optional[tuple[GaussianRat, GaussianRat, bool]]:
    """Exhaustive exact search for (rho, t[, reflected]) with B = rho*A + t.

    Fixes one ordered pair of distinct points in A and tries every ordered
    pair in B; each hypothesis is checked by exact multiset equality.
    Intended for small n only.
    """
    if len(a) != len(b):
        return None
    if not a:
        return (GR_ONE, GaussianRat(0, 0), False)
    sigmas = [False] + ([True] if allow_reflection else [])
    for reflected in sigmas:
        src = [z.conj() for z in a] if reflected else list(a)
        anchor1 = src[0]
        anchor2 = next((z for z in src if z != anchor1), None)
        if anchor2 is None:
            # Single-valued source: any translation aligning the value works.
            target = Counter(b)
            if len(target) == 1:
                (value, mult), = target.items()
                if mult == len(b):
                    return (GR_ONE, value - anchor1, reflected)
            continue
        gap = dist_sq(anchor1, anchor2)
        for b1 in set(b):
            for b2 in set(b):
                if b1 == b2 or dist_sq(b1, b2) != gap:
                    continue
                pair = recover_rotation(anchor1, anchor2, b1, b2)
                if pair is None:
                    continue
                rho, t = pair
                if verify_transform_2d(a, b, rho, t, reflected=reflected):
                    return (rho, t, reflected)
    return None


def transform_3d(points: Sequence[Rat3], rot: Mat3, t: Rat3) -> list[Rat3]:
    return [mat_vec(rot, v) + t for v in points]


def verify_transform_3d(
    a: Sequence[Rat3],
    b: Sequence[Rat3],
    rot: Mat3,
    t: Rat3,
    allow_improper: bool = False,
) -> bool:
    """Exact multiset check of B = rot*A + t; improper maps need opting in."""
    if not allow_improper and mat_det(rot) != 1:
        return False
    return Counter(transform_3d(a, rot, t)) == Counter(b)


def _first_noncollinear_triple(points: Sequence[Rat3]) -> Optional[tuple[Rat3, Rat3, Rat3]]:
    distinct = []
    for v in points:
        if v not in distinct:
            distinct.append(v)
    if len(distinct) < 2:
        return None
    p1, p2 = distinct[0], distinct[1]
    for v in distinct[2:]:
        if not (p2 - p1).cross(v - p1).is_zero():
            return (p1, p2, v)
    return None


def brute_force_congruence_3d(
    a: Sequence[Rat3],
    b: Sequence[Rat3],
) -> Optional[tuple[Mat3, Rat3]]:
    """Exhaustive exact search for a proper rigid motion mapping A onto B.

    Fixes one non-collinear (or maximal degenerate) anchor triple in A and
    tries every distance-compatible ordered triple in B.  Intended for
    small n only.
    """
    if len(a) != len(b):
        return None
    if not a:
        return (mat_identity(), Rat3(0, 0, 0))
    count_b = Counter(b)
    triple = _first_noncollinear_triple(a)
    distinct_b = list(dict.fromkeys(b))
    if triple is None:
        # All of A lies on one line (or a single point).
        distinct_a = list(dict.fromkeys(a))
        if len(distinct_a) == 1:
            if len(count_b) == 1:
                (value, mult), = count_b.items()
                if mult == len(b):
                    return (mat_identity(), value - distinct_a[0])
            return None
        a1, a2 = distinct_a[0], distinct_a[1]
        gap = dist_sq(a1, a2)
        ta = TripleCandidate(a1, a2, a1, collinear=True, provenance="oracle")
        for b1 in distinct_b:
            for b2 in distinct_b:
                if b1 == b2 or dist_sq(b1, b2) != gap:
                    continue
                tb = TripleCandidate(b1, b2, b1, collinear=True, provenance="oracle")
                try:
                    rot, t = recover_rigid(ta, tb)
                except Exception:
                    continue
                if Counter(transform_3d(a, rot, t)) == count_b:
                    return (rot, t)
        return None
    a1, a2, a3 = triple
    d12, d13, d23 = dist_sq(a1, a2), dist_sq(a1, a3), dist_sq(a2, a3)
    ta = TripleCandidate(a1, a2, a3, collinear=False, provenance="oracle")
    for b1 in distinct_b:
        for b2 in distinct_b:
            if dist_sq(b1, b2) != d12:
                continue
            for b3 in distinct_b:
                if dist_sq(b1, b3) != d13 or dist_sq(b2, b3) != d23:
                    continue
                tb = TripleCandidate(b1, b2, b3, collinear=False, provenance="oracle")
                try:
                    rot, t = recover_rigid(ta, tb)
                except Exception:
                    continue
                if Counter(transform_3d(a, rot, t)) == count_b:
                    return (rot, t)
    return None
