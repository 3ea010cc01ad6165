"""Instance generators: planted congruent pairs, rejected non-congruent pairs,
degenerate multisets, and the pinned planar counterexample set.

Planted rotations are exactly representable: 2D uses Pythagorean units,
3D uses rational orthogonal matrices from integer quaternions.  Applied
transforms must keep coordinates inside Q_U; candidate points are sampled
from sublattices compatible with the rotation denominator and the pair is
rejection-resampled when a coordinate escapes.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Optional, Sequence

from .cong3d import Mat3, mat_identity, mat_vec
from .oracle import brute_force_congruence_2d, brute_force_congruence_3d
from .rational import GaussianRat, Rat3
from .stream import InstanceHeader, PointRecord, StreamSource


class GenerationExhausted(RuntimeError):
    """Precision constraints could not be met within the attempt budget."""


PLANAR_COUNTEREXAMPLE = [
    Rat3(7, 0, -7),
    Rat3(0, -7, 7),
    Rat3(5, -8, 3),
    Rat3(-7, 7, 0),
    Rat3(-5, 8, -3),
]


def _unit_rotations_2d(u: int) -> list[GaussianRat]:
    units = [
        GaussianRat(1, 0),
        GaussianRat(0, 1),
        GaussianRat(-1, 0),
        GaussianRat(0, -1),
    ]
    if u >= 5:
        for re, im in ((3, 4), (4, 3)):
            for sr in (1, -1):
                for si in (1, -1):
                    units.append(GaussianRat(Fraction(sr * re, 5), Fraction(si * im, 5)))
    return units


def _random_qu(rng: random.Random, u: int) -> Fraction:
    return Fraction(rng.randint(-u, u), rng.randint(1, u))


def _interleave(
    rng: random.Random, a: Sequence, b: Sequence
) -> list[tuple[str, object]]:
    rows = [("A", v) for v in a] + [("B", v) for v in b]
    rng.shuffle(rows)
    return rows


def _source_2d(u: int, a: Sequence[GaussianRat], b: Sequence[GaussianRat], rng) -> StreamSource:
    header = InstanceHeader(dim=2, u=u, n_a=len(a), n_b=len(b))
    rows = _interleave(rng, a, b)
    records = [
        PointRecord(label=lbl, value=val, position=i)
        for i, (lbl, val) in enumerate(rows)
    ]
    return StreamSource(header, records)


def _source_3d(u: int, a: Sequence[Rat3], b: Sequence[Rat3], rng) -> StreamSource:
    header = InstanceHeader(dim=3, u=u, n_a=len(a), n_b=len(b))
    rows = _interleave(rng, a, b)
    records = [
        PointRecord(label=lbl, value=val, position=i)
        for i, (lbl, val) in enumerate(rows)
    ]
    return StreamSource(header, records)


def gen_2d_congruent(
    n: int, u: int, rng: random.Random, max_attempts: int = 400
) -> tuple[StreamSource, GaussianRat, GaussianRat]:
    """Planted 2D pair; returns (stream, rho, t)."""
    units = _unit_rotations_2d(u)
    for _ in range(max_attempts):
        rho = rng.choice(units)
        t = GaussianRat(rng.randint(-u, u), rng.randint(-u, u))
        den = math.lcm(rho.re.denominator, rho.im.denominator)
        points: list[GaussianRat] = []
        ok = True
        for _ in range(n):
            placed = False
            for _try in range(60):
                if den == 1:
                    a = GaussianRat(_random_qu(rng, u), _random_qu(rng, u))
                else:
                    lim = u // den
                    a = GaussianRat(
                        den * rng.randint(-lim, lim), den * rng.randint(-lim, lim)
                    )
                image = rho * a + t
                if image.is_u_rational(u):
                    points.append(a)
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if not ok:
            continue
        b = [rho * a + t for a in points]
        return _source_2d(u, points, b, rng), rho, t
    raise GenerationExhausted("no 2D congruent instance within precision bounds")


def gen_2d_noncongruent(
    n: int, u: int, rng: random.Random, verify_limit: int = 32
) -> StreamSource:
    """Independent random pair, rejection-checked against the exact oracle."""
    for _ in range(200):
        a = [GaussianRat(_random_qu(rng, u), _random_qu(rng, u)) for _ in range(n)]
        b = [GaussianRat(_random_qu(rng, u), _random_qu(rng, u)) for _ in range(n)]
        if sorted(z.norm_sq() for z in a) == sorted(z.norm_sq() for z in b):
            # Cheap necessary-condition collision; resample to be safe.
            continue
        if n <= verify_limit and brute_force_congruence_2d(a, b) is not None:
            continue
        return _source_2d(u, a, b, rng)
    raise GenerationExhausted("could not build a non-congruent 2D pair")


def gen_2d_degenerate(n: int, u: int, rng: random.Random) -> StreamSource:
    value_a = GaussianRat(_random_qu(rng, u), _random_qu(rng, u))
    value_b = GaussianRat(_random_qu(rng, u), _random_qu(rng, u))
    return _source_2d(u, [value_a] * n, [value_b] * n, rng)


_QUATERNIONS = [
    (1, 0, 0, 0),
    (1, 1, 0, 0),
    (1, 0, 1, 0),
    (1, 1, 1, 0),
    (0, 1, 1, 0),
    (1, 1, 1, 1),
    (1, 2, 0, 0),
    (2, 1, 0, 0),
    (1, 0, 0, 2),
]


def quaternion_rotation(q: tuple[int, int, int, int]) -> Mat3:
    """Rational orthogonal matrix (det +1) from a nonzero integer quaternion."""
    a, b, c, d = q
    nrm = a * a + b * b + c * c + d * d
    row = lambda *vals: tuple(Fraction(v, nrm) for v in vals)
    return (
        row(a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)),
        row(2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)),
        row(2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d),
    )


def gen_3d_congruent(
    n: int, u: int, rng: random.Random, max_attempts: int = 400
) -> tuple[StreamSource, Mat3, Rat3]:
    """Planted 3D pair; returns (stream, rotation, translation)."""
    for _ in range(max_attempts):
        quat = rng.choice(_QUATERNIONS)
        nrm = sum(x * x for x in quat)
        if nrm > u:
            continue
        rot = quaternion_rotation(quat)
        t = Rat3(rng.randint(-u, u), rng.randint(-u, u), rng.randint(-u, u))
        step = nrm
        lim = u // step
        points: list[Rat3] = []
        ok = True
        for _ in range(n):
            placed = False
            for _try in range(60):
                a = Rat3(
                    step * rng.randint(-lim, lim),
                    step * rng.randint(-lim, lim),
                    step * rng.randint(-lim, lim),
                )
                image = mat_vec(rot, a) + t
                if image.is_u_rational(u):
                    points.append(a)
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if not ok:
            continue
        b = [mat_vec(rot, a) + t for a in points]
        return _source_3d(u, points, b, rng), rot, t
    raise GenerationExhausted("no 3D congruent instance within precision bounds")


def gen_3d_noncongruent(
    n: int, u: int, rng: random.Random, verify_limit: int = 40
) -> StreamSource:
    for _ in range(200):
        a = [
            Rat3(rng.randint(-u, u), rng.randint(-u, u), rng.randint(-u, u))
            for _ in range(n)
        ]
        b = [
            Rat3(rng.randint(-u, u), rng.randint(-u, u), rng.randint(-u, u))
            for _ in range(n)
        ]
        if sorted(v.norm_sq() for v in a) == sorted(v.norm_sq() for v in b):
            continue
        if n <= verify_limit and brute_force_congruence_3d(a, b) is not None:
            continue
        return _source_3d(u, a, b, rng)
    raise GenerationExhausted("could not build a non-congruent 3D pair")


def gen_3d_degenerate(n: int, u: int, rng: random.Random) -> StreamSource:
    va = Rat3(rng.randint(-u, u), rng.randint(-u, u), rng.randint(-u, u))
    vb = Rat3(rng.randint(-u, u), rng.randint(-u, u), rng.randint(-u, u))
    return _source_3d(u, [va] * n, [vb] * n, rng)


def gen_planar_counterexample(u: int, rng: random.Random) -> tuple[StreamSource, Mat3, Rat3]:
    """The pinned planar regression set: equal norms, zero sum, 3D only."""
    if u < 8:
        raise ValueError("the planar counterexample needs U >= 8")
    a = list(PLANAR_COUNTEREXAMPLE)
    return _source_3d(u, a, list(a), rng), mat_identity(), Rat3(0, 0, 0)


def gen_2d_single(n: int, u: int, rng: random.Random, congruent_to: Optional[Sequence[GaussianRat]] = None):
    """One single-set stream for signature pipelines (labels all A)."""
    if congruent_to is None:
        pts = [GaussianRat(_random_qu(rng, u), _random_qu(rng, u)) for _ in range(n)]
    else:
        pts = list(congruent_to)
    header = InstanceHeader(dim=2, u=u, n_a=len(pts), n_b=None)
    order = list(pts)
    rng.shuffle(order)
    records = [
        PointRecord(label="A", value=z, position=i) for i, z in enumerate(order)
    ]
    return StreamSource(header, records)


def gen_2d_congruent_single_pair(
    n: int, u: int, rng: random.Random, max_attempts: int = 400
) -> tuple[StreamSource, StreamSource, GaussianRat, GaussianRat]:
    """Two single-set streams related by a planted rigid motion."""
    pair, rho, t = gen_2d_congruent(n, u, rng, max_attempts=max_attempts)
    a = [rec.value for rec in pair.records() if rec.label == "A"]
    b = [rec.value for rec in pair.records() if rec.label == "B"]
    return (
        gen_2d_single(n, u, rng, congruent_to=a),
        gen_2d_single(n, u, rng, congruent_to=b),
        rho,
        t,
    )
