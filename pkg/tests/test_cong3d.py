import random
from fractions import Fraction

import pytest

from congstream import gen
from congstream.cong3d import (
    BottomKSampler,
    Config3,
    SliceCounter,
    TripleCandidate,
    VERDICT_CONGRUENT,
    VERDICT_NOT_CONGRUENT,
    _CaseSplitState,
    circumcenter_coplanar,
    circumcenter_sphere,
    householder,
    mat_det,
    mat_identity,
    mat_is_rotation,
    mat_mul,
    mat_transpose,
    mat_vec,
    recover_rigid,
    run3d,
    sparse_threshold,
)
from congstream.gen import PLANAR_COUNTEREXAMPLE, quaternion_rotation
from congstream.oracle import verify_transform_3d
from congstream.rational import Rat3
from congstream.stream import InstanceHeader, PointRecord, StreamSource


def _source(a, b, u=8):
    header = InstanceHeader(dim=3, u=u, n_a=len(a), n_b=len(b))
    rows = [("A", v) for v in a] + [("B", v) for v in b]
    records = [PointRecord(lbl, val, i) for i, (lbl, val) in enumerate(rows)]
    return StreamSource(header, records)


def test_planar_counterexample_is_pinned():
    # All five points share squared norm 98 and sum to zero: the planar set
    # defeats any argument that reduces 3D to the 2D nonzero-moment fact.
    total = Rat3(0, 0, 0)
    for v in PLANAR_COUNTEREXAMPLE:
        assert v.norm_sq() == 98
        assert v.x + v.y + v.z == 0
        total = total + v
    assert total.is_zero()
    src = _source(list(PLANAR_COUNTEREXAMPLE), list(PLANAR_COUNTEREXAMPLE))
    result = run3d(src, Config3(seed=1))
    assert result.verdict == VERDICT_CONGRUENT
    assert verify_transform_3d(
        PLANAR_COUNTEREXAMPLE, PLANAR_COUNTEREXAMPLE, result.rotation, result.translation
    )
    assert result.passes == 6


def test_planted_rotation_recovery():
    rng = random.Random(2)
    for _ in range(5):
        n = rng.randint(4, 20)
        src, rot, t = gen.gen_3d_congruent(n, 5, rng)
        result = run3d(src, Config3(seed=rng.randrange(2**32)))
        assert result.verdict == VERDICT_CONGRUENT
        a = [r.value for r in src.records() if r.label == "A"]
        b = [r.value for r in src.records() if r.label == "B"]
        assert verify_transform_3d(a, b, result.rotation, result.translation)
        assert result.passes == 6


def test_collinear_translate_branch():
    a = [Rat3(i, 0, 0) for i in range(5)]
    b = [v + Rat3(1, 2, 1) for v in a]
    result = run3d(_source(a, b), Config3(seed=3))
    assert result.verdict == VERDICT_CONGRUENT
    assert verify_transform_3d(a, b, result.rotation, result.translation)


def test_collinear_rotated_branch():
    a = [Rat3(i, 0, 0) for i in range(4)] + [Rat3(2, 0, 0)]
    b = [Rat3(0, i, 3) for i in range(4)] + [Rat3(0, 2, 3)]
    result = run3d(_source(a, b), Config3(seed=4))
    assert result.verdict == VERDICT_CONGRUENT
    assert verify_transform_3d(a, b, result.rotation, result.translation)


def test_non_congruent_distance_multiset():
    a = [Rat3(0, 0, 0), Rat3(1, 0, 0), Rat3(0, 1, 0), Rat3(5, 5, 5)]
    b = [Rat3(0, 0, 0), Rat3(2, 0, 0), Rat3(0, 1, 0), Rat3(5, 5, 5)]
    result = run3d(_source(a, b), Config3(seed=5))
    assert result.verdict == VERDICT_NOT_CONGRUENT


def test_case_split_branches():
    # case (a): two distinct sphere points
    st = _CaseSplitState()
    st.offer(Rat3(1, 0, 0))
    st.offer(Rat3(-1, 0, 0))
    st.offer(Rat3(1, 0, 0))
    cands = st.candidates()
    assert [pr for _, pr in cands] == ["a", "a"]
    # case (b): four coplanar sphere points -> circle centre
    st = _CaseSplitState()
    for v in (Rat3(1, 0, 0), Rat3(-1, 0, 0), Rat3(0, 1, 0), Rat3(0, -1, 0)):
        st.offer(v)
    cands = st.candidates()
    assert cands == [(Rat3(0, 0, 0), "b")]
    # case (c): regular tetrahedron -> sphere centre = centroid
    tetra = [Rat3(1, 1, 1), Rat3(1, -1, -1), Rat3(-1, 1, -1), Rat3(-1, -1, 1)]
    st = _CaseSplitState()
    for v in tetra:
        st.offer(v)
    cands = st.candidates()
    assert cands == [(Rat3(0, 0, 0), "c")]


def test_circumcenters_exact():
    o = circumcenter_coplanar(Rat3(1, 0, 0), Rat3(0, 1, 0), Rat3(-1, 0, 0))
    assert o == Rat3(0, 0, 0)
    o2 = circumcenter_sphere(
        Rat3(1, 0, 0), Rat3(0, 1, 0), Rat3(0, 0, 1), Rat3(-1, 0, 0)
    )
    assert o2 == Rat3(0, 0, 0)


def test_slice_counter_rules():
    v1, v2 = Rat3(0, 0, 0), Rat3(1, 0, 0)
    counter = SliceCounter(v1, v2, n=27)  # cap 3, threshold 9
    assert counter.cap == 3 and counter.threshold == 9
    # points on the unit sphere around v1, excluding the line through v1,v2
    for _ in range(3):
        counter.offer(Rat3(0, 1, 0))  # kappa 0
    for _ in range(100):
        counter.offer(Rat3(0, -1, 0))  # also kappa 0 (same slice)
    assert counter.select() is None or counter.counts[Fraction(0)] > 9
    counter2 = SliceCounter(v1, v2, n=27)
    counter2.offer(Rat3(Fraction(1, 2), Fraction(1, 2), 0))  # on sphere? no: resets happen by min
    # line points are excluded entirely
    counter3 = SliceCounter(v1, v2, n=27)
    counter3.offer(v2)
    counter3.offer(Rat3(-1, 0, 0))  # antipode on the line
    assert counter3.min_dist is None and not counter3.counts


def test_slice_counter_tie_prefers_v2_side():
    v1, v2 = Rat3(0, 0, 0), Rat3(1, 0, 0)
    counter = SliceCounter(v1, v2, n=8)  # threshold 4
    pos = Rat3(Fraction(1, 2), Fraction(1, 2), 0)
    neg = Rat3(Fraction(-1, 2), Fraction(1, 2), 0)
    for _ in range(2):
        counter.offer(pos)
    counter.offer(neg)
    # both slices sparse at |kappa| = 1/2; the v2 side (positive) wins
    assert counter.select() == Fraction(1, 2)


def test_slice_counter_reset_on_smaller_sphere():
    v1, v2 = Rat3(0, 0, 0), Rat3(1, 0, 0)
    counter = SliceCounter(v1, v2, n=8)
    counter.offer(Rat3(0, 2, 0))
    assert counter.min_dist == 4
    counter.offer(Rat3(0, 1, 0))
    assert counter.min_dist == 1 and counter.sphere_count == 1
    counter.offer(Rat3(0, 2, 0))
    assert counter.sphere_count == 1  # farther sphere ignored after reset


def test_bottom_k_sampler_distinct_and_uniform():
    domain = [Rat3(i, 0, 0) for i in range(10)]
    hits = {v: 0 for v in domain}
    trials = 10_000
    k = 3
    for seed in range(trials):
        sampler = BottomKSampler(k, seed.to_bytes(4, "big"))
        for v in domain:
            sampler.offer(v)
            sampler.offer(v)  # duplicates never inflate the sample
        values = sampler.values()
        assert len(values) == k and len(set(values)) == k
        for v in values:
            hits[v] += 1
    expected = trials * k / len(domain)
    sd = (trials * (k / 10) * (1 - k / 10)) ** 0.5
    for v, count in hits.items():
        assert abs(count - expected) <= 5 * sd


def test_bottom_k_returns_all_when_few():
    sampler = BottomKSampler(10, b"s")
    for v in (Rat3(1, 0, 0), Rat3(2, 0, 0), Rat3(1, 0, 0)):
        sampler.offer(v)
    assert sorted(sampler.values(), key=Rat3.sort_key) == [
        Rat3(1, 0, 0),
        Rat3(2, 0, 0),
    ]


def test_recover_rigid_cases():
    ident = [Rat3(0, 0, 0), Rat3(1, 0, 0), Rat3(0, 1, 0)]
    ta = TripleCandidate(*ident, collinear=False, provenance="t")
    rot, t = recover_rigid(ta, ta)
    assert rot == mat_identity() and t == Rat3(0, 0, 0)
    # quarter turn about z
    quarter = [Rat3(0, 0, 0), Rat3(0, 1, 0), Rat3(-1, 0, 0)]
    tb = TripleCandidate(*quarter, collinear=False, provenance="t")
    rot, t = recover_rigid(ta, tb)
    assert rot == ((0, -1, 0), (1, 0, 0), (0, 0, 1))
    assert mat_is_rotation(rot)
    # random quaternion rotation recovered exactly
    rng = random.Random(9)
    for quat in ((1, 1, 0, 0), (1, 2, 0, 0), (1, 1, 1, 0)):
        rmat = quaternion_rotation(quat)
        assert mat_is_rotation(rmat)
        shift = Rat3(1, -2, 3)
        moved = TripleCandidate(
            *(mat_vec(rmat, v) + shift for v in ident), collinear=False, provenance="t"
        )
        got_rot, got_t = recover_rigid(ta, moved)
        assert got_rot == rmat and got_t == shift


def test_householder_is_orthogonal_reflection():
    h = householder(Rat3(1, 2, 3))
    assert mat_mul(mat_transpose(h), h) == mat_identity()
    assert mat_det(h) == -1


def test_sparse_threshold_integer_cube_rule():
    assert sparse_threshold(8) == 4
    assert sparse_threshold(27) == 9
    assert sparse_threshold(40) == 11  # floor(40^(2/3)) = floor(11.69)


def test_reflection_flag_3d():
    a = [Rat3(0, 0, 0), Rat3(1, 0, 0), Rat3(0, 2, 0), Rat3(0, 0, 3), Rat3(1, 1, 1)]
    reflect = lambda v: Rat3(-v.x, v.y, v.z)
    b = [reflect(v) for v in a]
    from congstream.oracle import brute_force_congruence_3d

    assert brute_force_congruence_3d(a, b) is None  # chiral set, proper maps fail
    plain = run3d(_source(a, b), Config3(seed=10))
    assert plain.verdict == VERDICT_NOT_CONGRUENT
    flagged = run3d(_source(a, b), Config3(seed=10, allow_reflection=True))
    assert flagged.verdict == VERDICT_CONGRUENT and flagged.reflected
    assert mat_det(flagged.rotation) == -1
    assert verify_transform_3d(
        a, b, flagged.rotation, flagged.translation, allow_improper=True
    )
    assert flagged.passes == 6
