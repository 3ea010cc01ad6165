import random
from collections import Counter
from fractions import Fraction

from congstream import gen
from congstream.cong3d import mat_det, mat_identity, mat_vec
from congstream.oracle import (
    brute_force_congruence_2d,
    brute_force_congruence_3d,
    congslist_exact,
    verify_transform_2d,
    verify_transform_3d,
)
from congstream.rational import GR_ONE, GaussianRat, Rat3

Z = GaussianRat
QUARTET = [Z(1, 0), Z(0, 1), Z(-1, 0), Z(0, -1)]


def test_shortlist_planted_rotation():
    rho = Z(Fraction(3, 5), Fraction(4, 5))
    b = [rho * z for z in QUARTET]
    result = congslist_exact(QUARTET, b)
    assert not result.certified_not_congruent
    assert (Z(0, 0), rho) in result.candidates
    assert len(result.candidates) <= 4


def test_shortlist_odd_case_uses_first_moment():
    a = [Z(1, 0), Z(0, 1), Z(-1, 0)]
    b = [z.times_i() for z in a]
    result = congslist_exact(a, b)
    assert any(verify_transform_2d(a, b, rho, t) for t, rho in result.candidates)


def test_shortlist_certifies_non_congruent_modulus():
    a = [Z(1, 0), Z(-1, 0)]
    b = [Z(2, 0), Z(-2, 0)]
    result = congslist_exact(a, b)
    assert result.certified_not_congruent


def test_shortlist_degenerate():
    a = [Z(1, 1)] * 4
    b = [Z(0, 2)] * 4
    result = congslist_exact(a, b)
    assert result.candidates == [(Z(-1, 1), GR_ONE)]


def test_brute_force_2d_planted_and_mutated():
    rng = random.Random(3)
    a = [Z(rng.randint(-4, 4), rng.randint(-4, 4)) for _ in range(6)]
    rho = Z(0, -1)
    t = Z(2, 1)
    b = [rho * z + t for z in a]
    found = brute_force_congruence_2d(a, b)
    assert found is not None
    f_rho, f_t, refl = found
    assert not refl and verify_transform_2d(a, b, f_rho, f_t)
    # change one multiplicity
    mutated = list(b)
    mutated[0] = mutated[1]
    if Counter(mutated) != Counter(b):
        assert brute_force_congruence_2d(a, mutated) is None


def test_brute_force_2d_reflection():
    a = [Z(0, 0), Z(1, 0), Z(2, 1)]
    b = [z.conj() for z in a]
    assert brute_force_congruence_2d(a, b, allow_reflection=False) is None
    found = brute_force_congruence_2d(a, b, allow_reflection=True)
    assert found is not None and found[2] is True


def test_shortlist_agrees_with_brute_force():
    rng = random.Random(4)
    agree = 0
    total = 120
    for i in range(total):
        n = rng.randint(2, 8)
        u = rng.randint(1, 5)
        if i % 2 == 0:
            src, _rho, _t = gen.gen_2d_congruent(n, u, rng)
        else:
            src = gen.gen_2d_noncongruent(n, u, rng)
        a = [r.value for r in src.records() if r.label == "A"]
        b = [r.value for r in src.records() if r.label == "B"]
        brute = brute_force_congruence_2d(a, b)
        short = congslist_exact(a, b)
        if brute is None:
            ok = short.certified_not_congruent or not any(
                verify_transform_2d(a, b, rho, t) for t, rho in short.candidates
            )
        else:
            ok = not short.certified_not_congruent and any(
                verify_transform_2d(a, b, rho, t) for t, rho in short.candidates
            )
        agree += ok
    assert agree == total


def test_brute_force_3d_planted():
    rng = random.Random(5)
    src, rot, t = gen.gen_3d_congruent(8, 5, rng)
    a = [r.value for r in src.records() if r.label == "A"]
    b = [r.value for r in src.records() if r.label == "B"]
    found = brute_force_congruence_3d(a, b)
    assert found is not None
    f_rot, f_t = found
    assert mat_det(f_rot) == 1
    assert verify_transform_3d(a, b, f_rot, f_t)


def test_brute_force_3d_collinear_and_degenerate():
    a = [Rat3(i, 0, 0) for i in range(4)]
    b = [Rat3(1, i, 2) for i in range(4)]
    found = brute_force_congruence_3d(a, b)
    assert found is not None and verify_transform_3d(a, b, *found)
    single = brute_force_congruence_3d([Rat3(1, 2, 3)] * 3, [Rat3(0, 0, 1)] * 3)
    assert single == (mat_identity(), Rat3(-1, -2, -2))
    assert brute_force_congruence_3d([Rat3(0, 0, 0)] * 2, [Rat3(0, 0, 0), Rat3(1, 0, 0)]) is None


def test_brute_force_3d_rejects():
    a = [Rat3(0, 0, 0), Rat3(1, 0, 0), Rat3(0, 1, 0)]
    b = [Rat3(0, 0, 0), Rat3(2, 0, 0), Rat3(0, 1, 0)]
    assert brute_force_congruence_3d(a, b) is None
