import math
import random
from fractions import Fraction

import pytest

from congstream.congiden2d import full_delta
from congstream.field import (
    FpPrime,
    FpiElem,
    UndefinedUnderPhi,
    fp_sqrt,
    fpi_inv,
    fpi_sqrt,
    is_probable_prime,
    phi_p,
    phi_p_rat,
    pow2root_in_fpi,
    rational_reconstruct,
    reconstruct_gaussian,
    sample_prime,
)
from congstream.rational import GaussianRat


def brute_inverse(x: int, p: int) -> int:
    return next(y for y in range(1, p) if x * y % p == 1)


def test_full_delta_paper_value():
    # U=2, n=4: 2^86 * 2^128 * 2^8
    assert full_delta(2, 4) == 2**222


def test_sample_prime_fast_mode():
    rng = random.Random(0)
    p4 = sample_prime(10**6, 3, 4, rng)
    assert 10**6 <= p4.p <= 4 * 10**6 and p4.p % 4 == 3
    p16 = sample_prime(10**6, 3, 16, rng)
    assert p16.p % 16 == 3
    assert is_probable_prime(p16.p, rng)


def test_fpprime_rejects_wrong_class():
    with pytest.raises(ValueError):
        FpPrime(5, 3, 4)  # 5 = 1 mod 4: F_p[i] is not a field
    with pytest.raises(ValueError):
        FpPrime(31, 3, 16)  # 31 = 15 mod 16
    assert FpPrime(19, 3, 16).p == 19
    assert FpPrime(31, 3, 4).p == 31


def test_phi_examples():
    assert phi_p_rat(Fraction(1, 2), 7) == brute_inverse(2, 7) == 4
    assert phi_p_rat(Fraction(0), 7) == 0
    with pytest.raises(UndefinedUnderPhi):
        phi_p_rat(Fraction(1, 7), 7)
    z = phi_p(GaussianRat(Fraction(1, 2), Fraction(-1, 3)), 7)
    assert z == FpiElem(4, -brute_inverse(3, 7), 7)


def test_phi_homomorphism_fuzz():
    rng = random.Random(2)
    p = 4099  # prime, 3 mod 4, larger than every denominator below
    for _ in range(100):
        z1 = GaussianRat(
            Fraction(rng.randint(-20, 20), rng.randint(1, 20)),
            Fraction(rng.randint(-20, 20), rng.randint(1, 20)),
        )
        z2 = GaussianRat(
            Fraction(rng.randint(-20, 20), rng.randint(1, 20)),
            Fraction(rng.randint(-20, 20), rng.randint(1, 20)),
        )
        assert phi_p(z1 + z2, p) == phi_p(z1, p) + phi_p(z2, p)
        assert phi_p(z1 * z2, p) == phi_p(z1, p) * phi_p(z2, p)
        assert phi_p(z1.conj(), p) == phi_p(z1, p).conj()


def test_fpi_inverse():
    i7 = FpiElem(0, 1, 7)
    assert fpi_inv(i7) == FpiElem(0, 6, 7)
    assert fpi_inv(FpiElem(1, 0, 7)) == FpiElem(1, 0, 7)
    for a in range(7):
        for b in range(7):
            x = FpiElem(a, b, 7)
            if x.is_zero():
                with pytest.raises(ZeroDivisionError):
                    fpi_inv(x)
            else:
                assert x * fpi_inv(x) == FpiElem(1, 0, 7)


def test_fp_sqrt():
    p = 19
    squares = {x * x % p for x in range(p)}
    for a in range(p):
        got = fp_sqrt(a, p)
        if a in squares:
            assert got is not None and got * got % p == a
        else:
            assert got is None


def test_fpi_sqrt_against_brute_force():
    p = 19
    table: dict[FpiElem, set[FpiElem]] = {}
    for a in range(p):
        for b in range(p):
            z = FpiElem(a, b, p)
            table.setdefault(z * z, set()).add(z)
    for a in range(p):
        for b in range(p):
            w = FpiElem(a, b, p)
            assert set(fpi_sqrt(w)) == table.get(w, set())


def test_pow2root_examples():
    assert set(pow2root_in_fpi(FpiElem(-1, 0, 7), 1)) == {
        FpiElem(0, 1, 7),
        FpiElem(0, 6, 7),
    }
    # p = 19 = 3 mod 16: gcd(8, p^2 - 1) = 8, so z^8 = 1 has exactly 8 roots
    roots = pow2root_in_fpi(FpiElem(1, 0, 19), 3)
    assert len(roots) == 8
    assert all(r**8 == FpiElem(1, 0, 19) for r in roots)


def test_rational_reconstruct_examples():
    # 3 * inverse(7) mod 101 = 87, and (3, 7) is the unique bounded pair
    assert 3 * brute_inverse(7, 101) % 101 == 87
    assert rational_reconstruct(87, 3, 7, 101) == Fraction(3, 7)
    found = [
        (a, b)
        for a in range(-3, 4)
        for b in range(1, 8)
        if math.gcd(abs(a), b) == 1 and a * brute_inverse(b, 101) % 101 == 87
    ]
    assert found == [(3, 7)]
    assert rational_reconstruct(0, 5, 5, 101) == 0
    assert rational_reconstruct(50, 1, 1, 101) is None


def test_rational_reconstruct_round_trip():
    rng = random.Random(4)
    p = 2003  # prime > 2 * 20 * 20
    for _ in range(300):
        a = rng.randint(-20, 20)
        b = rng.randint(1, 20)
        g = math.gcd(abs(a), b)
        a, b = a // g if g else a, b // g if g else b
        x = a * pow(b, -1, p) % p
        assert rational_reconstruct(x, 20, 20, p) == Fraction(a, b)


def test_reconstruct_gaussian():
    p = 2003
    z = GaussianRat(Fraction(3, 7), Fraction(-5, 11))
    zh = phi_p(z, p)
    assert reconstruct_gaussian(zh, 20, 20) == z
    representable = {
        a * pow(b, -1, p) % p
        for a in range(-3, 4)
        for b in range(1, 4)
        if math.gcd(abs(a), b) == 1
    }
    outside = next(x for x in range(p) if x not in representable)
    assert reconstruct_gaussian(FpiElem(outside, 0, p), 3, 3) is None
