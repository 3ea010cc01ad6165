import random
from fractions import Fraction

import pytest

from congstream import gen
from congstream.congiden2d import (
    CongIdenConfig,
    VERDICT_BAD_PRIME,
    VERDICT_CONGRUENT,
    VERDICT_NOT_CONGRUENT,
    rho_precision_bound,
    run,
    t_precision_bound,
)
from congstream.oracle import verify_transform_2d
from congstream.rational import GaussianRat
from congstream.stream import InstanceHeader, PointRecord, StreamSource

Z = GaussianRat


def _source(a, b, u=5):
    header = InstanceHeader(dim=2, u=u, n_a=len(a), n_b=len(b))
    rows = [("A", z) for z in a] + [("B", z) for z in b]
    records = [PointRecord(lbl, val, i) for i, (lbl, val) in enumerate(rows)]
    return StreamSource(header, records)


def test_quarter_turn_example():
    a = [Z(0, 0), Z(1, 0)]
    b = [Z(0, 0), Z(0, 1)]
    result = run(_source(a, b), CongIdenConfig(seed=1))
    assert result.verdict == VERDICT_CONGRUENT
    assert verify_transform_2d(a, b, result.rho, result.t)
    # Both valid alignments are quarter turns.
    assert result.rho in (Z(0, 1), Z(0, -1))
    assert result.passes == 3
    assert result.candidate_count <= 8


def test_distance_mismatch_example():
    a = [Z(0, 0), Z(2, 0)]
    b = [Z(0, 0), Z(1, 0)]
    result = run(_source(a, b), CongIdenConfig(seed=2))
    assert result.verdict == VERDICT_NOT_CONGRUENT


def test_degenerate_all_equal():
    a = [Z(Fraction(1, 2), Fraction(1, 2))] * 5
    b = [Z(Fraction(1, 2), Fraction(1, 2))] * 5
    result = run(_source(a, b), CongIdenConfig(seed=3))
    assert result.verdict == VERDICT_CONGRUENT
    assert result.rho == Z(1, 0) and result.t == Z(0, 0)


def test_degenerate_translation():
    a = [Z(1, 1)] * 3
    b = [Z(-2, 3)] * 3
    result = run(_source(a, b), CongIdenConfig(seed=4))
    assert result.verdict == VERDICT_CONGRUENT
    assert result.rho == Z(1, 0) and result.t == Z(-3, 2)


def test_size_mismatch_rejected_without_passes():
    result = run(_source([Z(0, 0)], [Z(0, 0), Z(1, 0)]), CongIdenConfig(seed=5))
    assert result.verdict == VERDICT_NOT_CONGRUENT
    assert result.passes == 0


def test_reflection_flag():
    a = [Z(0, 0), Z(1, 0), Z(2, 1)]
    b = [z.conj() for z in a]
    plain = run(_source(a, b), CongIdenConfig(seed=6))
    assert plain.verdict == VERDICT_NOT_CONGRUENT
    with_flag = run(_source(a, b), CongIdenConfig(seed=6, allow_reflection=True))
    assert with_flag.verdict == VERDICT_CONGRUENT and with_flag.reflected
    assert verify_transform_2d(a, b, with_flag.rho, with_flag.t, reflected=True)
    assert with_flag.passes == 3


def test_planted_instances_recover_exactly():
    rng = random.Random(7)
    for _ in range(15):
        n, u = rng.randint(2, 10), rng.randint(1, 8)
        src, rho, t = gen.gen_2d_congruent(n, u, rng)
        result = run(src, CongIdenConfig(seed=rng.randrange(2**32)))
        assert result.verdict == VERDICT_CONGRUENT
        a = [r.value for r in src.records() if r.label == "A"]
        b = [r.value for r in src.records() if r.label == "B"]
        assert verify_transform_2d(a, b, result.rho, result.t)
        assert result.rho.is_u_rational(rho_precision_bound(u))
        assert result.t.is_u_rational(t_precision_bound(u))
        assert result.passes == 3


def test_fast_mode_runs_and_flags_guarantee():
    rng = random.Random(8)
    src, _rho, _t = gen.gen_2d_congruent(4, 2, rng)
    result = run(src, CongIdenConfig(mode="fast", delta=10**6, seed=9))
    assert result.verdict in (
        VERDICT_CONGRUENT,
        VERDICT_NOT_CONGRUENT,
        VERDICT_BAD_PRIME,
    )
    assert result.guarantee_void
    assert result.passes % 3 == 0


def test_fast_mode_requires_delta():
    with pytest.raises(ValueError):
        CongIdenConfig(mode="fast")


def test_retry_reports_cumulative_passes():
    # A tiny fast-mode delta makes bad primes likely; retries must add passes.
    rng = random.Random(10)
    src, _rho, _t = gen.gen_2d_congruent(3, 2, rng)
    result = run(src, CongIdenConfig(mode="fast", delta=50, seed=11, retry_bad_prime=2))
    assert result.passes == 3 * result.runs
