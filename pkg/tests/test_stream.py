from fractions import Fraction

import pytest

from congstream.rational import GaussianRat, Rat3
from congstream.stream import (
    CombinedPass,
    CountMismatch,
    InstanceHeader,
    PointRecord,
    PrecisionViolation,
    StreamFormatError,
    StreamSource,
    open_stream,
    pass_driver,
    write_stream,
)


def _write(tmp_path, text, name="t.stream"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_parse_basic(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=2 nB=2\nA 1/2 -1/3\nA 0 0\nB 1 1\nB 2/3 3\n")
    src = open_stream(path)
    assert src.header == InstanceHeader(dim=2, u=3, n_a=2, n_b=2)
    recs = list(src.records())
    assert recs[0].label == "A"
    assert recs[0].value == GaussianRat(Fraction(1, 2), Fraction(-1, 3))
    assert recs[0].position == 0
    assert recs[3].value == GaussianRat(Fraction(2, 3), 3)


def test_parse_3d_and_single_set(tmp_path):
    path = _write(tmp_path, "# dim=3 U=5 nA=2\nA 1 2 3\nA -1/5 0 5\n")
    src = open_stream(path)
    assert src.header.single_set
    assert list(src.records())[1].value == Rat3(Fraction(-1, 5), 0, 5)
    bad = _write(tmp_path, "# dim=3 U=5 nA=1\nB 1 2 3\n", "bad.stream")
    with pytest.raises(StreamFormatError):
        open_stream(bad)


def test_precision_violation(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=1 nB=0\nA 4/3 0\n")
    with pytest.raises(PrecisionViolation) as err:
        open_stream(path)
    assert err.value.line_no == 2


def test_reduction_before_precision_test(tmp_path):
    # 2/4 reduces to 1/2, which is 2-rational
    path = _write(tmp_path, "# dim=2 U=2 nA=1 nB=0\nA 2/4 0\n")
    assert list(open_stream(path).records())[0].value == GaussianRat(Fraction(1, 2), 0)


def test_count_mismatch(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=2 nB=0\nA 1 1\n")
    with pytest.raises(CountMismatch):
        open_stream(path)


def test_parse_errors_carry_line_numbers(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=1 nB=0\nA 1.5 0\n")
    with pytest.raises(StreamFormatError) as err:
        open_stream(path)
    assert err.value.line_no == 2
    path2 = _write(tmp_path, "# dim=2 U=3 nA=1 nB=0\nC 1 0\n", "t2.stream")
    with pytest.raises(StreamFormatError):
        open_stream(path2)
    path3 = _write(tmp_path, "A 1 0\n", "t3.stream")
    with pytest.raises(StreamFormatError) as err3:
        open_stream(path3)
    assert err3.value.line_no == 1


def test_replay_determinism(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=2 nB=1\nA 1 1\nB 0 1\nA 1/3 -3\n")
    src = open_stream(path)
    src.rewind()
    first = [(r.label, r.value, r.position) for r in src.records()]
    src.rewind()
    second = [(r.label, r.value, r.position) for r in src.records()]
    assert first == second
    assert src.passes == 2


def test_write_read_round_trip(tmp_path):
    header = InstanceHeader(dim=2, u=4, n_a=2, n_b=1)
    rows = [
        ("A", GaussianRat(Fraction(1, 2), -3)),
        ("B", GaussianRat(0, Fraction(3, 4))),
        ("A", GaussianRat(4, 4)),
    ]
    path = str(tmp_path / "rt.stream")
    write_stream(path, header, rows)
    src = open_stream(path)
    assert src.header == header
    assert [(r.label, r.value) for r in src.records()] == rows


class _CountingPass:
    def __init__(self):
        self.seen = 0

    def begin(self, header):
        pass

    def update(self, record):
        self.seen += 1

    def finish(self):
        pass

    def state_bits(self):
        return 17


def test_pass_driver_counts(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=2 nB=2\nA 1 1\nB 0 1\nA 0 0\nB 1 0\n")
    src = open_stream(path)
    handlers = [_CountingPass() for _ in range(3)]
    stats = pass_driver(src, handlers)
    assert stats.passes == 3
    assert all(h.seen == 4 for h in handlers)
    assert stats.peak_sketch_bits == 17
    assert stats.records_per_pass == 4


def test_pass_driver_empty_stream(tmp_path):
    path = _write(tmp_path, "# dim=2 U=3 nA=0 nB=0\n")
    src = open_stream(path)
    handlers = [_CountingPass(), _CountingPass()]
    stats = pass_driver(src, handlers)
    assert stats.passes == 2 and all(h.seen == 0 for h in handlers)


def test_combined_pass_sums_bits():
    combined = CombinedPass([_CountingPass(), _CountingPass()])
    combined.begin(InstanceHeader(2, 1, 0, 0))
    assert combined.state_bits() == 34
