"""Replayable multi-pass point streams over a line-oriented text format.

Format: one ``#``-prefixed header line ``dim=<d> U=<u> nA=<..> [nB=<..>]``,
then one record per line, ``label coord1 coord2 [coord3]`` with coordinates
written as ``±p/q`` or plain integers.  Multiplicities are expressed by
repeated lines; labels interleave arbitrarily and "first datum" semantics
follow file order.  Omitting ``nB=`` declares a single-set stream (labels
must all be A).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Protocol, Sequence, Union

from .rational import GaussianRat, Rat3, parse_rat, format_rat

Point = Union[GaussianRat, Rat3]


class StreamFormatError(ValueError):
    """Malformed stream file; carries the offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class PrecisionViolation(StreamFormatError):
    """A coordinate exceeds the declared precision bound U."""


class CountMismatch(ValueError):
    """Declared nA/nB do not match the record counts."""


@dataclass(frozen=True)
class InstanceHeader:
    dim: int
    u: int
    n_a: int
    n_b: Optional[int]  # None for single-set streams

    @property
    def single_set(self) -> bool:
        return self.n_b is None


@dataclass(frozen=True)
class PointRecord:
    label: str  # "A" or "B"
    value: Point
    position: int  # 0-based stream position, fixed across passes


def _parse_header(line: str, line_no: int) -> InstanceHeader:
    body = line.lstrip("#").strip()
    fields = {}
    for tok in body.split():
        if "=" not in tok:
            raise StreamFormatError(f"bad header token {tok!r}", line_no)
        key, val = tok.split("=", 1)
        fields[key] = val
    try:
        dim = int(fields["dim"])
        u = int(fields["U"])
        n_a = int(fields["nA"])
        n_b = int(fields["nB"]) if "nB" in fields else None
    except (KeyError, ValueError) as exc:
        raise StreamFormatError(f"bad header: {exc}", line_no) from None
    if dim not in (2, 3):
        raise StreamFormatError(f"dim must be 2 or 3, got {dim}", line_no)
    if u < 1 or n_a < 0 or (n_b is not None and n_b < 0):
        raise StreamFormatError("U must be >= 1 and counts nonnegative", line_no)
    return InstanceHeader(dim=dim, u=u, n_a=n_a, n_b=n_b)


def _parse_record(line: str, line_no: int, header: InstanceHeader, pos: int) -> PointRecord:
    toks = line.split()
    if len(toks) != 1 + header.dim:
        raise StreamFormatError(
            f"expected label + {header.dim} coordinates, got {len(toks)} tokens", line_no
        )
    label = toks[0]
    if label not in ("A", "B"):
        raise StreamFormatError(f"unknown label {label!r}", line_no)
    if header.single_set and label != "A":
        raise StreamFormatError("single-set stream admits only label A", line_no)
    try:
        coords = [parse_rat(t) for t in toks[1:]]
    except ValueError as exc:
        raise StreamFormatError(str(exc), line_no) from None
    for c in coords:
        if not (c == 0 or (abs(c.numerator) <= header.u and c.denominator <= header.u)):
            raise PrecisionViolation(
                f"coordinate {format_rat(c)} exceeds precision U={header.u}", line_no
            )
    value: Point
    if header.dim == 2:
        value = GaussianRat(coords[0], coords[1])
    else:
        value = Rat3(coords[0], coords[1], coords[2])
    return PointRecord(label=label, value=value, position=pos)


class StreamSource:
    """Replayable cursor over a parsed stream file.

    Records are parsed and validated once; every pass replays the identical
    sequence.  ``rewind`` increments the pass counter.
    """

    def __init__(self, header: InstanceHeader, records: Sequence[PointRecord], path: str = "<memory>"):
        self.header = header
        self._records = list(records)
        self.path = path
        self.passes = 0
        counts = {"A": 0, "B": 0}
        for rec in self._records:
            counts[rec.label] += 1
        if counts["A"] != header.n_a:
            raise CountMismatch(f"declared nA={header.n_a}, found {counts['A']}")
        expected_b = 0 if header.single_set else header.n_b
        if counts["B"] != expected_b:
            raise CountMismatch(f"declared nB={expected_b}, found {counts['B']}")

    def rewind(self) -> None:
        self.passes += 1

    def records(self) -> Iterator[PointRecord]:
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)


def open_stream(path: str) -> StreamSource:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header: Optional[InstanceHeader] = None
    records: list[PointRecord] = []
    pos = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is not None:
                raise StreamFormatError("duplicate header", line_no)
            header = _parse_header(line, line_no)
            continue
        if header is None:
            raise StreamFormatError("record before header", line_no)
        records.append(_parse_record(line, line_no, header, pos))
        pos += 1
    if header is None:
        raise StreamFormatError("missing header", 1)
    return StreamSource(header, records, path=path)


def write_stream(path: str, header: InstanceHeader, points: Sequence[tuple[str, Point]]) -> None:
    """Serialize labeled points in the shared text format (UTF-8, LF)."""
    lines = []
    head = f"# dim={header.dim} U={header.u} nA={header.n_a}"
    if not header.single_set:
        head += f" nB={header.n_b}"
    lines.append(head)
    for label, value in points:
        if header.dim == 2:
            assert isinstance(value, GaussianRat)
            coords = (value.re, value.im)
        else:
            assert isinstance(value, Rat3)
            coords = value.coords()
        lines.append(label + " " + " ".join(format_rat(c) for c in coords))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def bits_of_int(x: int) -> int:
    return max(1, x.bit_length())


def bits_of_rat(r) -> int:
    return bits_of_int(abs(r.numerator)) + bits_of_int(r.denominator) + 1


def bits_of_point(value: Point) -> int:
    if isinstance(value, GaussianRat):
        return bits_of_rat(value.re) + bits_of_rat(value.im)
    return sum(bits_of_rat(c) for c in value.coords())


def bits_of_fp(p: int, count: int = 1) -> int:
    """Fixed-width accounting: one F_p register costs bitlen(p) bits."""
    return count * p.bit_length()


class PassHandler(Protocol):
    """One streaming pass: sees every record once, in order."""

    def begin(self, header: InstanceHeader) -> None: ...

    def update(self, record: PointRecord) -> None: ...

    def finish(self) -> None: ...

    def state_bits(self) -> int: ...


class CombinedPass:
    """Run several logical pipelines inside one physical pass."""

    def __init__(self, handlers: Sequence[PassHandler]):
        self.handlers = list(handlers)

    def begin(self, header: InstanceHeader) -> None:
        for h in self.handlers:
            h.begin(header)

    def update(self, record: PointRecord) -> None:
        for h in self.handlers:
            h.update(record)

    def finish(self) -> None:
        for h in self.handlers:
            h.finish()

    def state_bits(self) -> int:
        return sum(h.state_bits() for h in self.handlers)


@dataclass
class DriverStats:
    passes: int
    peak_sketch_bits: int
    records_per_pass: int


def pass_driver(source: StreamSource, handlers: Sequence[PassHandler]) -> DriverStats:
    """Run one handler per pass and account peak sketch size.

    Peak sketch bits are sampled at every record boundary as the serialized
    bit length of the active handler's live state.
    """
    peak = 0
    for handler in handlers:
        source.rewind()
        handler.begin(source.header)
        for record in source.records():
            handler.update(record)
            bits = handler.state_bits()
            if bits > peak:
                peak = bits
        handler.finish()
        bits = handler.state_bits()
        if bits > peak:
            peak = bits
    return DriverStats(
        passes=source.passes,
        peak_sketch_bits=peak,
        records_per_pass=len(source),
    )
