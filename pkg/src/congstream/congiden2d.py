"""Three-pass streaming congruence identification for 2D rational multisets.

Pass 1 reduces both centroids into F_p[i]; pass 2 streams the power-of-two
moment sketch over the reference circle fixed by the first nonzero reduced
distance; post-processing extracts at most eight candidate rotations from a
moment quotient and rationally reconstructs (rho, t); pass 3 runs parallel
Karp-Rabin multiset-equality tests, one per surviving candidate.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

from .field import (
    UndefinedUnderPhi,
    fpi_inv,
    pow2root_in_fpi,
    reconstruct_gaussian,
    sample_prime,
)
from .fingerprint import KRState, choose_q, idx_point
from .moments import CentroidPass, MomentPass, MomentSketch, moment_count
from .rational import GR_ONE, GaussianRat
from .stream import (
    CombinedPass,
    InstanceHeader,
    PointRecord,
    StreamSource,
    bits_of_point,
    pass_driver,
)

VERDICT_CONGRUENT = "congruent"
VERDICT_NOT_CONGRUENT = "not-congruent"
VERDICT_BAD_PRIME = "bad-prime-suspected"


def full_delta(u: int, n: int) -> int:
    """Prime-range base for the full-guarantee mode."""
    return 2**86 * u**128 * n**4


def rho_precision_bound(u: int) -> int:
    return 2**10 * u**16


def t_precision_bound(u: int) -> int:
    return 2**22 * u**35


@dataclass(frozen=True)
class CongIdenConfig:
    mode: str = "full"  # "full" | "fast"
    delta: Optional[int] = None  # fast-mode prime-range base
    seed: int = 0
    allow_reflection: bool = False
    retry_bad_prime: int = 0

    def __post_init__(self):
        if self.mode not in ("full", "fast"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "fast" and self.delta is None:
            raise ValueError("fast mode needs an explicit delta")


@dataclass(frozen=True)
class TransformCandidate:
    rho: GaussianRat
    t: GaussianRat

    def sort_key(self):
        return self.rho.sort_key() + self.t.sort_key()


@dataclass
class CongIdenResult:
    verdict: str
    rho: Optional[GaussianRat] = None
    t: Optional[GaussianRat] = None
    reflected: bool = False
    prime: Optional[int] = None
    fingerprint_prime: Optional[int] = None
    passes: int = 0
    peak_sketch_bits: int = 0
    candidate_count: int = 0
    runs: int = 1
    guarantee_void: bool = False


def post_process_candidates(
    sketch: MomentSketch, rho_bound: int, t_bound: int
) -> tuple[str, list[TransformCandidate]]:
    """Moment quotient -> root set -> reconstructed transform candidates.

    Returns one of:
      ("candidates", cands)      both minimal moments nonzero
      ("moment-mismatch", [])    exactly one of the minimal pair is zero
      ("bad-prime", [])          every tracked moment pair vanished
    """
    for j in range(sketch.j_max + 1):
        m_a = sketch.moments["A"][j]
        m_b = sketch.moments["B"][j]
        if m_a.is_zero() and m_b.is_zero():
            continue
        if m_a.is_zero() != m_b.is_zero():
            return ("moment-mismatch", [])
        w = m_b * fpi_inv(m_a)
        roots = pow2root_in_fpi(w, j)
        assert len(roots) <= 8
        cands = []
        for g in roots:
            rho = reconstruct_gaussian(g, rho_bound, rho_bound)
            if rho is None or rho.norm_sq() != 1:
                continue
            t_hat = sketch.c_hat["B"] - g * sketch.c_hat["A"]
            t = reconstruct_gaussian(t_hat, t_bound, t_bound)
            if t is None:
                continue
            cands.append(TransformCandidate(rho=rho, t=t))
        return ("candidates", sorted(cands, key=TransformCandidate.sort_key))
    return ("bad-prime", [])


class VerifyPass:
    """Pass 3: parallel Karp-Rabin equality tests, one per candidate.

    For each candidate the A-side fingerprint hashes rho*z + t (aborting the
    candidate if any image leaves the input precision class) while the
    B-side hashes z directly; survivors have equal fingerprints.
    """

    def __init__(
        self,
        u: int,
        q: int,
        moment_pass: MomentPass,
        rng: random.Random,
        rho_bound: int,
        t_bound: int,
    ):
        self.u = u
        self.q = q
        self._moment_pass = moment_pass
        self._rng = rng
        self.rho_bound = rho_bound
        self.t_bound = t_bound
        self.conjugate_a = moment_pass.conjugate_a
        self.status = ""
        self.candidates: list[TransformCandidate] = []
        self.testers: list[tuple[TransformCandidate, KRState, KRState]] = []
        self.survivors: list[TransformCandidate] = []

    def begin(self, header: InstanceHeader) -> None:
        sketch = self._moment_pass.sketch
        assert sketch is not None
        if sketch.degenerate:
            c_a = reconstruct_gaussian(sketch.c_hat["A"], header.u, header.u)
            c_b = reconstruct_gaussian(sketch.c_hat["B"], header.u, header.u)
            if c_a is None or c_b is None:
                self.status, self.candidates = ("bad-prime", [])
            else:
                self.status = "degenerate"
                self.candidates = [TransformCandidate(rho=GR_ONE, t=c_b - c_a)]
        else:
            self.status, self.candidates = post_process_candidates(
                sketch, self.rho_bound, self.t_bound
            )
        self.testers = [
            (cand, KRState(self.q, self._rng.randrange(self.q)), None)
            for cand in self.candidates
        ]
        self.testers = [
            (cand, h_a, KRState(self.q, h_a.base)) for cand, h_a, _ in self.testers
        ]

    def update(self, record: PointRecord) -> None:
        if not self.testers:
            return
        z = record.value
        if record.label == "A":
            if self.conjugate_a:
                z = z.conj()
            for cand, h_a, _ in self.testers:
                if h_a.aborted:
                    continue
                image = cand.rho * z + cand.t
                if not image.is_u_rational(self.u):
                    h_a.abort()
                    continue
                h_a.feed(idx_point(image, self.u))
        else:
            idx = idx_point(z, self.u)
            for _, _, h_b in self.testers:
                h_b.feed(idx)

    def finish(self) -> None:
        self.survivors = [
            cand
            for cand, h_a, h_b in self.testers
            if not h_a.aborted and h_a.value() == h_b.value()
        ]

    def state_bits(self) -> int:
        bits = 0
        for cand, h_a, h_b in self.testers:
            bits += bits_of_point(cand.rho) + bits_of_point(cand.t)
            bits += h_a.state_bits() + h_b.state_bits()
        return bits


def run(source: StreamSource, config: CongIdenConfig) -> CongIdenResult:
    """Full CongIden pipeline with optional fresh-prime retries."""
    header = source.header
    if header.dim != 2 or header.single_set:
        raise ValueError("run2d needs a two-set 2D stream")
    if header.n_a < 1:
        raise ValueError("empty instance")
    if header.n_a != header.n_b:
        return CongIdenResult(verdict=VERDICT_NOT_CONGRUENT, passes=0)
    rng = random.Random(config.seed)
    attempts = 1 + max(0, config.retry_bad_prime)
    result = CongIdenResult(verdict=VERDICT_BAD_PRIME)
    for attempt in range(attempts):
        result = _run_once(source, config, rng)
        result.runs = attempt + 1
        if result.verdict != VERDICT_BAD_PRIME:
            break
    return result


def _run_once(
    source: StreamSource, config: CongIdenConfig, rng: random.Random
) -> CongIdenResult:
    header = source.header
    u, n = header.u, header.n_a
    delta = full_delta(u, n) if config.mode == "full" else config.delta
    prime = sample_prime(delta, 3, 16, rng)
    p = prime.p
    rho_bound = rho_precision_bound(u)
    t_bound = t_precision_bound(u)
    guarantee_void = False
    if config.mode == "full":
        # Lemma-level uniqueness precondition for rational reconstruction.
        if p <= 2 * t_bound * t_bound:
            raise AssertionError("full-mode prime range too small for reconstruction")
    else:
        cap = math.isqrt((p - 1) // 2)
        if cap < t_bound:
            guarantee_void = True
        rho_bound = min(rho_bound, cap)
        t_bound = min(t_bound, cap)
        if rho_bound < 1 or t_bound < 1:
            raise ValueError("fast-mode delta too small for any reconstruction")
    q = choose_q(2**12 * u**4 * n, 2**13 * u**4 * n, rng)
    j_max = moment_count(n)

    branches = [False] + ([True] if config.allow_reflection else [])
    centroid_passes = [CentroidPass(p, conjugate_a=refl) for refl in branches]
    moment_passes = [
        MomentPass(p, j_max, cp) for cp in centroid_passes
    ]
    verify_passes = [
        VerifyPass(u, q, mp, rng, rho_bound, t_bound) for mp in moment_passes
    ]
    handlers = [
        CombinedPass(centroid_passes),
        CombinedPass(moment_passes),
        CombinedPass(verify_passes),
    ]
    try:
        stats = pass_driver(source, handlers)
    except (UndefinedUnderPhi, ZeroDivisionError):
        return CongIdenResult(
            verdict=VERDICT_BAD_PRIME,
            prime=p,
            passes=source.passes,
            guarantee_void=guarantee_void,
        )

    result = CongIdenResult(
        verdict=VERDICT_NOT_CONGRUENT,
        prime=p,
        fingerprint_prime=q,
        passes=stats.passes,
        peak_sketch_bits=stats.peak_sketch_bits,
        candidate_count=sum(len(vp.candidates) for vp in verify_passes),
        guarantee_void=guarantee_void,
    )
    statuses = []
    for reflected, vp in zip(branches, verify_passes):
        statuses.append(vp.status)
        if vp.survivors and result.verdict != VERDICT_CONGRUENT:
            best = vp.survivors[0]
            result.verdict = VERDICT_CONGRUENT
            result.rho = best.rho
            result.t = best.t
            result.reflected = reflected
    if result.verdict != VERDICT_CONGRUENT:
        if all(s == "bad-prime" for s in statuses):
            result.verdict = VERDICT_BAD_PRIME
        elif any(s == "degenerate" for s in statuses):
            # A degenerate sketch whose lone candidate failed verification is
            # unreachable under a good prime: true single-point multisets are
            # always congruent via translation.
            result.verdict = VERDICT_BAD_PRIME
    return result
