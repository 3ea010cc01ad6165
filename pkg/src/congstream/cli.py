"""Command-line front end: instance generation, runs, hashing, oracle, bench.

Every subcommand prints a versioned JSON run report on stdout and maps its
outcome to an exit code: 0 congruent / hash produced, 1 not congruent,
2 bad prime suspected, 3 usage or parse error.  Reports are deterministic
given (input file, seed, mode), except for the wall-time field.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from fractions import Fraction
from typing import Optional

from . import cong3d, congiden2d, gen, geomhash, oracle
from .rational import GaussianRat, Rat3, format_rat
from .stream import StreamFormatError, CountMismatch, open_stream, write_stream

EXIT_OK = 0
EXIT_NOT_CONGRUENT = 1
EXIT_BAD_PRIME = 2
EXIT_USAGE = 3


def _gauss_json(z: Optional[GaussianRat]):
    if z is None:
        return None
    return [format_rat(z.re), format_rat(z.im)]


def _rat3_json(v: Optional[Rat3]):
    if v is None:
        return None
    return [format_rat(c) for c in v.coords()]


def _mat_json(m):
    if m is None:
        return None
    return [[format_rat(c) for c in row] for row in m]


def _report(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _fast_bench_delta(n: int, u: int) -> int:
    """Benchmark-mode prime range: log-scale p tracks log n + log U."""
    return 2**10 * n * n * u * u


def _cmd_gen(args) -> int:
    rng = random.Random(args.seed)
    truths: dict = {"kind": args.kind, "seed": args.seed}
    if args.dim == 2:
        if args.kind == "congruent":
            source, rho, t = gen.gen_2d_congruent(args.n, args.u, rng)
            truths["rho"] = _gauss_json(rho)
            truths["t"] = _gauss_json(t)
        elif args.kind == "non-congruent":
            source = gen.gen_2d_noncongruent(args.n, args.u, rng)
        elif args.kind == "degenerate":
            source = gen.gen_2d_degenerate(args.n, args.u, rng)
        else:
            print("planar-counterexample is a 3D kind", file=sys.stderr)
            return EXIT_USAGE
    else:
        if args.kind == "congruent":
            source, rot, t = gen.gen_3d_congruent(args.n, args.u, rng)
            truths["rotation"] = _mat_json(rot)
            truths["t"] = _rat3_json(t)
        elif args.kind == "non-congruent":
            source = gen.gen_3d_noncongruent(args.n, args.u, rng)
        elif args.kind == "degenerate":
            source = gen.gen_3d_degenerate(args.n, args.u, rng)
        else:
            source, rot, t = gen.gen_planar_counterexample(args.u, rng)
            truths["rotation"] = _mat_json(rot)
            truths["t"] = _rat3_json(t)
    rows = [(rec.label, rec.value) for rec in source.records()]
    write_stream(args.out, source.header, rows)
    with open(args.out + ".truth.json", "w", encoding="utf-8") as fh:
        json.dump(truths, fh, sort_keys=True)
    _report(
        {
            "v": 1,
            "command": "gen",
            "out": args.out,
            "dim": source.header.dim,
            "n": source.header.n_a,
            "U": source.header.u,
            "kind": args.kind,
            "seed": args.seed,
        }
    )
    return EXIT_OK


def _verdict_exit(verdict: str) -> int:
    if verdict == "congruent":
        return EXIT_OK
    if verdict == "not-congruent":
        return EXIT_NOT_CONGRUENT
    return EXIT_BAD_PRIME


def _cmd_run2d(args) -> int:
    start = time.perf_counter()
    source = open_stream(args.stream)
    config = congiden2d.CongIdenConfig(
        mode=args.mode,
        delta=args.delta,
        seed=args.seed,
        allow_reflection=args.allow_reflection,
        retry_bad_prime=args.retry_bad_prime,
    )
    result = congiden2d.run(source, config)
    _report(
        {
            "v": 1,
            "command": "run2d",
            "input": args.stream,
            "config": {
                "mode": args.mode,
                "delta": args.delta,
                "seed": args.seed,
                "allow_reflection": args.allow_reflection,
                "retry_bad_prime": args.retry_bad_prime,
            },
            "verdict": result.verdict,
            "rho": _gauss_json(result.rho),
            "t": _gauss_json(result.t),
            "reflected": result.reflected,
            "prime": str(result.prime) if result.prime else None,
            "fingerprint_prime": str(result.fingerprint_prime)
            if result.fingerprint_prime
            else None,
            "passes": result.passes,
            "peak_sketch_bits": result.peak_sketch_bits,
            "candidates": result.candidate_count,
            "runs": result.runs,
            "guarantee_void": result.guarantee_void,
            "seed": args.seed,
            "wall_time_s": round(time.perf_counter() - start, 6),
        }
    )
    return _verdict_exit(result.verdict)


def _cmd_run3d(args) -> int:
    start = time.perf_counter()
    source = open_stream(args.stream)
    config = cong3d.Config3(
        mode=args.mode,
        delta=args.delta,
        seed=args.seed,
        allow_reflection=args.allow_reflection,
        retry_bad_prime=args.retry_bad_prime,
    )
    result = cong3d.run3d(source, config)
    _report(
        {
            "v": 1,
            "command": "run3d",
            "input": args.stream,
            "config": {
                "mode": args.mode,
                "delta": args.delta,
                "seed": args.seed,
                "allow_reflection": args.allow_reflection,
                "retry_bad_prime": args.retry_bad_prime,
            },
            "verdict": result.verdict,
            "rotation": _mat_json(result.rotation),
            "t": _rat3_json(result.translation),
            "reflected": result.reflected,
            "prime": str(result.prime) if result.prime else None,
            "fingerprint_prime": str(result.fingerprint_prime)
            if result.fingerprint_prime
            else None,
            "passes": result.passes,
            "peak_sketch_bits": result.peak_sketch_bits,
            "matched_pairs": result.matched_pairs,
            "runs": result.runs,
            "seed": args.seed,
            "wall_time_s": round(time.perf_counter() - start, 6),
        }
    )
    return _verdict_exit(result.verdict)


def _cmd_hash(args) -> int:
    start = time.perf_counter()
    with open(args.manifest, "r", encoding="utf-8") as fh:
        paths = [line.strip() for line in fh if line.strip()]
    if args.m is not None and args.m != len(paths):
        print(f"manifest lists {len(paths)} sets, --m says {args.m}", file=sys.stderr)
        return EXIT_USAGE
    sources = [open_stream(p) for p in paths]
    outcomes, shared = geomhash.geomhash(
        sources,
        seed=args.seed,
        mode=args.mode,
        delta=args.delta,
        reflection_invariant=args.allow_reflection,
    )
    _report(
        {
            "v": 1,
            "command": "hash",
            "manifest": args.manifest,
            "m": len(paths),
            "config": {"mode": args.mode, "delta": args.delta, "seed": args.seed},
            "signatures": [
                o.signature.encoded if o.signature is not None else None
                for o in outcomes
            ],
            "verdicts": [o.verdict for o in outcomes],
            "passes": [o.passes for o in outcomes],
            "shared": {
                "prime": str(shared.p),
                "q": str(shared.q),
                "base_seed": str(shared.base_seed),
                "signature_bits": shared.signature_bits,
            },
            "seed": args.seed,
            "wall_time_s": round(time.perf_counter() - start, 6),
        }
    )
    if any(o.verdict != geomhash.VERDICT_OK for o in outcomes):
        return EXIT_BAD_PRIME
    return EXIT_OK


def _cmd_oracle(args) -> int:
    source = open_stream(args.stream)
    a = [rec.value for rec in source.records() if rec.label == "A"]
    b = [rec.value for rec in source.records() if rec.label == "B"]
    if source.header.dim == 2:
        found = oracle.brute_force_congruence_2d(a, b, allow_reflection=args.allow_reflection)
        shortlist = oracle.congslist_exact(a, b) if a and len(a) == len(b) else None
        payload = {
            "v": 1,
            "command": "oracle",
            "input": args.stream,
            "verdict": "congruent" if found else "not-congruent",
            "rho": _gauss_json(found[0]) if found else None,
            "t": _gauss_json(found[1]) if found else None,
            "reflected": found[2] if found else False,
            "shortlist": [
                {"t": _gauss_json(t), "rho": _gauss_json(rho)}
                for t, rho in shortlist.candidates
            ]
            if shortlist
            else None,
            "shortlist_certified_not_congruent": shortlist.certified_not_congruent
            if shortlist
            else None,
        }
    else:
        found3 = oracle.brute_force_congruence_3d(a, b)
        payload = {
            "v": 1,
            "command": "oracle",
            "input": args.stream,
            "verdict": "congruent" if found3 else "not-congruent",
            "rotation": _mat_json(found3[0]) if found3 else None,
            "t": _rat3_json(found3[1]) if found3 else None,
        }
    _report(payload)
    return EXIT_OK if payload["verdict"] == "congruent" else EXIT_NOT_CONGRUENT


def _fit_through_origin(xs: list[float], ys: list[float]) -> tuple[float, float]:
    """Least-squares slope for y ~ c*x and the fit's R^2."""
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    c = sxy / sxx if sxx else 0.0
    mean_y = sum(ys) / len(ys)
    ss_res = sum((y - c * x) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    r2 = 1.0 - ss_res / ss_tot if ss_tot else 1.0
    return c, r2


def bench_sweep(
    n_exps: list[int], us: list[int], seed: int
) -> dict:
    """Fast-mode space sweep: peak sketch bits vs. the log n (log n + log U) model."""
    import math

    rows = []
    rng = random.Random(seed)
    for u in us:
        for exp in n_exps:
            n = 2**exp
            source, _rho, _t = gen.gen_2d_congruent(n, u, rng)
            delta = _fast_bench_delta(n, u)
            config = congiden2d.CongIdenConfig(
                mode="fast", delta=delta, seed=rng.randrange(2**32)
            )
            result = congiden2d.run(source, config)
            bitlen_p = result.prime.bit_length() if result.prime else 0
            j_max = n.bit_length() - 1
            rows.append(
                {
                    "n": n,
                    "U": u,
                    "verdict": result.verdict,
                    "peak_bits": result.peak_sketch_bits,
                    "bitlen_p": bitlen_p,
                    "bound": 64 * (j_max + 1) * bitlen_p,
                    "model_x": math.log2(n) * (math.log2(n) + math.log2(u)),
                }
            )
    xs = [r["model_x"] for r in rows]
    ys = [float(r["peak_bits"]) for r in rows]
    c1, r2 = _fit_through_origin(xs, ys)
    return {"rows": rows, "fit": {"c1": c1, "r2": r2}}


def _cmd_bench(args) -> int:
    start = time.perf_counter()
    n_exps = list(range(args.n_min_exp, args.n_max_exp + 1))
    us = [int(tok) for tok in args.us.split(",")]
    payload = bench_sweep(n_exps, us, args.seed)
    payload.update(
        {
            "v": 1,
            "command": "bench",
            "seed": args.seed,
            "wall_time_s": round(time.perf_counter() - start, 6),
        }
    )
    _report(payload)
    within = all(r["peak_bits"] <= r["bound"] for r in payload["rows"])
    return EXIT_OK if within and payload["fit"]["r2"] >= 0.95 else EXIT_NOT_CONGRUENT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="congstream",
        description="Streaming congruence identification and geometric hashing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a stream instance")
    p_gen.add_argument("--dim", type=int, choices=(2, 3), required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--u", type=int, required=True)
    p_gen.add_argument(
        "--kind",
        choices=("congruent", "non-congruent", "degenerate", "planar-counterexample"),
        required=True,
    )
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    def _run_flags(p):
        p.add_argument("--mode", choices=("full", "fast"), default="full")
        p.add_argument("--delta", type=int, default=None, help="fast-mode prime range base")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--allow-reflection", action="store_true")
        p.add_argument("--retry-bad-prime", type=int, default=0)

    p_run2 = sub.add_parser("run2d", help="3-pass 2D congruence identification")
    _run_flags(p_run2)
    p_run2.add_argument("stream")
    p_run2.set_defaults(func=_cmd_run2d)

    p_run3 = sub.add_parser("run3d", help="6-pass 3D congruence identification")
    _run_flags(p_run3)
    p_run3.add_argument("stream")
    p_run3.set_defaults(func=_cmd_run3d)

    p_hash = sub.add_parser("hash", help="6-pass geometric hash over a manifest")
    p_hash.add_argument("--manifest", required=True, help="one stream path per line")
    p_hash.add_argument("--m", type=int, default=None, help="expected set count")
    p_hash.add_argument("--mode", choices=("full", "fast"), default="full")
    p_hash.add_argument("--delta", type=int, default=None)
    p_hash.add_argument("--seed", type=int, default=0)
    p_hash.add_argument("--allow-reflection", action="store_true")
    p_hash.set_defaults(func=_cmd_hash)

    p_oracle = sub.add_parser("oracle", help="exact brute-force reference run")
    p_oracle.add_argument("--allow-reflection", action="store_true")
    p_oracle.add_argument("stream")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_bench = sub.add_parser("bench", help="space sweep in fast mode")
    p_bench.add_argument("--n-min-exp", type=int, default=4)
    p_bench.add_argument("--n-max-exp", type=int, default=12)
    p_bench.add_argument("--us", default="2,16,256")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (StreamFormatError, CountMismatch, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
