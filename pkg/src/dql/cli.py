"""Command-line interface: encode, decode, simulate, verify and sweep.

Exit status: 0 success, 1 invalid parameters or input, 2 I/O failure,
3 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from dql import harness
from dql.codec import CODE_NAMES, signed_lengths
from dql.distributions import MechanismParams
from dql.errors import DQLError
from dql.mechanism import dql_decode_vector, dql_encode_vector
from dql.protocol import FRAME_SUFFIX, Frame, open_frame, read_frame, seal, seed_id_for, write_frame
from dql.randomness import LOCAL_STREAM, SHARED_STREAM, RandomStream

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_FAILED = 0, 1, 2, 3
DEFAULT_SWEEP_ELLS = (2.0, 3.0, 4.0, 6.0, 8.0)


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _params(args) -> MechanismParams:
    if not args.ell > 1:
        raise UsageError(f"--ell must be > 1 (got {args.ell}); ell = 1 forces delta0 = 0")
    if not args.eps > 0:
        raise UsageError(f"--eps must be > 0 (got {args.eps})")
    return MechanismParams(args.eps, args.ell)


def _read_values(args) -> np.ndarray:
    if args.input:
        text = Path(args.input).read_text()
        tokens = [line.strip() for line in text.splitlines() if line.strip()]
    else:
        tokens = args.values
    if not tokens:
        raise UsageError("no input values; pass them inline or with --input")
    try:
        x = np.array([float(v) for v in tokens])
    except ValueError as exc:
        raise UsageError(f"bad value: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise UsageError("input values must be finite")
    return x


def _write_lines(path, lines):
    text = "".join(f"{line}\n" for line in lines)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_encode(args) -> int:
    params = _params(args)
    x = _read_values(args)
    local_seed = args.local_seed if args.local_seed is not None else secrets.randbits(64)
    shared = RandomStream(args.seed, SHARED_STREAM)
    local = RandomStream(local_seed, LOCAL_STREAM)
    frame = seal(x, params, CODE_NAMES[args.code], seed_id_for(args.seed), shared, local)
    out = Path(args.out) if args.out else Path("frame" + FRAME_SUFFIX)
    write_frame(out, frame)
    bits = 8 * len(frame.payload) / len(x)
    print(f"wrote {out} ({len(x)} entries, {bits:.3f} bits/sample)", file=sys.stderr)
    return EXIT_OK


def cmd_decode(args) -> int:
    frame = read_frame(args.frame)
    x_hat = open_frame(frame, RandomStream(args.seed, SHARED_STREAM))
    _write_lines(args.out, (repr(float(v)) for v in x_hat))
    return EXIT_OK


def cmd_simulate(args) -> int:
    """Encode and decode in memory; one output line per input value per trial."""
    params = _params(args)
    x = _read_values(args)
    lines = []
    code = CODE_NAMES[args.code]
    bits = 0.0
    for trial in range(args.trials):
        seed = (args.seed + trial) % 2**64
        shared, local = RandomStream(seed, SHARED_STREAM), RandomStream(seed, LOCAL_STREAM)
        desc = dql_encode_vector(x, params, shared, local)
        x_hat = dql_decode_vector(desc, params, RandomStream(seed, SHARED_STREAM))
        bits += float(np.sum(signed_lengths(desc.m, code)))
        lines.extend(repr(float(v)) for v in x_hat)
    _write_lines(args.out, lines)
    print(f"{bits / (args.trials * len(x)):.3f} bits/sample", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = harness.SUITES if args.suite == "all" else (args.suite,)
    for s in suites:
        if s not in harness.SUITES:
            raise UsageError(f"unknown suite {s!r}; choose from {', '.join(harness.SUITES)} or all")
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        batches = list(pool.map(lambda s: harness.run_suite(s, args.seed, args.n), suites))
    reports = [r for batch in batches for r in batch]
    lines = [r.line() for r in reports]
    if args.suite in ("privacy", "all"):
        for r in reports:
            if r.name.startswith("privacy"):
                lines.append(f"# {r.name}: max Lipschitz ratio {r.statistic:.9g} vs ell*eps bound {r.threshold:.9g}")
    n_fail = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    _write_lines(None, lines)
    if args.report:
        _write_lines(args.report, lines)
    if args.summary:
        summary = {"suite": args.suite, "seed": args.seed, "reports": [r.as_dict() for r in reports]}
        Path(args.summary).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for r in reports:
        print(f"{r.name}: {r.seconds:.2f}s", file=sys.stderr)
    print(f"total {time.perf_counter() - start:.1f}s", file=sys.stderr)
    return EXIT_OK if n_fail == 0 else EXIT_FAILED


def cmd_sweep(args) -> int:
    ells = args.ell or DEFAULT_SWEEP_ELLS
    rows = harness.sweep(ells, args.bits, args.n, args.seed)
    csv_text = harness.sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    for r in rows:
        if r.error:
            print(f"range error: {r.error}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dql", description="Dyadic quantized Laplace mechanism")
    sub = p.add_subparsers(dest="command", required=True)

    def mech(sp):
        sp.add_argument("--eps", type=float, default=1.0, help="database privacy epsilon (Laplace scale 1/eps)")
        sp.add_argument("--ell", type=float, default=2.0, help="decoder privacy relaxation, > 1")
        sp.add_argument("--seed", type=_u64, default=0, help="pre-shared seed")
        sp.add_argument("--code", choices=sorted(CODE_NAMES), default="delta")

    def values(sp):
        sp.add_argument("values", nargs="*", help="input values")
        sp.add_argument("--input", help="newline-delimited file of input values")

    enc = sub.add_parser("encode", help="encode values into a .dql frame")
    mech(enc)
    values(enc)
    enc.add_argument("--local-seed", type=_u64, help="encoder-only seed (default: OS entropy)")
    enc.add_argument("--out", "-o", help="frame path (default frame.dql)")
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="decode a .dql frame")
    dec.add_argument("frame")
    dec.add_argument("--seed", type=_u64, default=0)
    dec.add_argument("--out", "-o")
    dec.set_defaults(func=cmd_decode)

    sim = sub.add_parser("simulate", help="encode and decode in memory")
    mech(sim)
    values(sim)
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--out", "-o")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="run verification suites")
    ver.add_argument("suite", nargs="?", default="all", help=f"{' | '.join(harness.SUITES)} | all")
    ver.add_argument("--seed", type=_u64, default=1)
    ver.add_argument("--n", type=int, help="sample size override")
    ver.add_argument("--jobs", type=int, default=1)
    ver.add_argument("--report", help="write the report lines here too")
    ver.add_argument("--summary", help="write a JSON summary here")
    ver.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="epsilon-vs-MSE sweep at a fixed rate")
    sw.add_argument("--ell", type=float, action="append", help="repeatable; default 2 3 4 6 8")
    sw.add_argument("--bits", type=float, default=5.0)
    sw.add_argument("--n", type=int, default=200_000)
    sw.add_argument("--seed", type=_u64, default=0)
    sw.add_argument("--out", "-o")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DQLError) as exc:
        print(f"dql {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"dql {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
