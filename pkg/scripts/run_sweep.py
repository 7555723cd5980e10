"""Epsilon-vs-MSE sweep at a fixed rate of bits per sample, x ~ Unif(-1, 1).

Writes the CSV and prints how far each row sits from the Laplace MSE 2/eps^2
and the log-log slope of the (epsilon, MSE) points.
"""

import argparse
import sys

from dql import harness


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ell", type=float, nargs="+", default=[2.0, 3.0, 4.0, 6.0, 8.0])
    ap.add_argument("--bits", type=float, default=5.0)
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()

    rows = harness.sweep(args.ell, args.bits, args.n, args.seed)
    with open(args.out, "w") as fh:
        fh.write(harness.sweep_csv(rows))
    for r in rows:
        if r.error:
            print(f"ell={r.ell:g}: {r.error}", file=sys.stderr)
            continue
        print(f"ell={r.ell:g} eps={r.epsilon:.4f} bits={r.bits_per_sample:.3f} MSE*eps^2/2={r.mse * r.epsilon**2 / 2:.4f}")
    print(f"slope d log eps / d log MSE = {harness.sweep_slope(rows):.4f} (Laplace: -0.5)")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
