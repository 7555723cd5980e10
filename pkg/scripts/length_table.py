"""E[-ln delta_T] against its closed-form bound, and the resulting delta-code rate.

The rate column is the per-entry expected-length bound at x = 0, eps = 1.
"""

import argparse

import numpy as np

from dql.codec import CODE_DELTA
from dql.distributions import MechanismParams, dyadic_tables
from dql.harness import length_bound_for, mean_bits, neg_log_delta_bound


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ell", type=float, nargs="+", default=[1.1, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'ell':>6} {'delta0':>9} {'E[-ln d]':>9} {'bound':>9} {'bits':>7} {'L-bound':>8}")
    for ell in args.ell:
        params = MechanismParams(1.0, ell)
        e = dyadic_tables(params).expected_neg_log_delta()
        bits = mean_bits(params, np.zeros(args.n), args.seed, CODE_DELTA)
        L = length_bound_for(params, 0.0, e, CODE_DELTA)
        print(f"{ell:6g} {params.delta0:9.5f} {e:9.5f} {neg_log_delta_bound(ell):9.5f} {bits:7.3f} {L:8.3f}")


if __name__ == "__main__":
    main()
