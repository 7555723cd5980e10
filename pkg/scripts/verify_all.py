"""Run every verification suite and write the report and a JSON summary."""

import argparse
import sys

from dql.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--report", default="verify_report.txt")
    ap.add_argument("--summary", default="verify_summary.json")
    args = ap.parse_args()
    argv = ["verify", "all", "--seed", str(args.seed), "--jobs", str(args.jobs)]
    sys.exit(cli_main(argv + ["--report", args.report, "--summary", args.summary]))


if __name__ == "__main__":
    main()
