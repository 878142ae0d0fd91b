#!/usr/bin/env python3
"""Cost-vs-requests tables comparing the campaign strategies.

Writes two plot-ready TSV tables: the quality-estimation campaign against
interleaved-reference majority voting (30% spam, 10k training annotations,
one QC task every 10 annotations), and against manual grading at ~25%
spam. Also prints the break-even request counts.
"""
import argparse
import sys

from crowdseg.costs import CostParams, break_even, evaluate


def table(path, rows, header):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(repr(c) if isinstance(c, float) else str(c) for c in row) + "\n")
    print(f"wrote {path}")


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-a", type=int, default=20000)
    ap.add_argument("--step", type=int, default=250)
    ap.add_argument("--out-prefix", default="cost")
    args = ap.parse_args(argv)

    proposed = CostParams(s=0.3, a_t=10_000, a_mv=1.0)
    baseline = CostParams(a_mv=3.0, a_w=10, a_r=100)
    manual = CostParams(s=0.249)

    grid = range(0, args.max_a + 1, args.step)
    table(
        f"{args.out_prefix}_vs_baseline.tsv",
        [
            (a, evaluate("proposed", proposed, a), evaluate("baseline", baseline, a))
            for a in grid
        ],
        ["a", "proposed", "baseline"],
    )
    table(
        f"{args.out_prefix}_vs_manual.tsv",
        [
            (a, evaluate("proposed", proposed, a), evaluate("manual-grading", manual, a))
            for a in grid
        ],
        ["a", "proposed", "manual_grading"],
    )
    for other, params in (("baseline", baseline), ("manual-grading", manual)):
        a_star = break_even(proposed, ("proposed", other), params)
        print(f"break-even proposed vs {other}: {'none' if a_star is None else a_star}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
