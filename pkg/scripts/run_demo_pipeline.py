#!/usr/bin/env python3
"""Run the whole pipeline end to end on a small simulated campaign.

Produces, under --out (default ./demo-out):
  dataset/            simulated images, references, clickstreams, polygons
  features.tsv        extracted feature matrix with true DSC labels
  model.tsv           trained quality regressor
  estimates.tsv       estimated DSC per annotation
  fusion.tsv          per-image confidence-weighted fusion results
"""
import argparse
import sys

from crowdseg.cli import main as cli


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo-out")
    ap.add_argument("--images", type=int, default=12)
    ap.add_argument("--workers", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    out = args.out
    mix = "diligent=0.4,sloppy=0.2,spammer=0.25,bounding-box=0.1,inverted=0.05"
    steps = [
        ["simulate", "--images", str(args.images), "--workers", str(args.workers),
         "--mix", mix, "--seed", str(args.seed), "--out", f"{out}/dataset"],
        ["extract", "--dataset", f"{out}/dataset", "--out", f"{out}/features.tsv"],
        ["train", "--features", f"{out}/features.tsv", "--trees", "150",
         "--seed", str(args.seed), "--cv-folds", "5",
         "--cv-report", f"{out}/cv.tsv", "--out", f"{out}/model.tsv"],
        ["estimate", "--model", f"{out}/model.tsv",
         "--features", f"{out}/features.tsv", "--out", f"{out}/estimates.tsv"],
        ["fuse", "--dataset", f"{out}/dataset", "--estimates", f"{out}/estimates.tsv",
         "--method", "cw-mv", "--lambda", "3", "--seed", str(args.seed),
         "--out", f"{out}/fusion.tsv"],
    ]
    for step in steps:
        print(f"$ crowdseg {' '.join(step)}")
        code = cli(step)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
