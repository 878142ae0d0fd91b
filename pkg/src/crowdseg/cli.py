"""Command-line interface.

Subcommands cover the full pipeline: ``simulate`` a dataset, ``extract``
features, ``train`` the quality regressor, ``estimate`` unseen sessions,
``fuse`` annotations per image, ``cost`` out a campaign, and ``experiment``
for the harnesses (fusion-vs-lambda and R^2-vs-training-size tables).

Every command is deterministic given its ``--seed`` flags: rerunning with
identical inputs produces byte-identical artifacts.

Exit codes: 0 success, 2 usage error, 3 missing input file,
4 feature-schema mismatch, 5 malformed input file.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from .costs import CostError, break_even, evaluate, load_cost_params
from .features import FeatureError, SCHEMA_VERSION, read_feature_table, write_feature_table
from .forest import (
    ForestError,
    ForestParams,
    SchemaMismatchError,
    TrainingSet,
    load_forest,
    predict,
    save_forest,
    train,
)
from .pipeline import (
    ALL_METHODS,
    estimate_dataset,
    featurize_dataset,
    run_fusion_harness,
    summarize_fusion,
    training_set_from_dataset,
    training_size_sweep,
    write_fusion_report,
    write_fusion_summary,
    write_sweep_report,
)
from .selection import grouped_cv, write_cv_report
from .simulator import ARCHETYPE_KINDS, SimulationError, build_dataset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_SCHEMA_MISMATCH = 4
EXIT_BAD_FORMAT = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _require(path: Path, what: str) -> Path:
    if not Path(path).exists():
        raise CliError(f"missing-input: {what} not found: {path}", EXIT_MISSING_INPUT)
    return Path(path)


def parse_mix(spec: str) -> dict[str, float]:
    """'diligent=0.4,spammer=0.6' -> {'diligent': 0.4, 'spammer': 0.6}"""
    mix = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise CliError(f"bad-format: mix entry {part!r} needs kind=fraction", EXIT_USAGE)
        kind, _, frac = part.partition("=")
        kind = kind.strip()
        if kind not in ARCHETYPE_KINDS:
            raise CliError(f"bad-format: unknown archetype {kind!r}", EXIT_USAGE)
        mix[kind] = float(frac)
    if not mix:
        raise CliError("bad-format: empty archetype mix", EXIT_USAGE)
    return mix


def cmd_simulate(args) -> int:
    mix = parse_mix(args.mix)
    dataset = build_dataset(args.images, args.workers, mix, seed=args.seed, size=args.size)
    ds_mod.write_dataset(args.out, dataset)
    print(f"wrote {len(dataset.rows)} annotations over {args.images} images to {args.out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    dataset = ds_mod.load_dataset(_require(args.dataset, "dataset directory"))
    rows, vectors = featurize_dataset(dataset, sigma=args.sigma)
    write_feature_table(
        args.out,
        [(r.worker_id, r.image_id, v, r.true_dsc) for r, v in zip(rows, vectors)],
        with_labels=True,
    )
    print(f"wrote {len(rows)} feature rows to {args.out}")
    return EXIT_OK


def _load_training_set(path) -> TrainingSet:
    schema, workers, images, X, labels = read_feature_table(_require(path, "feature table"))
    if schema != SCHEMA_VERSION:
        raise CliError(
            f"schema-mismatch: feature table {path} has schema {schema}, "
            f"expected {SCHEMA_VERSION}",
            EXIT_SCHEMA_MISMATCH,
        )
    if labels is None:
        raise CliError(f"bad-format: {path} lacks the true_dsc column", EXIT_BAD_FORMAT)
    return TrainingSet(X, labels, tuple(workers), tuple(images))


def cmd_train(args) -> int:
    data = _load_training_set(args.features)
    params = ForestParams(
        n_trees=args.trees, min_samples_leaf=args.min_leaf, max_depth=args.max_depth
    )
    forest = train(data, params, seed=args.seed)
    save_forest(args.out, forest)
    print(f"trained {params.n_trees} trees on {len(data)} rows -> {args.out}")
    if args.cv_folds:
        result = grouped_cv(data, k=args.cv_folds, params=params, seed=args.seed)
        if args.cv_report:
            write_cv_report(args.cv_report, result)
        print(
            f"grouped {args.cv_folds}-fold CV: mean R^2 = {result.mean_r2():.4f}"
            f" +- {result.std_r2():.4f}"
        )
    return EXIT_OK


def cmd_estimate(args) -> int:
    forest = load_forest(_require(args.model, "model file"))
    schema, workers, images, X, _ = read_feature_table(_require(args.features, "feature table"))
    if schema != forest.schema_version:
        raise CliError(
            f"schema-mismatch: model expects {forest.schema_version}, "
            f"features carry {schema}",
            EXIT_SCHEMA_MISMATCH,
        )
    est = np.atleast_1d(predict(forest, X))
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("worker_id\timage_id\ts_hat\n")
        for w, im, s in zip(workers, images, est):
            fh.write(f"{w}\t{im}\t{float(s)!r}\n")
    print(f"estimated {len(est)} annotations -> {args.out}")
    return EXIT_OK


def read_estimates(path) -> dict:
    estimates = {}
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if header != "worker_id\timage_id\ts_hat":
            raise CliError(f"bad-format: {path} is not an estimates table", EXIT_BAD_FORMAT)
        for line in fh:
            if not line.strip():
                continue
            w, im, s = line.rstrip("\n").split("\t")
            estimates[(im, w)] = float(s)
    return estimates


def cmd_fuse(args) -> int:
    dataset = ds_mod.load_dataset(_require(args.dataset, "dataset directory"))
    estimates = read_estimates(_require(args.estimates, "estimates table"))
    missing = [
        (r.image_id, r.worker_id)
        for r in dataset.rows
        if (r.image_id, r.worker_id) not in estimates
    ]
    if missing:
        raise CliError(
            f"missing-input: {len(missing)} annotations lack estimates "
            f"(first: {missing[0]})",
            EXIT_MISSING_INPUT,
        )
    outcomes = run_fusion_harness(
        dataset,
        estimates,
        lambdas=[args.lam],
        epsilon_t=args.epsilon_t,
        methods=[args.method],
        seed=args.seed,
        repeats=args.repeats,
    )
    write_fusion_report(args.out, outcomes, args.epsilon_t)
    med = float(np.median([o.dsc for o in outcomes]))
    print(
        f"{args.method} lambda={args.lam}: median DSC {med:.4f} over "
        f"{len(outcomes)} fusions -> {args.out}"
    )
    return EXIT_OK


def cmd_cost(args) -> int:
    raw = json.loads(_require(args.params, "cost parameter file").read_text())
    if not isinstance(raw, dict):
        raise CliError("bad-format: cost params file must hold a JSON object", EXIT_BAD_FORMAT)
    params = load_cost_params(raw)
    methods = ("proposed", "baseline", "manual-grading")
    step = max(1, args.max_a // args.points)
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("a\t" + "\t".join(methods) + "\n")
        for a in range(0, args.max_a + 1, step):
            cells = [str(a)] + [
                repr(evaluate(m, params, a) * args.unit_cost) for m in methods
            ]
            fh.write("\t".join(cells) + "\n")
    print(f"wrote cost table (a = 0..{args.max_a}) to {args.out}")
    if args.break_even:
        first, _, second = args.break_even.partition(",")
        a_star = break_even(params, (first.strip(), second.strip()))
        print(f"break-even {first.strip()} vs {second.strip()}: "
              f"{'none' if a_star is None else a_star}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = json.loads(_require(args.config, "experiment config").read_text())
    out_dir = Path(config.get("out_dir", "experiment-out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("seed", 0))
    sigma = float(config.get("sigma", 1.0))
    epsilon_t = float(config.get("epsilon_t", 0.9))
    lambdas = [int(x) for x in config.get("lambdas", [1, 3, 5])]
    forest_cfg = config.get("forest", {})
    params = ForestParams(
        n_trees=int(forest_cfg.get("n_trees", 100)),
        min_samples_leaf=int(forest_cfg.get("min_samples_leaf", 3)),
    )

    def dataset_from(cfg_key: str, default_seed: int):
        cfg = config[cfg_key]
        if isinstance(cfg, str):
            return ds_mod.load_dataset(_require(cfg, f"{cfg_key} dataset"))
        sim = build_dataset(
            int(cfg["images"]),
            int(cfg["workers"]),
            parse_mix(cfg["mix"]),
            seed=int(cfg.get("seed", default_seed)),
            size=int(cfg.get("size", 96)),
        )
        return ds_mod.dataset_from_memory(sim)

    train_ds = dataset_from("train_dataset", seed + 1)
    eval_ds = dataset_from("eval_dataset", seed + 2)
    train_set = training_set_from_dataset(train_ds, sigma)
    eval_set = training_set_from_dataset(eval_ds, sigma)

    forest = train(train_set, params, seed=seed)
    estimates = estimate_dataset(eval_ds, forest, sigma)
    outcomes = run_fusion_harness(
        eval_ds,
        estimates,
        lambdas=lambdas,
        epsilon_t=epsilon_t,
        seed=seed,
        repeats=int(config.get("repeats", 1)),
    )
    write_fusion_report(out_dir / "fusion.tsv", outcomes, epsilon_t)
    write_fusion_summary(out_dir / "fusion_summary.tsv", summarize_fusion(outcomes))

    sizes = config.get("training_sizes", [])
    if sizes:
        sweep = training_size_sweep(
            train_set,
            eval_set,
            [int(s) for s in sizes],
            params,
            seed=seed,
            repeats=int(config.get("sweep_repeats", 3)),
        )
        write_sweep_report(out_dir / "r2_vs_size.tsv", sweep)
    print(f"experiment artifacts in {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdseg",
        description="clickstream-based quality control for crowd segmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic annotation dataset")
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--workers", type=int, required=True)
    p.add_argument("--mix", required=True, help="kind=frac[,kind=frac...]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=96, help="square image size in px")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="compute feature vectors for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit the quality regressor")
    p.add_argument("--features", required=True)
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--min-leaf", type=int, default=3)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cv-folds", type=int, default=0, help="also run grouped CV")
    p.add_argument("--cv-report", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="estimate DSC for unseen sessions")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fuse", help="merge annotations per image")
    p.add_argument("--dataset", required=True)
    p.add_argument("--estimates", required=True)
    p.add_argument("--method", choices=list(ALL_METHODS), default="cw-mv")
    p.add_argument("--lambda", dest="lam", type=int, default=3)
    p.add_argument("--epsilon-t", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("cost", help="campaign cost table and break-even")
    p.add_argument("--params", required=True, help="JSON file of cost parameters")
    p.add_argument("--max-a", type=int, default=10000)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--unit-cost", type=float, default=1.0)
    p.add_argument("--break-even", default=None, metavar="FIRST,SECOND")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("experiment", help="fusion and training-size harnesses")
    p.add_argument("--config", required=True, help="JSON experiment description")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SchemaMismatchError as exc:
        print(f"error: schema-mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA_MISMATCH
    except (ForestError, FeatureError, CostError, SimulationError, ds_mod.DatasetError) as exc:
        print(f"error: bad-format: {exc}", file=sys.stderr)
        return EXIT_BAD_FORMAT
    except FileNotFoundError as exc:
        print(f"error: missing-input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT


if __name__ == "__main__":
    sys.exit(main())
