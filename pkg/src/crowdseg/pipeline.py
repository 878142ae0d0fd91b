"""End-to-end glue: dataset featurization, estimation, fusion harness.

The fusion harness mirrors the evaluation protocol of the annotation
campaign: per image, annotations are drawn one at a time from a shuffled
pool until ``lam`` of them pass the estimated-quality threshold; the
number of rejected draws r gives phi = lam + r, the price of quality
control. Quality-controlled methods fuse the accepted annotations, their
baselines fuse the first ``lam`` raw draws from the same pool order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .features import FeatureVector, extract_features
from .forest import Forest, ForestParams, TrainingSet, predict, r2_score, train
from .fusion import (
    FusionError,
    confidence_weighted_mv,
    majority_vote,
    staple,
    staple_qc,
)
from .geometry import Mask, Polygon, dice, rasterize
from .imaging import gaussian_gradient


def featurize_dataset(dataset: Dataset, sigma: float = 1.0):
    """Feature vectors for every dataset row, gradient fields cached per image.

    Returns (rows, vectors): the dataset rows in order and their features.
    """
    fields = {}
    vectors: list[FeatureVector] = []
    for row in dataset.rows:
        if row.image_id not in fields:
            fields[row.image_id] = gaussian_gradient(dataset.images[row.image_id], sigma)
        vectors.append(extract_features(row.stream, row.polygon, fields[row.image_id]))
    return list(dataset.rows), vectors


def training_set_from_dataset(dataset: Dataset, sigma: float = 1.0) -> TrainingSet:
    rows, vectors = featurize_dataset(dataset, sigma)
    return TrainingSet(
        features=np.stack([v.values for v in vectors]),
        targets=np.array([r.true_dsc for r in rows]),
        worker_ids=tuple(r.worker_id for r in rows),
        image_ids=tuple(r.image_id for r in rows),
    )


def estimate_dataset(dataset: Dataset, forest: Forest, sigma: float = 1.0):
    """dict (image_id, worker_id) -> estimated DSC for every row."""
    rows, vectors = featurize_dataset(dataset, sigma)
    X = np.stack([v.values for v in vectors])
    est = np.atleast_1d(predict(forest, X))
    return {
        (row.image_id, row.worker_id): float(s) for row, s in zip(rows, est)
    }


@dataclass(frozen=True)
class FusionOutcome:
    image_id: str
    repeat: int
    method: str
    lam: int
    phi: float
    dsc: float


_QC_METHODS = ("cw-mv", "staple-qc")
_BASELINES = ("mv", "staple")
ALL_METHODS = _BASELINES + _QC_METHODS


def _fuse(method: str, masks, s_hats, epsilon_t: float) -> Mask:
    if method == "mv":
        return majority_vote(masks)
    if method == "cw-mv":
        return confidence_weighted_mv(masks, s_hats, epsilon_t)
    if method == "staple":
        if len(masks) == 1:
            return Mask(masks[0].bits.copy())
        return staple(masks).mask
    if method == "staple-qc":
        return staple_qc(masks, s_hats, epsilon_t).mask
    raise FusionError(f"unknown fusion method {method!r}")


def run_fusion_harness(
    dataset: Dataset,
    estimates: dict,
    lambdas,
    epsilon_t: float = 0.9,
    methods=ALL_METHODS,
    seed: int = 0,
    repeats: int = 1,
) -> list[FusionOutcome]:
    """Per image and repeat: draw until lam accepted, fuse, score vs reference.

    When an image's pool runs out before ``lam`` annotations pass the
    threshold, the accepted subset is fused as-is; if nothing passed at
    all, the draw with the highest estimate stands in (phi then counts the
    whole pool). Baseline methods fuse the first ``lam`` raw draws of the
    same shuffled pool.
    """
    rng = np.random.default_rng(seed)
    outcomes: list[FusionOutcome] = []
    size_cache: dict[str, Mask] = {}
    for image_id in dataset.image_ids():
        rows = dataset.rows_for_image(image_id)
        reference = dataset.references[image_id]
        h, w = reference.bits.shape
        masks = []
        s_hats = []
        for row in rows:
            key = f"{image_id}/{row.worker_id}"
            if key not in size_cache:
                size_cache[key] = rasterize(row.polygon, w, h)
            masks.append(size_cache[key])
            s_hats.append(estimates[(image_id, row.worker_id)])
        pool = np.arange(len(rows))
        for rep in range(repeats):
            order = rng.permutation(pool)
            for lam in lambdas:
                accepted: list[int] = []
                drawn = 0
                for idx in order:
                    drawn += 1
                    if s_hats[idx] >= epsilon_t:
                        accepted.append(int(idx))
                        if len(accepted) == lam:
                            break
                if not accepted:
                    best = int(max(order, key=lambda i: s_hats[i]))
                    accepted = [best]
                phi = float(lam + (drawn - len(accepted)))
                raw = [int(i) for i in order[:lam]]
                for method in methods:
                    if method in _QC_METHODS:
                        chosen = accepted
                        # quality-filtered methods see already-accepted masks;
                        # the stand-in best draw may sit below the threshold
                        eps = (
                            epsilon_t
                            if all(s_hats[i] >= epsilon_t for i in chosen)
                            else min(s_hats[i] for i in chosen)
                        )
                        fused = _fuse(
                            method,
                            [masks[i] for i in chosen],
                            [s_hats[i] for i in chosen],
                            eps,
                        )
                    else:
                        fused = _fuse(method, [masks[i] for i in raw], None, epsilon_t)
                    outcomes.append(
                        FusionOutcome(
                            image_id=image_id,
                            repeat=rep,
                            method=method,
                            lam=int(lam),
                            phi=phi,
                            dsc=dice(fused, reference),
                        )
                    )
    return outcomes


def summarize_fusion(outcomes) -> list[dict]:
    """Median/mean DSC and mean phi per (method, lambda)."""
    keys = sorted({(o.method, o.lam) for o in outcomes})
    summary = []
    for method, lam in keys:
        ds = np.array([o.dsc for o in outcomes if o.method == method and o.lam == lam])
        phis = np.array([o.phi for o in outcomes if o.method == method and o.lam == lam])
        summary.append(
            {
                "method": method,
                "lam": lam,
                "phi": float(phis.mean()),
                "median_dsc": float(np.median(ds)),
                "mean_dsc": float(ds.mean()),
                "q25_dsc": float(np.percentile(ds, 25)),
                "q75_dsc": float(np.percentile(ds, 75)),
                "n": int(len(ds)),
            }
        )
    return summary


def write_fusion_report(path, outcomes, epsilon_t: float) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("image_id\trepeat\tmethod\tlambda\tphi\tepsilon_t\tdsc\n")
        for o in outcomes:
            fh.write(
                f"{o.image_id}\t{o.repeat}\t{o.method}\t{o.lam}"
                f"\t{o.phi!r}\t{epsilon_t!r}\t{o.dsc!r}\n"
            )


def write_fusion_summary(path, summary) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("method\tlambda\tphi\tmedian_dsc\tmean_dsc\tq25_dsc\tq75_dsc\tn\n")
        for s in summary:
            fh.write(
                f"{s['method']}\t{s['lam']}\t{s['phi']!r}\t{s['median_dsc']!r}"
                f"\t{s['mean_dsc']!r}\t{s['q25_dsc']!r}\t{s['q75_dsc']!r}\t{s['n']}\n"
            )


def training_size_sweep(
    train_set: TrainingSet,
    eval_set: TrainingSet,
    sizes,
    params: ForestParams | None = None,
    seed: int = 0,
    repeats: int = 3,
) -> list[dict]:
    """R^2 on the evaluation set as a function of training-subset size.

    Per size, ``repeats`` random row subsets are drawn (a single run when
    the subset is the whole set) and the mean/std of the R^2 scores
    reported; train and eval sets must come from disjoint workers/images.
    """
    rng = np.random.default_rng(seed)
    out = []
    n = len(train_set)
    for target_size in sizes:
        target_size = int(min(target_size, n))
        scores = []
        n_draws = 1 if target_size >= n else repeats
        for _ in range(n_draws):
            subset = train_set.subset(np.sort(rng.choice(n, size=target_size, replace=False)))
            forest = train(subset, params, seed=int(rng.integers(0, 2**31)))
            est = predict(forest, eval_set.features)
            scores.append(r2_score(eval_set.targets, est))
        out.append(
            {
                "n_train": target_size,
                "mean_r2": float(np.mean(scores)),
                "std_r2": float(np.std(scores)),
                "runs": n_draws,
            }
        )
    return out


def write_sweep_report(path, sweep) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("n_train\tmean_r2\tstd_r2\truns\n")
        for row in sweep:
            fh.write(f"{row['n_train']}\t{row['mean_r2']!r}\t{row['std_r2']!r}\t{row['runs']}\n")
