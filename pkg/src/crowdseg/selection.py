"""Grouped cross-validation and greedy forward feature selection.

Fold assignment keeps workers AND images separated: the test rows of fold
f are those whose worker and image both hash to f, the training rows those
whose worker and image both avoid f. Rows with mixed assignment are usable
in neither role for that fold and are counted as dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import ForestError, ForestParams, TrainingSet, predict, r2_score, train


@dataclass(frozen=True)
class FoldResult:
    fold: int
    r2: float
    n_train: int
    n_test: int
    n_dropped: int


@dataclass(frozen=True)
class CVResult:
    folds: tuple[FoldResult, ...]
    oof_predictions: dict[int, float]  # row index -> out-of-fold estimate

    def r2_scores(self) -> list[float]:
        return [f.r2 for f in self.folds]

    def mean_r2(self) -> float:
        return float(np.mean(self.r2_scores()))

    def std_r2(self) -> float:
        return float(np.std(self.r2_scores()))


def grouped_folds(worker_ids, image_ids, k: int, seed: int):
    """Yield (train_rows, test_rows, n_dropped) index arrays per fold."""
    workers = sorted(set(worker_ids))
    images = sorted(set(image_ids))
    if len(workers) < k or len(images) < k:
        raise ForestError(
            f"need at least {k} distinct workers and images for {k} folds "
            f"(have {len(workers)} workers, {len(images)} images)"
        )
    rng = np.random.default_rng(seed)
    worker_fold = {w: i % k for i, w in enumerate(rng.permutation(workers))}
    image_fold = {im: i % k for i, im in enumerate(rng.permutation(images))}
    wf = np.array([worker_fold[w] for w in worker_ids])
    imf = np.array([image_fold[im] for im in image_ids])
    n = len(wf)
    for f in range(k):
        test = np.nonzero((wf == f) & (imf == f))[0]
        tr = np.nonzero((wf != f) & (imf != f))[0]
        yield tr, test, n - len(test) - len(tr)


def grouped_cv(
    data: TrainingSet, k: int = 10, params: ForestParams | None = None, seed: int = 0
) -> CVResult:
    """k-fold CV with joint worker/image separation; R^2 per fold.

    Per-fold R^2 is computed against the mean quality of the whole data
    set, so folds that happen to hold near-constant truth still score the
    estimator sensibly instead of blowing up on a tiny local variance.
    """
    folds = []
    oof: dict[int, float] = {}
    children = np.random.SeedSequence(seed).spawn(k)
    dataset_mean = float(data.targets.mean())
    for f, (tr, te, dropped) in enumerate(
        grouped_folds(data.worker_ids, data.image_ids, k, seed)
    ):
        if len(tr) == 0 or len(te) == 0:
            raise ForestError(f"fold {f} has an empty train or test side")
        forest = train(data.subset(tr), params, seed=int(children[f].generate_state(1)[0]))
        est = predict(forest, data.features[te])
        for row, value in zip(te.tolist(), np.atleast_1d(est).tolist()):
            oof[row] = value
        folds.append(
            FoldResult(
                fold=f,
                r2=r2_score(data.targets[te], est, baseline=dataset_mean),
                n_train=len(tr),
                n_test=len(te),
                n_dropped=dropped,
            )
        )
    return CVResult(folds=tuple(folds), oof_predictions=oof)


def write_cv_report(path, result: CVResult) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("fold\tr2\tn_train\tn_test\tdropped_rows\n")
        for f in result.folds:
            fh.write(f"{f.fold}\t{f.r2!r}\t{f.n_train}\t{f.n_test}\t{f.n_dropped}\n")


def _cv_mse(data: TrainingSet, feature_subset, params, cv_folds, seed) -> float:
    """Mean squared error over grouped folds using only the given features."""
    mses = []
    cols = np.asarray(feature_subset, dtype=np.intp)
    children = np.random.SeedSequence(seed).spawn(cv_folds)
    for f, (tr, te, _) in enumerate(
        grouped_folds(data.worker_ids, data.image_ids, cv_folds, seed)
    ):
        if len(tr) == 0 or len(te) == 0:
            continue
        truth = data.targets[te]
        if len(cols) == 0:
            est = np.full(len(te), data.targets[tr].mean())
        else:
            sub = TrainingSet(
                data.features[np.ix_(tr, cols)],
                data.targets[tr],
                tuple(data.worker_ids[i] for i in tr),
                tuple(data.image_ids[i] for i in tr),
                data.schema_version,
            )
            forest = train(sub, params, seed=int(children[f].generate_state(1)[0]))
            est = predict(forest, data.features[np.ix_(te, cols)])
        mses.append(float(np.mean((truth - np.atleast_1d(est)) ** 2)))
    if not mses:
        raise ForestError("no usable folds in feature-selection CV")
    return float(np.mean(mses))


def sfs_select(
    data: TrainingSet,
    max_features: int | None = None,
    penalty: float = 1e-4,
    params: ForestParams | None = None,
    cv_folds: int = 5,
    seed: int = 0,
) -> list[int]:
    """Sequential forward selection under an MSE + set-size criterion.

    At each step the remaining feature with the lowest grouped-CV mean
    squared error joins the set; the penalized criterion
    ``mse + penalty * |set|`` must improve, otherwise selection stops.
    Exact MSE ties go to the lower feature index. The default inner forest
    is kept small; pass ``params`` to override.
    """
    params = params or ForestParams(n_trees=25)
    d = data.n_features
    limit = d if max_features is None else min(max_features, d)
    selected: list[int] = []
    remaining = list(range(d))
    best_criterion = _cv_mse(data, [], params, cv_folds, seed)
    while remaining and len(selected) < limit:
        best_mse = None
        best_feat = None
        for f in remaining:  # ascending order realizes the index tie-break
            mse = _cv_mse(data, selected + [f], params, cv_folds, seed)
            if best_mse is None or mse < best_mse:
                best_mse = mse
                best_feat = f
        criterion = best_mse + penalty * (len(selected) + 1)
        if criterion >= best_criterion:
            break
        selected.append(best_feat)
        remaining.remove(best_feat)
        best_criterion = criterion
    return selected
