"""Random-forest regression of segmentation quality from feature vectors.

Written from scratch so the contracts that matter for reproducibility are
pinned: bootstrap resampling of the same size, a random subset of
ceil(d/3) candidate features per split, candidate thresholds at midpoints
between consecutive sorted unique values, variance-minimizing splits with
ties broken by lowest feature index then lowest threshold, growth until
leaves are pure subject to a minimum leaf size, and a versioned flat-file
model format that round-trips exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import SCHEMA_VERSION


class ForestError(ValueError):
    pass


class SchemaMismatchError(ForestError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    min_samples_leaf: int = 3
    max_depth: int | None = None  # None = grow until pure
    max_features: int | None = None  # None = ceil(d / 3)

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ForestError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class TrainingSet:
    features: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,) in [0, 1]
    worker_ids: tuple[str, ...]
    image_ids: tuple[str, ...]
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if X.ndim != 2:
            raise ForestError("features must form a 2-d matrix")
        if len(y) != len(X) or len(self.worker_ids) != len(X) or len(self.image_ids) != len(X):
            raise ForestError("row counts of features/targets/ids differ")
        if y.size and (y.min() < 0.0 or y.max() > 1.0):
            raise ForestError("targets must lie in [0, 1]")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "worker_ids", tuple(self.worker_ids))
        object.__setattr__(self, "image_ids", tuple(self.image_ids))

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "TrainingSet":
        idx = np.asarray(idx)
        return TrainingSet(
            self.features[idx],
            self.targets[idx],
            tuple(self.worker_ids[i] for i in idx),
            tuple(self.image_ids[i] for i in idx),
            self.schema_version,
        )


@dataclass
class Tree:
    """Flat-array regression tree: leaf nodes have feature == -1."""

    feature: np.ndarray  # (m,) int32
    threshold: np.ndarray  # (m,) float64
    left: np.ndarray  # (m,) int32
    right: np.ndarray  # (m,) int32
    value: np.ndarray  # (m,) float64

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            goes_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(goes_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]


@dataclass
class Forest:
    trees: list[Tree]
    params: ForestParams
    n_features: int
    seed: int
    schema_version: str = SCHEMA_VERSION
    format_version: str = field(default="forest/v1", repr=False)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    n_candidates: int,
    rng: np.random.Generator,
) -> Tree:
    n, d = X.shape
    min_leaf = params.min_samples_leaf
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        ys = y[rows]
        mean = float(ys.mean())
        pure = bool(np.all(ys == ys[0]))
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        if len(rows) < 2 * min_leaf or pure or depth_capped:
            value[node] = mean
            continue
        cand = np.sort(rng.choice(d, size=n_candidates, replace=False))
        split = _best_split(X[rows][:, cand], ys, min_leaf)
        if split is None:
            value[node] = mean
            continue
        col, thr = split
        feat = int(cand[col])
        goes_left = X[rows, feat] <= thr
        feature[node] = feat
        threshold[node] = thr
        l_node = new_node()
        r_node = new_node()
        left[node] = l_node
        right[node] = r_node
        stack.append((r_node, rows[~goes_left], depth + 1))
        stack.append((l_node, rows[goes_left], depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def _best_split(Xc: np.ndarray, y: np.ndarray, min_leaf: int):
    """Variance-minimizing split over candidate columns.

    Returns (column, threshold) or None. Thresholds are midpoints between
    consecutive distinct sorted values; the first global argmin of the
    summed child SSE wins, which realizes the lowest-column / lowest-
    threshold tie-break (columns are passed in ascending feature order).
    """
    n, c = Xc.shape
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    csum2 = np.cumsum(ys * ys, axis=0)
    total = csum[-1]
    total2 = csum2[-1]
    k = np.arange(1, n, dtype=np.float64)[:, None]  # left child sizes
    left_sse = csum2[:-1] - csum[:-1] ** 2 / k
    right_sse = (total2 - csum2[:-1]) - (total - csum[:-1]) ** 2 / (n - k)
    sse = left_sse + right_sse
    valid = (k >= min_leaf) & (k <= n - min_leaf) & (xs[1:] > xs[:-1])
    sse = np.where(valid, sse, np.inf)
    flat = np.argmin(sse.T)  # scan column-major: lowest column wins ties
    col, pos = divmod(int(flat), n - 1)
    if not np.isfinite(sse[pos, col]):
        return None
    thr = 0.5 * (xs[pos, col] + xs[pos + 1, col])
    return col, float(thr)


def train(data: TrainingSet, params: ForestParams | None = None, seed: int = 0) -> Forest:
    """Fit one tree per bootstrap resample; deterministic for a given seed."""
    params = params or ForestParams()
    n = len(data)
    if n == 0:
        raise ForestError("cannot train on an empty data set")
    if n < 2 * params.min_samples_leaf:
        raise ForestError(
            f"need at least {2 * params.min_samples_leaf} rows, got {n}"
        )
    d = data.n_features
    n_candidates = params.max_features or math.ceil(d / 3)
    n_candidates = min(max(1, n_candidates), d)
    X = data.features
    y = data.targets
    trees = []
    for child in np.random.SeedSequence(seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[rows], y[rows], params, n_candidates, rng))
    return Forest(
        trees=trees,
        params=params,
        n_features=d,
        seed=seed,
        schema_version=data.schema_version,
    )


def predict(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Mean of the tree predictions, clamped to [0, 1]. X is (n, d) or (d,)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != forest.n_features:
        raise SchemaMismatchError(
            f"model expects {forest.n_features} features, got {X.shape[1]}"
        )
    acc = np.zeros(len(X))
    for tree in forest.trees:
        acc += tree.predict(X)
    out = np.clip(acc / len(forest.trees), 0.0, 1.0)
    return float(out[0]) if single else out


def r2_score(truth, est, baseline: float | None = None) -> float:
    """Coefficient of determination of the estimates against the truth.

    ``baseline`` overrides the reference mean in the denominator; by
    default it is the mean of ``truth`` itself. Cross-validation passes
    the mean quality of the whole data set here, so a test fold is scored
    against the global trivial predictor rather than its own (possibly
    near-constant) local mean.
    """
    s = np.asarray(truth, dtype=np.float64)
    e = np.asarray(est, dtype=np.float64)
    if s.shape != e.shape or s.size == 0:
        raise ForestError("need equal, non-empty truth/estimate vectors")
    mean = float(s.mean()) if baseline is None else float(baseline)
    denom = float(np.sum((s - mean) ** 2))
    if denom == 0.0:
        raise ForestError("R^2 undefined for all-identical truth values")
    return 1.0 - float(np.sum((s - e) ** 2)) / denom


# ---------------------------------------------------------------------------
# model persistence: versioned flat text listing of the node tuples

def save_forest(path, forest: Forest) -> None:
    p = forest.params
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            "forest/v1"
            f"\tn_trees={p.n_trees}"
            f"\tmin_samples_leaf={p.min_samples_leaf}"
            f"\tmax_depth={'none' if p.max_depth is None else p.max_depth}"
            f"\tmax_features={'none' if p.max_features is None else p.max_features}"
            f"\tn_features={forest.n_features}"
            f"\tseed={forest.seed}"
            f"\tschema_version={forest.schema_version}\n"
        )
        for t_idx, tree in enumerate(forest.trees):
            fh.write(f"tree\t{t_idx}\t{len(tree.feature)}\n")
            for i in range(len(tree.feature)):
                fh.write(
                    f"{int(tree.feature[i])}\t{float(tree.threshold[i])!r}"
                    f"\t{int(tree.left[i])}\t{int(tree.right[i])}"
                    f"\t{float(tree.value[i])!r}\n"
                )


def load_forest(path) -> Forest:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != "forest/v1":
            raise ForestError(f"{path}: not a forest/v1 model file")
        meta = dict(kv.split("=", 1) for kv in header[1:])
        params = ForestParams(
            n_trees=int(meta["n_trees"]),
            min_samples_leaf=int(meta["min_samples_leaf"]),
            max_depth=None if meta["max_depth"] == "none" else int(meta["max_depth"]),
            max_features=None
            if meta["max_features"] == "none"
            else int(meta["max_features"]),
        )
        trees = []
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "tree":
                n_nodes = int(parts[2])
                feature = np.empty(n_nodes, dtype=np.int32)
                threshold = np.empty(n_nodes, dtype=np.float64)
                left = np.empty(n_nodes, dtype=np.int32)
                right = np.empty(n_nodes, dtype=np.int32)
                value = np.empty(n_nodes, dtype=np.float64)
                for i in range(n_nodes):
                    cells = fh.readline().rstrip("\n").split("\t")
                    if len(cells) != 5:
                        raise ForestError(f"{path}: malformed node line")
                    feature[i] = int(cells[0])
                    threshold[i] = float(cells[1])
                    left[i] = int(cells[2])
                    right[i] = int(cells[3])
                    value[i] = float(cells[4])
                trees.append(Tree(feature, threshold, left, right, value))
            elif parts == [""]:
                continue
            else:
                raise ForestError(f"{path}: unexpected line {parts[0]!r}")
    if len(trees) != params.n_trees:
        raise ForestError(f"{path}: tree count mismatch")
    return Forest(
        trees=trees,
        params=params,
        n_features=int(meta["n_features"]),
        seed=int(meta["seed"]),
        schema_version=meta["schema_version"],
    )
