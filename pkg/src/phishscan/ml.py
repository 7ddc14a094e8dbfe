"""In-house classifiers over the 22-slot feature vector.

Three algorithms share one contract: fit on (X, y) with per-class weights,
score a vector with the probability-like chance it is phishing, and
round-trip exactly through JSON. The value -1.0 marks a missing feature;
trees treat it as an ordinary number while the Gaussian model skips it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SENTINEL = -1.0
MODEL_FORMAT_VERSION = 1
VARIANCE_FLOOR = 1e-9

SAFE, PHISHING = 0, 1

FEATURE_NAMES: tuple[str, ...] = (
    # URL group
    "url_length",
    "num_dots",
    "num_subdomains",
    "num_redirects",
    "avg_hop_levenshtein",
    "conditional_redirect",
    # domain registration group
    "registrar_code",
    "ownership_period_days",
    "domain_to_account_days",
    # tweet content group
    "num_hashtags",
    "num_mentions",
    "num_trending_hashtags",
    "retweet_count",
    "tweet_length",
    "first_hashtag_position",
    # account graph group
    "followers_count",
    "followees_count",
    "follower_followee_ratio",
    "is_listed",
    "account_age_days",
    "has_description",
    "statuses_count",
)

GROUP_ORDER: tuple[str, ...] = ("url", "whois", "tweet", "network")
GROUP_BOUNDS: dict[str, tuple[int, int]] = {
    "url": (0, 6),
    "whois": (6, 9),
    "tweet": (9, 15),
    "network": (15, 22),
}
FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    name: FEATURE_NAMES[lo:hi] for name, (lo, hi) in GROUP_BOUNDS.items()
}


class ModelError(Exception):
    pass


class ModelFormatError(ModelError):
    pass


def class_weights_balanced(y) -> dict[int, float]:
    """w_c = n / (2 * n_c), so each class carries half the total weight."""
    y = np.asarray(y)
    n = len(y)
    n1 = int(y.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise ModelError("both classes must be present to compute weights")
    return {SAFE: n / (2 * n0), PHISHING: n / (2 * n1)}


def _validate_xy(X, y, feature_names):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2:
        raise ModelError(f"X must be 2-d, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise ModelError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if X.shape[1] != len(feature_names):
        raise ModelError(f"{X.shape[1]} columns but {len(feature_names)} feature names")
    if not np.isin(y, (SAFE, PHISHING)).all():
        raise ModelError("labels must be 0 (safe) or 1 (phishing)")
    return X, y


# --- Gaussian model ---


class GaussianScorer:
    """Per-class, per-feature normal densities with weighted priors.

    A feature participates only when both classes observed it at least once
    during training; a missing value at prediction time drops that feature's
    term for the row.
    """

    def __init__(self):
        self.log_prior = None  # (2,)
        self.theta = None  # (2, d) means
        self.var = None  # (2, d) variances, floored
        self.usable = None  # (d,) bool

    def fit(self, X, y, class_weights):
        n, d = X.shape
        self.theta = np.zeros((2, d))
        self.var = np.ones((2, d))
        observed = np.zeros((2, d), dtype=bool)
        for c in (SAFE, PHISHING):
            rows = X[y == c]
            present = rows != SENTINEL
            counts = present.sum(axis=0)
            observed[c] = counts > 0
            for j in np.nonzero(observed[c])[0]:
                vals = rows[present[:, j], j]
                self.theta[c, j] = vals.mean()
                self.var[c, j] = max(vals.var(), VARIANCE_FLOOR)
        self.usable = observed[SAFE] & observed[PHISHING]

        weighted = np.array(
            [class_weights[c] * np.count_nonzero(y == c) for c in (SAFE, PHISHING)], dtype=float
        )
        self.log_prior = np.log(weighted / weighted.sum())
        return self

    def score_many(self, X) -> np.ndarray:
        mask = (X != SENTINEL) & self.usable  # (n, d)
        ll = np.empty((2, X.shape[0]))
        for c in (SAFE, PHISHING):
            terms = -0.5 * (
                np.log(2 * math.pi * self.var[c]) + (X - self.theta[c]) ** 2 / self.var[c]
            )
            ll[c] = self.log_prior[c] + np.where(mask, terms, 0.0).sum(axis=1)
        return 1.0 / (1.0 + np.exp(np.clip(ll[SAFE] - ll[PHISHING], -700, 700)))


# --- decision tree ---


class _TreeArrays:
    """Flat node storage: feature -1 marks a leaf."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[list[int]] = []

    def alloc(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([0, 0])
        return len(self.feature) - 1

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        return self


def _weighted_gini(w0: float, w1: float) -> float:
    total = w0 + w1
    p0 = w0 / total
    p1 = w1 / total
    return 1.0 - p0 * p0 - p1 * p1


def _best_split(X, ysub, idx, feature_ids, w0, w1):
    """Highest weighted-impurity-decrease split over the given features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; rows with value <= threshold go left. Ties resolve to the lowest
    feature index, then the lowest threshold. Returns (decrease, j, thr) or
    None when no split helps.
    """
    n = len(idx)
    n1 = int(ysub.sum())
    n0 = n - n1
    W0p, W1p = w0 * n0, w1 * n1
    Wp = W0p + W1p
    parent_gini = _weighted_gini(W0p, W1p)

    best = None
    for j in feature_ids:
        col = X[idx, j]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sy = ysub[order]
        cut = np.nonzero(sv[:-1] < sv[1:])[0]
        if cut.size == 0:
            continue
        c1 = np.cumsum(sy)
        n1L = c1[cut].astype(float)
        nL = (cut + 1).astype(float)
        n0L = nL - n1L
        W0L, W1L = w0 * n0L, w1 * n1L
        W0R, W1R = W0p - W0L, W1p - W1L
        WL = W0L + W1L
        WR = W0R + W1R
        giniL = 1.0 - (W0L / WL) ** 2 - (W1L / WL) ** 2
        giniR = 1.0 - (W0R / WR) ** 2 - (W1R / WR) ** 2
        decrease = parent_gini - (WL * giniL + WR * giniR) / Wp
        k = int(np.argmax(decrease))  # first max: the lowest qualifying threshold
        if best is None or decrease[k] > best[0]:
            thr = (sv[cut[k]] + sv[cut[k] + 1]) / 2.0
            best = (float(decrease[k]), int(j), float(thr))

    if best is None or best[0] <= 0.0:
        return None
    return best


class DecisionTree:
    """Binary CART over numeric features with weighted Gini impurity."""

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2,
                 max_features: int | None = None, rng=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.rng = rng
        self.tree: _TreeArrays | None = None
        self._scores = None

    def fit(self, X, y, class_weights):
        w0, w1 = class_weights[SAFE], class_weights[PHISHING]
        d = X.shape[1]
        tree = _TreeArrays()
        root = tree.alloc()
        stack = [(np.arange(len(y)), 0, root)]
        while stack:
            idx, depth, nid = stack.pop()
            ysub = y[idx]
            n1 = int(ysub.sum())
            n0 = len(idx) - n1
            tree.counts[nid] = [n0, n1]

            if (
                n0 == 0
                or n1 == 0
                or len(idx) < self.min_samples_split
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue

            if self.max_features is not None and self.max_features < d:
                feature_ids = np.sort(self.rng.choice(d, size=self.max_features, replace=False))
            else:
                feature_ids = range(d)

            split = _best_split(X, ysub, idx, feature_ids, w0, w1)
            if split is None:
                continue
            _, j, thr = split
            going_left = X[idx, j] <= thr
            tree.feature[nid] = j
            tree.threshold[nid] = thr
            lid = tree.alloc()
            rid = tree.alloc()
            tree.left[nid] = lid
            tree.right[nid] = rid
            stack.append((idx[~going_left], depth + 1, rid))
            stack.append((idx[going_left], depth + 1, lid))

        self.tree = tree.finalize()
        self._scores = _leaf_scores(self.tree.counts, w0, w1)
        return self

    def score_many(self, X) -> np.ndarray:
        t = self.tree
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = t.feature[node]
            interior = feat >= 0
            if not interior.any():
                break
            vals = X[rows, np.where(interior, feat, 0)]
            nxt = np.where(vals <= t.threshold[node], t.left[node], t.right[node])
            node = np.where(interior, nxt, node)
        return self._scores[node]

    @property
    def n_nodes(self) -> int:
        return len(self.tree.feature)

    def depth(self) -> int:
        depths = {0: 0}
        out = 0
        for nid in range(self.n_nodes):
            d = depths[nid]
            out = max(out, d)
            if self.tree.feature[nid] >= 0:
                depths[int(self.tree.left[nid])] = d + 1
                depths[int(self.tree.right[nid])] = d + 1
        return out


def _leaf_scores(counts, w0: float, w1: float) -> np.ndarray:
    weighted0 = w0 * counts[:, 0]
    weighted1 = w1 * counts[:, 1]
    return weighted1 / (weighted0 + weighted1)


# --- random forest ---


class RandomForest:
    """Bagged trees with per-split feature subsampling.

    Each tree trains on a bootstrap sample the size of the input and
    considers ceil(sqrt(d)) features per split. The forest's score is the
    fraction of trees voting phishing.
    """

    def __init__(self, n_trees: int = 100, max_depth: int | None = None,
                 min_samples_split: int = 2, rng_seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.rng_seed = rng_seed
        self.max_features: int | None = None
        self.trees: list[DecisionTree] = []

    def fit(self, X, y, class_weights):
        if self.n_trees < 1:
            raise ModelError("a forest needs at least one tree")
        n, d = X.shape
        self.max_features = math.isqrt(d) if math.isqrt(d) ** 2 == d else math.isqrt(d) + 1
        self.trees = []
        for seq in np.random.SeedSequence(self.rng_seed).spawn(self.n_trees):
            rng = np.random.default_rng(seq)
            sample = rng.integers(0, n, size=n)
            tree = DecisionTree(
                max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                max_features=self.max_features,
                rng=rng,
            )
            tree.fit(X[sample], y[sample], class_weights)
            self.trees.append(tree)
        return self

    def score_many(self, X) -> np.ndarray:
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += tree.score_many(X) >= 0.5
        return votes / len(self.trees)


# --- the trained-model wrapper ---

ALGORITHMS = ("naive_bayes", "decision_tree", "random_forest")


@dataclass
class TrainedModel:
    algorithm: str
    estimator: object
    feature_names: tuple[str, ...]
    class_weights: dict[int, float]
    threshold: float = 0.5
    registrar_freq_table: dict[str, int] = field(default_factory=dict)
    training_meta: dict = field(default_factory=dict)

    def score_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ModelError(f"expected (n, {len(self.feature_names)}) input, got {X.shape}")
        return self.estimator.score_many(X)

    def score(self, vector) -> float:
        return float(self.score_many(np.asarray(vector, dtype=float).reshape(1, -1))[0])

    def predict_many(self, X) -> np.ndarray:
        return (self.score_many(X) >= self.threshold).astype(np.int64)

    def predict(self, vector) -> int:
        return int(self.score(vector) >= self.threshold)


def train_model(
    algorithm: str,
    X,
    y,
    *,
    feature_names=FEATURE_NAMES,
    class_weights: dict[int, float] | None = None,
    rng_seed: int = 0,
    n_trees: int = 100,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    threshold: float = 0.5,
    registrar_freq_table: dict[str, int] | None = None,
) -> TrainedModel:
    if algorithm not in ALGORITHMS:
        raise ModelError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    X, y = _validate_xy(X, y, feature_names)
    if class_weights is None:
        class_weights = class_weights_balanced(y)

    if algorithm == "naive_bayes":
        estimator = GaussianScorer().fit(X, y, class_weights)
    elif algorithm == "decision_tree":
        estimator = DecisionTree(max_depth=max_depth, min_samples_split=min_samples_split)
        estimator.fit(X, y, class_weights)
    else:
        estimator = RandomForest(
            n_trees=n_trees,
            max_depth=max_depth,
            min_samples_split=min_samples_split,
            rng_seed=rng_seed,
        )
        estimator.fit(X, y, class_weights)

    return TrainedModel(
        algorithm=algorithm,
        estimator=estimator,
        feature_names=tuple(feature_names),
        class_weights=dict(class_weights),
        threshold=threshold,
        registrar_freq_table=dict(registrar_freq_table or {}),
        training_meta={
            "n_samples": int(len(y)),
            "n_phishing": int(y.sum()),
            "rng_seed": int(rng_seed),
            "timestamp": None,
        },
    )


# --- permutation importance ---


@dataclass
class ImportanceReport:
    scores: dict[str, float]  # feature -> mean error increase when permuted
    ranking: tuple[str, ...]  # highest increase first; canonical order on ties
    baseline_error: float


def permutation_importance(model: TrainedModel, X, y, rng_seed=0, n_repeats: int = 5) -> ImportanceReport:
    """How much each feature's scrambling hurts accuracy.

    The score per feature is the mean (over n_repeats shuffles) of the
    misclassification-rate increase relative to the unshuffled baseline.
    rng_seed may be an int or an existing numpy Generator.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(X) < 10:
        raise ModelError(f"need at least 10 rows to estimate importance, got {len(X)}")
    rng = rng_seed if hasattr(rng_seed, "permutation") else np.random.default_rng(rng_seed)
    baseline = float((model.predict_many(X) != y).mean())

    scores = {}
    work = X.copy()
    for j, name in enumerate(model.feature_names):
        saved = work[:, j].copy()
        total = 0.0
        for _ in range(n_repeats):
            work[:, j] = saved[rng.permutation(len(saved))]
            total += float((model.predict_many(work) != y).mean())
        work[:, j] = saved
        scores[name] = total / n_repeats - baseline

    order = {name: i for i, name in enumerate(model.feature_names)}
    ranking = tuple(sorted(scores, key=lambda f: (-scores[f], order[f])))
    return ImportanceReport(scores=scores, ranking=ranking, baseline_error=baseline)


# --- serialization ---


def _tree_to_json(tree: DecisionTree) -> dict:
    t = tree.tree
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "children_left": t.left.tolist(),
        "children_right": t.right.tolist(),
        "counts": t.counts.tolist(),
    }


def _tree_from_json(doc: dict, params: dict, class_weights) -> DecisionTree:
    tree = DecisionTree(
        max_depth=params.get("max_depth"),
        min_samples_split=params.get("min_samples_split", 2),
        max_features=params.get("max_features"),
    )
    arrays = _TreeArrays()
    arrays.feature = doc["feature"]
    arrays.threshold = doc["threshold"]
    arrays.left = doc["children_left"]
    arrays.right = doc["children_right"]
    arrays.counts = doc["counts"]
    tree.tree = arrays.finalize()
    tree._scores = _leaf_scores(tree.tree.counts, class_weights[SAFE], class_weights[PHISHING])
    return tree


def model_to_json(model: TrainedModel) -> dict:
    est = model.estimator
    if model.algorithm == "naive_bayes":
        parameters = {
            "log_prior": est.log_prior.tolist(),
            "theta": est.theta.tolist(),
            "var": est.var.tolist(),
            "usable": est.usable.tolist(),
        }
    elif model.algorithm == "decision_tree":
        parameters = {
            "max_depth": est.max_depth,
            "min_samples_split": est.min_samples_split,
            "tree": _tree_to_json(est),
        }
    else:
        parameters = {
            "n_trees": est.n_trees,
            "max_depth": est.max_depth,
            "min_samples_split": est.min_samples_split,
            "max_features": est.max_features,
            "rng_seed": est.rng_seed,
            "trees": [_tree_to_json(t) for t in est.trees],
        }
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "algorithm": model.algorithm,
        "feature_names": list(model.feature_names),
        "class_weights": {"safe": model.class_weights[SAFE], "phishing": model.class_weights[PHISHING]},
        "threshold": model.threshold,
        "registrar_freq_table": model.registrar_freq_table,
        "parameters": parameters,
        "training_meta": model.training_meta,
    }


def model_from_json(doc: dict) -> TrainedModel:
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"model format_version {version}, expected {MODEL_FORMAT_VERSION}")
    algorithm = doc.get("algorithm")
    if algorithm not in ALGORITHMS:
        raise ModelFormatError(f"unknown algorithm {algorithm!r}")
    feature_names = tuple(doc["feature_names"])
    if len(set(feature_names)) != len(feature_names):
        raise ModelFormatError("feature_names contains duplicates")
    class_weights = {
        SAFE: float(doc["class_weights"]["safe"]),
        PHISHING: float(doc["class_weights"]["phishing"]),
    }
    params = doc["parameters"]

    if algorithm == "naive_bayes":
        est = GaussianScorer()
        est.log_prior = np.asarray(params["log_prior"], dtype=float)
        est.theta = np.asarray(params["theta"], dtype=float)
        est.var = np.asarray(params["var"], dtype=float)
        est.usable = np.asarray(params["usable"], dtype=bool)
        if est.theta.shape != (2, len(feature_names)):
            raise ModelFormatError("parameter shapes do not match feature_names")
    elif algorithm == "decision_tree":
        est = _tree_from_json(params["tree"], params, class_weights)
    else:
        if not params.get("trees"):
            raise ModelFormatError("random_forest model has no trees")
        est = RandomForest(
            n_trees=params["n_trees"],
            max_depth=params.get("max_depth"),
            min_samples_split=params.get("min_samples_split", 2),
            rng_seed=params.get("rng_seed", 0),
        )
        est.max_features = params.get("max_features")
        est.trees = [_tree_from_json(t, params, class_weights) for t in params["trees"]]

    return TrainedModel(
        algorithm=algorithm,
        estimator=est,
        feature_names=feature_names,
        class_weights=class_weights,
        threshold=float(doc.get("threshold", 0.5)),
        registrar_freq_table=dict(doc.get("registrar_freq_table", {})),
        training_meta=dict(doc.get("training_meta", {})),
    )


def save_model(model: TrainedModel, path: str | Path) -> None:
    """JSON on disk; floats keep full repr precision so load() is exact."""
    Path(path).write_text(json.dumps(model_to_json(model), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model from {path}: {exc}") from exc
    return model_from_json(doc)
