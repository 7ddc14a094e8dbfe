"""Metrics, cross-validation, ablation, and synthetic benchmark data.

Precision, recall, and accuracy are computed in exact rational arithmetic
and only converted to float at the edge, so results never drift with
evaluation order. Cross-validation is stratified and fully seeded.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .ml import FEATURE_NAMES, GROUP_BOUNDS, TrainedModel, train_model


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int  # phishing called phishing
    fn: int  # phishing called safe
    fp: int  # safe called phishing
    tn: int  # safe called safe

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        if y_true.shape != y_pred.shape:
            raise EvaluationError("prediction and truth lengths differ")
        return cls(
            tp=int(((y_true == 1) & (y_pred == 1)).sum()),
            fn=int(((y_true == 1) & (y_pred == 0)).sum()),
            fp=int(((y_true == 0) & (y_pred == 1)).sum()),
            tn=int(((y_true == 0) & (y_pred == 0)).sum()),
        )

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fn=self.fn + other.fn,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class Metrics:
    precision: float | None  # None when nothing was called phishing
    recall: float | None  # None when no phishing is present
    accuracy: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "accuracy": self.accuracy}


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Exact-rational precision tp/(tp+fp), recall tp/(tp+fn), and accuracy
    (tp+tn)/total. Zero-denominator ratios are undefined and come back None."""
    if cm.total == 0:
        raise EvaluationError("empty confusion matrix")
    precision = float(Fraction(cm.tp, cm.tp + cm.fp)) if cm.tp + cm.fp else None
    recall = float(Fraction(cm.tp, cm.tp + cm.fn)) if cm.tp + cm.fn else None
    accuracy = float(Fraction(cm.tp + cm.tn, cm.total))
    return Metrics(precision=precision, recall=recall, accuracy=accuracy)


def evaluate_model(model: TrainedModel, X, y) -> tuple[ConfusionMatrix, Metrics]:
    cm = ConfusionMatrix.from_predictions(y, model.predict_many(np.asarray(X, dtype=float)))
    return cm, compute_metrics(cm)


# --- cross-validation ---


@dataclass(frozen=True)
class FoldResult:
    fold: int
    matrix: ConfusionMatrix
    metrics: Metrics


@dataclass(frozen=True)
class CrossValidationReport:
    algorithm: str
    n_folds: int
    rng_seed: int
    folds: tuple[FoldResult, ...]
    matrix: ConfusionMatrix  # all folds pooled
    metrics: Metrics

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n_folds": self.n_folds,
            "rng_seed": self.rng_seed,
            "folds": [
                {
                    "fold": f.fold,
                    "matrix": {"tp": f.matrix.tp, "fn": f.matrix.fn,
                               "fp": f.matrix.fp, "tn": f.matrix.tn},
                    "metrics": f.metrics.to_json(),
                }
                for f in self.folds
            ],
            "matrix": {"tp": self.matrix.tp, "fn": self.matrix.fn,
                       "fp": self.matrix.fp, "tn": self.matrix.tn},
            "metrics": self.metrics.to_json(),
        }


def stratified_folds(y, n_folds: int, rng_seed: int) -> list[np.ndarray]:
    """Test-index arrays, one per fold, with per-class round-robin dealing
    after a seeded shuffle. Every class must have at least n_folds members."""
    y = np.asarray(y, dtype=int)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    rng = np.random.default_rng(rng_seed)
    for c in (0, 1):
        idx = np.nonzero(y == c)[0]
        if len(idx) < n_folds:
            raise EvaluationError(
                f"class {c} has {len(idx)} samples, fewer than {n_folds} folds"
            )
        shuffled = idx.copy()
        rng.shuffle(shuffled)
        for i in range(n_folds):
            folds[i].extend(shuffled[i::n_folds].tolist())
    return [np.sort(np.asarray(f, dtype=int)) for f in folds]


def _fold_seed(rng_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([rng_seed, fold]).generate_state(1)[0])


def cross_validate(
    algorithm: str,
    X,
    y,
    *,
    n_folds: int = 5,
    rng_seed: int = 0,
    feature_names=FEATURE_NAMES,
    **train_params,
) -> CrossValidationReport:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    fold_tests = stratified_folds(y, n_folds, rng_seed)

    results = []
    pooled = ConfusionMatrix(0, 0, 0, 0)
    for fold, test_idx in enumerate(fold_tests):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        model = train_model(
            algorithm,
            X[mask],
            y[mask],
            feature_names=feature_names,
            rng_seed=_fold_seed(rng_seed, fold),
            **train_params,
        )
        cm = ConfusionMatrix.from_predictions(y[test_idx], model.predict_many(X[test_idx]))
        results.append(FoldResult(fold=fold, matrix=cm, metrics=compute_metrics(cm)))
        pooled = pooled + cm

    return CrossValidationReport(
        algorithm=algorithm,
        n_folds=n_folds,
        rng_seed=rng_seed,
        folds=tuple(results),
        matrix=pooled,
        metrics=compute_metrics(pooled),
    )


# --- ablation over cumulative feature groups ---

ABLATION_STAGES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("F1", ("url",)),
    ("F1+F2", ("url", "whois")),
    ("F1+F2+F3", ("url", "whois", "tweet")),
    ("F1+F2+F3+F4", ("url", "whois", "tweet", "network")),
)


@dataclass(frozen=True)
class AblationRow:
    label: str
    groups: tuple[str, ...]
    report: CrossValidationReport

    @property
    def accuracy(self) -> float:
        return self.report.metrics.accuracy


def ablate(algorithm: str, X, y, *, n_folds: int = 5, rng_seed: int = 0, **train_params) -> list[AblationRow]:
    """Cross-validate on cumulative group prefixes: URL slots alone, then
    with registration, content, and account slots added in canonical order."""
    X = np.asarray(X, dtype=float)
    rows = []
    for label, groups in ABLATION_STAGES:
        hi = GROUP_BOUNDS[groups[-1]][1]
        report = cross_validate(
            algorithm,
            X[:, :hi],
            y,
            n_folds=n_folds,
            rng_seed=rng_seed,
            feature_names=FEATURE_NAMES[:hi],
            **train_params,
        )
        rows.append(AblationRow(label=label, groups=groups, report=report))
    return rows


# --- synthetic benchmark corpus ---

NOISE_FEATURE = "statuses_count"
TOP_SIGNAL_FEATURES = ("ownership_period_days", "account_age_days", "conditional_redirect")


def generate_synthetic_vectors(n: int, separability: float = 1.0, rng_seed: int = 0):
    """A labeled benchmark sample of the 22-slot vectors.

    separability in [0, 1] scales every class gap: at 0 both classes draw
    from identical distributions, at 1 the phishing signatures are fully
    expressed (fresh domains, young accounts, cloaked redirects, trending
    bait). statuses_count never depends on the class, so it is a planted
    noise slot. Returns (X, y) with y=1 for phishing.
    """
    if n < 100:
        raise EvaluationError(f"need at least 100 rows, got {n}")
    if not 0.0 <= separability <= 1.0:
        raise EvaluationError(f"separability must be in [0, 1], got {separability}")

    s = separability
    rng = np.random.default_rng(rng_seed)
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1  # both classes always present
    cls = y.astype(float)

    cols: dict[str, np.ndarray] = {}

    # URL group. Redirect count drives the hop-distance slot; the cloaking
    # flag is a planted top indicator.
    num_redirects = rng.poisson(0.4 + 1.1 * s * cls)
    cols["num_redirects"] = num_redirects.astype(float)
    hop = np.abs(rng.normal(14 + 4 * s * cls, 5)).clip(1, None)
    cols["avg_hop_levenshtein"] = np.where(num_redirects > 0, hop, 0.0)
    cols["url_length"] = rng.normal(38 + 6 * s * cls, 12).clip(12, None).round()
    num_subdomains = rng.poisson(0.6 + 0.6 * s * cls)
    cols["num_subdomains"] = num_subdomains.astype(float)
    cols["num_dots"] = (num_subdomains + 1 + rng.poisson(1.0 + 0.3 * s * cls)).astype(float)
    cloak_fail = rng.random(n) < 0.05
    cloaked = rng.random(n) < 0.02 + 0.70 * s * cls
    cols["conditional_redirect"] = np.where(cloak_fail, -1.0, cloaked.astype(float))

    # registration group: one whole-lookup failure knocks out all three
    # slots. Ownership period is a planted top indicator; the registration-
    # to-account gap is bimodal for phishing with the safe mean preserved,
    # so only interaction-capable models can exploit it.
    registrar = rng.choice(4, size=n, p=(0.15, 0.50, 0.25, 0.10)).astype(float)
    redraw = (rng.random(n) < 0.22 * s) & (cls == 1)
    registrar[redraw] = rng.choice((0.0, 4.0, 5.0, 6.0), size=int(redraw.sum()))
    mix_own = (rng.random(n) < 0.80) & (cls == 1)
    ownership = rng.normal(
        np.where(mix_own, 1500 - 1230 * s, 1500), np.where(mix_own, 420 - 200 * s, 420)
    ).clip(3, None)
    low_mode = rng.random(n) < 0.5
    to_account_mu = np.where(
        cls == 1, np.where(low_mode, 900 - 840 * s, 900 + 840 * s), 900.0
    )
    to_account_sigma = np.where(cls == 1, np.where(low_mode, 400 - 350 * s, 400 - 100 * s), 400.0)
    to_account = rng.normal(to_account_mu, to_account_sigma).clip(0, None)
    whois_missing = rng.random(n) < 0.05 + 0.05 * s * cls
    cols["registrar_code"] = np.where(whois_missing, -1.0, registrar)
    cols["ownership_period_days"] = np.where(whois_missing, -1.0, ownership)
    cols["domain_to_account_days"] = np.where(whois_missing, -1.0, to_account)

    # content group: hashtag count feeds the trending and position slots
    num_hashtags = rng.poisson(0.9 + 0.5 * s * cls)
    cols["num_hashtags"] = num_hashtags.astype(float)
    cols["num_trending_hashtags"] = rng.binomial(num_hashtags, 0.1 + 0.35 * s * cls).astype(float)
    cols["num_mentions"] = rng.poisson(0.5 + 0.7 * s * cls).astype(float)
    cols["retweet_count"] = rng.poisson(1.2 - 0.4 * s * cls).astype(float)
    tweet_length = rng.normal(90 + 8 * s * cls, 24 - 6 * s * cls).clip(20, 140).round()
    cols["tweet_length"] = tweet_length
    position = np.floor(rng.random(n) * (tweet_length - 10) * (1 - 0.3 * s * cls))
    cols["first_hashtag_position"] = np.where(num_hashtags > 0, position.clip(0, None), -1.0)

    # account group: heavy-tailed counts; age (planted top indicator)
    # mirrors the fresh-domain story
    followers = np.floor(rng.lognormal(5.6 - 0.5 * s * cls, 1.2))
    followees = np.floor(rng.lognormal(5.4 + 0.35 * s * cls, 1.0))
    mix_age = (rng.random(n) < 0.90) & (cls == 1)
    age = rng.gamma(np.where(mix_age, 3 - 1.6 * s, 3.0), np.where(mix_age, 420 - 360 * s, 420.0))
    protected = rng.random(n) < 0.01
    network = {
        "followers_count": followers,
        "followees_count": followees,
        "follower_followee_ratio": followers / np.maximum(followees, 1.0),
        "is_listed": (rng.random(n) < 0.45 - 0.26 * s * cls).astype(float),
        "account_age_days": age,
        "has_description": (rng.random(n) < 0.80 - 0.30 * s * cls).astype(float),
        # label-independent by construction, and coarsely bucketed so it
        # offers no usable split structure either: the planted noise slot
        "statuses_count": np.floor(rng.lognormal(6, 1.4, size=n) / 4000) * 4000,
    }
    for name, values in network.items():
        cols[name] = np.where(protected, -1.0, values)

    X = np.column_stack([cols[name] for name in FEATURE_NAMES])
    return X, y.astype(int)
