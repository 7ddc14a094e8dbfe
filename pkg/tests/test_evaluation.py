from fractions import Fraction

import numpy as np
import pytest

from phishscan.evaluation import (
    ABLATION_STAGES,
    ConfusionMatrix,
    EvaluationError,
    Metrics,
    NOISE_FEATURE,
    TOP_SIGNAL_FEATURES,
    ablate,
    compute_metrics,
    cross_validate,
    evaluate_model,
    generate_synthetic_vectors,
    stratified_folds,
)
from phishscan.ml import FEATURE_NAMES, GROUP_BOUNDS, train_model


def test_confusion_matrix_from_predictions():
    cm = ConfusionMatrix.from_predictions([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (cm.tp, cm.fn, cm.fp, cm.tn) == (2, 1, 1, 1)
    assert cm.total == 5
    doubled = cm + cm
    assert (doubled.tp, doubled.fn, doubled.fp, doubled.tn) == (4, 2, 2, 2)


def test_metrics_match_exact_rationals():
    rng = np.random.default_rng(17)
    for _ in range(20):
        tp, fn, fp, tn = (int(v) for v in rng.integers(0, 400, size=4))
        if tp + fn + fp + tn == 0:
            tn = 1
        m = compute_metrics(ConfusionMatrix(tp=tp, fn=fn, fp=fp, tn=tn))
        assert m.accuracy == float(Fraction(tp + tn, tp + fn + fp + tn))
        if tp + fp:
            assert m.precision == float(Fraction(tp, tp + fp))
        else:
            assert m.precision is None
        if tp + fn:
            assert m.recall == float(Fraction(tp, tp + fn))
        else:
            assert m.recall is None


def test_metrics_empty_matrix_rejected():
    with pytest.raises(EvaluationError):
        compute_metrics(ConfusionMatrix(0, 0, 0, 0))


def test_metrics_zero_denominators_are_none():
    m = compute_metrics(ConfusionMatrix(tp=0, fn=0, fp=0, tn=10))
    assert m.precision is None
    assert m.recall is None
    assert m.accuracy == 1.0


def test_stratified_folds_partition_and_balance():
    y = np.array([0] * 40 + [1] * 10)
    folds = stratified_folds(y, 5, rng_seed=3)
    flat = np.concatenate(folds)
    assert sorted(flat.tolist()) == list(range(50))
    for fold in folds:
        assert (y[fold] == 1).sum() == 2
        assert (y[fold] == 0).sum() == 8


def test_stratified_folds_deterministic():
    y = np.array([0, 1] * 30)
    a = stratified_folds(y, 5, rng_seed=9)
    b = stratified_folds(y, 5, rng_seed=9)
    assert all(np.array_equal(x, z) for x, z in zip(a, b))
    c = stratified_folds(y, 5, rng_seed=10)
    assert any(not np.array_equal(x, z) for x, z in zip(a, c))


def test_stratified_folds_requires_enough_of_each_class():
    y = np.array([0] * 20 + [1] * 3)
    with pytest.raises(EvaluationError):
        stratified_folds(y, 5, rng_seed=0)


@pytest.fixture(scope="module")
def synth_small():
    return generate_synthetic_vectors(400, 1.0, rng_seed=7)


def test_cross_validate_report_shape(synth_small):
    X, y = synth_small
    report = cross_validate("decision_tree", X, y, rng_seed=7)
    assert report.n_folds == 5
    assert len(report.folds) == 5
    pooled = sum((f.matrix for f in report.folds), ConfusionMatrix(0, 0, 0, 0))
    assert pooled == report.matrix
    assert report.matrix.total == 400
    assert report.metrics.accuracy > 0.8
    doc = report.to_json()
    assert doc["algorithm"] == "decision_tree"
    assert len(doc["folds"]) == 5


def test_cross_validate_deterministic(synth_small):
    X, y = synth_small
    a = cross_validate("random_forest", X, y, rng_seed=5, n_trees=10)
    b = cross_validate("random_forest", X, y, rng_seed=5, n_trees=10)
    assert a == b


def test_evaluate_model(synth_small):
    X, y = synth_small
    model = train_model("decision_tree", X, y)
    cm, metrics = evaluate_model(model, X, y)
    assert cm.total == 400
    assert metrics.accuracy == (cm.tp + cm.tn) / 400


def test_ablation_stage_labels_and_prefixes(synth_small):
    X, y = synth_small
    rows = ablate("decision_tree", X, y, rng_seed=7)
    assert [r.label for r in rows] == ["F1", "F1+F2", "F1+F2+F3", "F1+F2+F3+F4"]
    assert rows[0].groups == ("url",)
    assert rows[-1].groups == ("url", "whois", "tweet", "network")
    for row in rows:
        assert 0.0 <= row.accuracy <= 1.0
    # the last stage sees every feature
    assert GROUP_BOUNDS[rows[-1].groups[-1]][1] == len(FEATURE_NAMES)
    assert len(ABLATION_STAGES) == 4


# --- the synthetic generator ---

def test_generator_shape_and_determinism():
    X1, y1 = generate_synthetic_vectors(150, 0.8, rng_seed=3)
    X2, y2 = generate_synthetic_vectors(150, 0.8, rng_seed=3)
    assert X1.shape == (150, 22)
    assert np.array_equal(X1, X2) and np.array_equal(y1, y2)
    X3, _ = generate_synthetic_vectors(150, 0.8, rng_seed=4)
    assert not np.array_equal(X1, X3)
    assert set(np.unique(y1)) == {0, 1}


def test_generator_validates_arguments():
    with pytest.raises(EvaluationError):
        generate_synthetic_vectors(99, 1.0, 0)
    with pytest.raises(EvaluationError):
        generate_synthetic_vectors(500, 1.5, 0)
    with pytest.raises(EvaluationError):
        generate_synthetic_vectors(500, -0.1, 0)


def test_generator_sentinel_is_only_negative():
    X, _ = generate_synthetic_vectors(2000, 1.0, rng_seed=11)
    negatives = X[X < 0]
    assert set(np.unique(negatives)) == {-1.0}


def test_generator_whois_failures_hit_whole_group():
    X, _ = generate_synthetic_vectors(2000, 1.0, rng_seed=11)
    lo, hi = GROUP_BOUNDS["whois"]
    block = X[:, lo:hi]
    missing_any = (block == -1.0).any(axis=1)
    missing_all = (block == -1.0).all(axis=1)
    assert missing_any.sum() > 0
    assert np.array_equal(missing_any, missing_all)


def test_generator_protected_rows_blank_network_group():
    X, _ = generate_synthetic_vectors(5000, 1.0, rng_seed=13)
    lo, hi = GROUP_BOUNDS["network"]
    block = X[:, lo:hi]
    missing_any = (block == -1.0).any(axis=1)
    missing_all = (block == -1.0).all(axis=1)
    assert missing_any.sum() > 0
    assert np.array_equal(missing_any, missing_all)


def test_generator_noise_feature_ignores_class():
    X, y = generate_synthetic_vectors(6000, 1.0, rng_seed=5)
    j = FEATURE_NAMES.index(NOISE_FEATURE)
    phish = X[y == 1, j]
    safe = X[y == 0, j]
    # means within a fraction of the pooled spread
    pooled_std = X[:, j].std()
    assert abs(phish.mean() - safe.mean()) < 0.15 * pooled_std


def test_generator_planted_signals_separate_classes():
    X, y = generate_synthetic_vectors(4000, 1.0, rng_seed=5)
    for name in TOP_SIGNAL_FEATURES:
        j = FEATURE_NAMES.index(name)
        col = X[:, j]
        ok = col != -1.0
        phish = col[ok & (y == 1)]
        safe = col[ok & (y == 0)]
        gap = abs(phish.mean() - safe.mean())
        spread = max(phish.std(), safe.std(), 1e-9)
        assert gap > 0.5 * spread, name


def test_generator_zero_separability_is_uninformative():
    X, y = generate_synthetic_vectors(800, 0.0, rng_seed=19)
    report = cross_validate("decision_tree", X, y, rng_seed=19)
    assert 0.35 < report.metrics.accuracy < 0.65
