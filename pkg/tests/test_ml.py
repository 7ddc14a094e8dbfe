import json
import math
from fractions import Fraction

import numpy as np
import pytest

from phishscan.ml import (
    FEATURE_GROUPS,
    FEATURE_NAMES,
    GROUP_BOUNDS,
    GROUP_ORDER,
    DecisionTree,
    GaussianScorer,
    ModelError,
    ModelFormatError,
    RandomForest,
    TrainedModel,
    class_weights_balanced,
    load_model,
    model_from_json,
    model_to_json,
    permutation_importance,
    save_model,
    train_model,
)


def test_feature_canon():
    assert len(FEATURE_NAMES) == 22
    assert len(set(FEATURE_NAMES)) == 22
    spans = [GROUP_BOUNDS[g] for g in GROUP_ORDER]
    assert spans[0][0] == 0 and spans[-1][1] == 22
    for (_, end), (start, _) in zip(spans, spans[1:]):
        assert end == start
    regrouped = [n for g in GROUP_ORDER for n in FEATURE_GROUPS[g]]
    assert tuple(regrouped) == FEATURE_NAMES


def test_class_weights_balanced():
    w = class_weights_balanced([0, 0, 0, 1])
    assert w[0] == pytest.approx(4 / 6)
    assert w[1] == pytest.approx(2.0)
    with pytest.raises(ModelError):
        class_weights_balanced([1, 1, 1])


# --- Gaussian scorer vs a plain-Python oracle ---

def nb_oracle_scores(X, y, weights, X_eval=None):
    """Independent reimplementation with scalar loops and math.log."""
    n, d = len(X), len(X[0])
    params = {}
    for c in (0, 1):
        rows = [X[i] for i in range(n) if y[i] == c]
        for j in range(d):
            vals = [r[j] for r in rows if r[j] != -1.0]
            if vals:
                mean = sum(vals) / len(vals)
                var = sum((v - mean) ** 2 for v in vals) / len(vals)
                params[(c, j)] = (mean, max(var, 1e-9))
    usable = [j for j in range(d) if (0, j) in params and (1, j) in params]
    wn = {c: weights[c] * sum(1 for v in y if v == c) for c in (0, 1)}
    log_prior = {c: math.log(wn[c] / (wn[0] + wn[1])) for c in (0, 1)}

    out = []
    for row in X if X_eval is None else X_eval:
        ll = {}
        for c in (0, 1):
            total = log_prior[c]
            for j in usable:
                x = row[j]
                if x == -1.0:
                    continue
                mean, var = params[(c, j)]
                total += -0.5 * (math.log(2 * math.pi * var) + (x - mean) ** 2 / var)
            ll[c] = total
        out.append(1.0 / (1.0 + math.exp(ll[0] - ll[1])))
    return out


def random_dataset(rng, n, d, sentinel_rate=0.15):
    X = rng.normal(0, 3, size=(n, d))
    shift = rng.uniform(0.5, 2.5, size=d)
    y = rng.integers(0, 2, size=n)
    # ensure both classes appear
    y[0], y[1] = 0, 1
    X[y == 1] += shift
    X[rng.random((n, d)) < sentinel_rate] = -1.0
    return X, y


@pytest.mark.parametrize("seed", range(8))
def test_gaussian_scorer_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 51))
    d = int(rng.integers(1, 6))
    X, y = random_dataset(rng, n, d)
    weights = class_weights_balanced(y)

    scorer = GaussianScorer().fit(X, y, weights)
    got = scorer.score_many(X)
    expected = nb_oracle_scores(X.tolist(), y.tolist(), weights)
    assert np.allclose(got, expected, atol=1e-9, rtol=0)


def test_gaussian_skips_feature_unseen_in_one_class():
    # feature 1 is sentinel for every phishing row: unusable for scoring
    X = np.array([[0.0, 5.0], [1.0, 6.0], [10.0, -1.0], [11.0, -1.0]])
    y = np.array([0, 0, 1, 1])
    w = class_weights_balanced(y)
    scorer = GaussianScorer().fit(X, y, w)
    assert scorer.usable.tolist() == [True, False]

    with_column = scorer.score_many(np.array([[0.5, 100.0]]))
    without_column = scorer.score_many(np.array([[0.5, -1.0]]))
    assert with_column[0] == without_column[0]


def test_gaussian_skips_sentinel_at_prediction():
    rng = np.random.default_rng(3)
    X, y = random_dataset(rng, 30, 3, sentinel_rate=0.0)
    w = class_weights_balanced(y)
    scorer = GaussianScorer().fit(X, y, w)
    probe = X[:1].copy()
    probe[0, 2] = -1.0
    expected = nb_oracle_scores(X.tolist(), y.tolist(), w, X_eval=probe.tolist())
    assert scorer.score_many(probe)[0] == pytest.approx(expected[0], abs=1e-12)


# --- decision tree vs an exhaustive exact-arithmetic oracle ---

def oracle_gini(n0, n1, w0, w1):
    W0, W1 = w0 * n0, w1 * n1
    total = W0 + W1
    return 1 - (W0 / total) ** 2 - (W1 / total) ** 2


def oracle_best_split(rows, w0, w1):
    """All features, all midpoints, Fraction arithmetic throughout."""
    n = len(rows)
    n1 = sum(y for _, y in rows)
    n0 = n - n1
    parent = oracle_gini(n0, n1, w0, w1)
    Wp = w0 * n0 + w1 * n1
    d = len(rows[0][0])
    best = None  # (decrease, j, lo, hi)
    for j in range(d):
        vals = sorted({Fraction(x[j]) for x, _ in rows})
        for lo, hi in zip(vals, vals[1:]):
            mid = (lo + hi) / 2
            left = [(x, y) for x, y in rows if Fraction(x[j]) <= mid]
            right = [(x, y) for x, y in rows if Fraction(x[j]) > mid]
            l1 = sum(y for _, y in left)
            r1 = sum(y for _, y in right)
            WL = w0 * (len(left) - l1) + w1 * l1
            WR = w0 * (len(right) - r1) + w1 * r1
            child = (
                WL * oracle_gini(len(left) - l1, l1, w0, w1)
                + WR * oracle_gini(len(right) - r1, r1, w0, w1)
            ) / Wp
            decrease = parent - child
            if best is None or decrease > best[0]:
                best = (decrease, j, lo, hi)
    if best is None or best[0] <= 0:
        return None
    return best


def oracle_tree(rows, w0, w1, depth, max_depth, min_samples_split=2):
    n1 = sum(y for _, y in rows)
    n0 = len(rows) - n1
    node = {"counts": [n0, n1]}
    if n0 == 0 or n1 == 0 or len(rows) < min_samples_split or depth >= max_depth:
        return node
    best = oracle_best_split(rows, w0, w1)
    if best is None:
        return node
    _, j, lo, hi = best
    node["feature"] = j
    node["threshold"] = (float(lo) + float(hi)) / 2  # same float op as the implementation
    left = [(x, y) for x, y in rows if Fraction(x[j]) <= (lo + hi) / 2]
    right = [(x, y) for x, y in rows if Fraction(x[j]) > (lo + hi) / 2]
    node["left"] = oracle_tree(left, w0, w1, depth + 1, max_depth, min_samples_split)
    node["right"] = oracle_tree(right, w0, w1, depth + 1, max_depth, min_samples_split)
    return node


def assert_same_tree(tree: DecisionTree, nid: int, expected: dict):
    t = tree.tree
    assert t.counts[nid].tolist() == expected["counts"]
    if "feature" not in expected:
        assert t.feature[nid] == -1
        return
    assert t.feature[nid] == expected["feature"]
    assert t.threshold[nid] == expected["threshold"]
    assert_same_tree(tree, int(t.left[nid]), expected["left"])
    assert_same_tree(tree, int(t.right[nid]), expected["right"])


@pytest.mark.parametrize("seed", range(10))
def test_tree_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(8, 40))
    d = int(rng.integers(2, 5))
    X, y = random_dataset(rng, n, d, sentinel_rate=0.1)
    weights = class_weights_balanced(y)
    w0, w1 = Fraction(weights[0]), Fraction(weights[1])  # exact float-to-rational

    tree = DecisionTree(max_depth=3).fit(X, y, weights)
    rows = [(X[i].tolist(), int(y[i])) for i in range(n)]
    expected = oracle_tree(rows, w0, w1, 0, 3)
    assert_same_tree(tree, 0, expected)


def test_tree_prefers_lowest_feature_on_tie():
    # identical columns: both give the same decrease, index 0 must win
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    y = np.array([0, 0, 1, 1])
    tree = DecisionTree().fit(X, y, class_weights_balanced(y))
    assert tree.tree.feature[0] == 0
    assert tree.tree.threshold[0] == 2.5


def test_tree_prefers_lowest_threshold_on_tie():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([1, 0, 1])
    tree = DecisionTree().fit(X, y, {0: 1.0, 1: 1.0})
    assert tree.tree.threshold[0] == 1.5


def test_tree_stopping_rules():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    w = class_weights_balanced(y)

    assert DecisionTree(max_depth=0).fit(X, y, w).n_nodes == 1
    assert DecisionTree(min_samples_split=5).fit(X, y, w).n_nodes == 1
    pure = DecisionTree().fit(X, np.zeros(4, dtype=int), {0: 1.0, 1: 1.0})
    assert pure.n_nodes == 1
    constant = DecisionTree().fit(np.ones((4, 1)), y, w)
    assert constant.n_nodes == 1  # no candidate thresholds

    grown = DecisionTree().fit(X, y, w)
    assert grown.n_nodes == 3
    assert grown.depth() == 1


def test_tree_leaf_scores_use_class_weights():
    # 3 safe vs 1 phishing in one leaf: balanced weights even the vote out
    X = np.array([[1.0], [1.0], [1.0], [1.0]])
    y = np.array([0, 0, 0, 1])
    tree = DecisionTree().fit(X, y, class_weights_balanced(y))
    assert tree.score_many(X)[0] == pytest.approx(0.5)

    unweighted = DecisionTree().fit(X, y, {0: 1.0, 1: 1.0})
    assert unweighted.score_many(X)[0] == pytest.approx(0.25)


def test_tree_sentinel_is_ordinary_value():
    X = np.array([[-1.0], [-1.0], [5.0], [6.0]])
    y = np.array([1, 1, 0, 0])
    tree = DecisionTree().fit(X, y, class_weights_balanced(y))
    assert tree.n_nodes == 3
    assert tree.score_many(np.array([[-1.0], [5.5]])).tolist() == [1.0, 0.0]


# --- random forest ---

def synth_xy(seed, n=400, d=6):
    rng = np.random.default_rng(seed)
    return random_dataset(rng, n, d, sentinel_rate=0.05)


def test_forest_feature_subsample_size():
    X, y = synth_xy(0, n=120, d=22)
    forest = RandomForest(n_trees=3, rng_seed=1).fit(X, y, class_weights_balanced(y))
    assert forest.max_features == 5  # ceil(sqrt(22))

    X4, y4 = synth_xy(1, n=60, d=4)
    assert RandomForest(n_trees=2).fit(X4, y4, class_weights_balanced(y4)).max_features == 2
    X5, y5 = synth_xy(2, n=60, d=5)
    assert RandomForest(n_trees=2).fit(X5, y5, class_weights_balanced(y5)).max_features == 3


def test_forest_is_deterministic_for_a_seed():
    X, y = synth_xy(7)
    w = class_weights_balanced(y)
    a = RandomForest(n_trees=12, rng_seed=42).fit(X, y, w)
    b = RandomForest(n_trees=12, rng_seed=42).fit(X, y, w)
    assert np.array_equal(a.score_many(X), b.score_many(X))
    for ta, tb in zip(a.trees, b.trees):
        assert ta.tree.feature.tolist() == tb.tree.feature.tolist()
        assert ta.tree.threshold.tolist() == tb.tree.threshold.tolist()

    c = RandomForest(n_trees=12, rng_seed=43).fit(X, y, w)
    assert any(
        ta.tree.threshold.tolist() != tc.tree.threshold.tolist()
        for ta, tc in zip(a.trees, c.trees)
    )


def test_forest_score_is_vote_fraction():
    X, y = synth_xy(9, n=200)
    w = class_weights_balanced(y)
    forest = RandomForest(n_trees=10, rng_seed=5).fit(X, y, w)
    scores = forest.score_many(X)
    votes = np.zeros(len(X))
    for tree in forest.trees:
        votes += tree.score_many(X) >= 0.5
    assert np.array_equal(scores, votes / 10)
    assert ((scores >= 0) & (scores <= 1)).all()


def test_forest_beats_chance_on_separable_data():
    X, y = synth_xy(11, n=500)
    w = class_weights_balanced(y)
    forest = RandomForest(n_trees=25, rng_seed=3).fit(X, y, w)
    accuracy = ((forest.score_many(X) >= 0.5).astype(int) == y).mean()
    assert accuracy > 0.9


# --- the wrapper and persistence ---

def small_model(algorithm="random_forest", seed=21):
    rng = np.random.default_rng(seed)
    X, y = random_dataset(rng, 80, 22, sentinel_rate=0.1)
    return (
        train_model(algorithm, X, y, rng_seed=seed, n_trees=8,
                    registrar_freq_table={"godaddy": 1}),
        X,
        y,
    )


def test_train_model_validates():
    X = np.zeros((4, 3))
    with pytest.raises(ModelError):
        train_model("nonsense", X, [0, 1, 0, 1], feature_names=("a", "b", "c"))
    with pytest.raises(ModelError):
        train_model("naive_bayes", X, [0, 1, 0, 2], feature_names=("a", "b", "c"))
    with pytest.raises(ModelError):
        train_model("naive_bayes", X, [0, 1, 0, 1], feature_names=("a", "b"))


def test_predict_threshold():
    model, X, y = small_model("decision_tree")
    scores = model.score_many(X)
    assert np.array_equal(model.predict_many(X), (scores >= 0.5).astype(int))
    assert model.predict(X[0]) in (0, 1)
    assert model.training_meta["n_samples"] == 80
    assert model.training_meta["timestamp"] is None


@pytest.mark.parametrize("algorithm", ["naive_bayes", "decision_tree", "random_forest"])
def test_save_load_round_trip_exact(algorithm, tmp_path):
    model, X, _ = small_model(algorithm)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.algorithm == model.algorithm
    assert loaded.feature_names == model.feature_names
    assert loaded.registrar_freq_table == {"godaddy": 1}
    assert np.array_equal(loaded.score_many(X), model.score_many(X))
    assert np.array_equal(loaded.predict_many(X), model.predict_many(X))


def test_save_is_byte_stable(tmp_path):
    model, _, _ = small_model()
    p1, p2, p3 = (tmp_path / f"m{i}.json" for i in range(3))
    save_model(model, p1)
    save_model(model, p2)
    save_model(load_model(p1), p3)
    assert p1.read_bytes() == p2.read_bytes() == p3.read_bytes()


def test_load_rejects_bad_documents(tmp_path):
    model, _, _ = small_model()
    doc = model_to_json(model)

    wrong_version = dict(doc, format_version=99)
    with pytest.raises(ModelFormatError):
        model_from_json(wrong_version)

    empty_forest = json.loads(json.dumps(doc))
    empty_forest["parameters"]["trees"] = []
    with pytest.raises(ModelFormatError):
        model_from_json(empty_forest)

    dup_names = json.loads(json.dumps(doc))
    dup_names["feature_names"][1] = dup_names["feature_names"][0]
    with pytest.raises(ModelFormatError):
        model_from_json(dup_names)

    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_model(path)


# --- permutation importance ---

def test_importance_zero_for_untouched_features():
    rng = np.random.default_rng(5)
    n = 200
    X = rng.normal(size=(n, 4))
    y = (X[:, 2] > 0).astype(int)
    model = train_model("decision_tree", X, y, feature_names=("a", "b", "c", "d"), max_depth=1)
    report = permutation_importance(model, X, y, rng_seed=0, n_repeats=3)
    assert report.baseline_error == 0.0
    assert report.scores["c"] > 0.3
    assert report.scores["a"] == 0.0
    assert report.scores["b"] == 0.0
    assert report.scores["d"] == 0.0
    assert report.ranking == ("c", "a", "b", "d")  # ties fall back to canonical order


def test_importance_is_deterministic():
    model, X, y = small_model()
    r1 = permutation_importance(model, X, y, rng_seed=11, n_repeats=2)
    r2 = permutation_importance(model, X, y, rng_seed=11, n_repeats=2)
    assert r1.scores == r2.scores
    assert r1.ranking == r2.ranking


def test_importance_accepts_generator():
    model, X, y = small_model()
    report = permutation_importance(model, X, y, rng_seed=np.random.default_rng(2), n_repeats=1)
    assert set(report.scores) == set(FEATURE_NAMES)
