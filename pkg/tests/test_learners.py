import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abacpip.encoding import EncodedDataset
from abacpip.errors import EmptyPartition, FormatError, ModelFormatError, WidthMismatch
from abacpip.learners import (Leaf, LearnerKind, LearnerSpec, Split, available_backends,
                              default_spec, get_backend, gini, predict, predict_many,
                              predict_proba, train)
from abacpip.learners.serialize import dump_model, load_bytes, load_model, save_model

from _gen import memorization_case

KINDS = list(LearnerKind)
SMALL = dict(n_trees=7, n_stages=7)


def dataset(X, y, n_classes=None):
    X = np.asarray(X, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    K = n_classes or int(y.max()) + 1
    return EncodedDataset(X, y, tuple(f"f{j}" for j in range(X.shape[1])),
                          tuple(f"c{k}" for k in range(K)))


def spec(kind, **kw):
    return LearnerSpec(kind, seed=kw.pop("seed", 3), **{**SMALL, **kw})


def random_data(seed, n=300, d=5, K=3, hi=6):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, hi, size=(n, d))
    y = (X[:, 0] + 2 * (X[:, 1] > 2) + rng.integers(0, 2, n)) % K
    return dataset(X, y, K)


# -- gini ------------------------------------------------------------------------

@pytest.mark.parametrize("counts,want", [([5, 5], 0.5), ([10, 0], 0.0), ([2, 3, 5], 0.62)])
def test_gini_examples(counts, want):
    assert gini(counts) == pytest.approx(want, abs=1e-12)


def test_gini_empty_partition():
    with pytest.raises(EmptyPartition):
        gini([0, 0])


# -- spec ---------------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        LearnerSpec(LearnerKind.RANDOM_FOREST)
    with pytest.raises(ValueError):
        LearnerSpec("dt", learning_rate=0.0)
    with pytest.raises(ValueError):
        LearnerSpec("dt", min_samples_split=1)
    with pytest.raises(ValueError):
        LearnerSpec("gb", seed=0, feature_subsample=1.5)
    assert LearnerSpec("decision-tree").kind is LearnerKind.DECISION_TREE
    assert default_spec("gb").depth_limit == 3


def test_spec_from_config(tmp_path):
    p = tmp_path / "rf.cfg"
    p.write_text("kind = rf  # forest\nn_trees = 12\nfeature_subsample = 0.5\nseed = 9\n")
    s = LearnerSpec.from_config(p)
    assert (s.kind, s.n_trees, s.feature_subsample, s.seed) == (LearnerKind.RANDOM_FOREST,
                                                                12, 0.5, 9)
    assert LearnerSpec.from_mapping(s.to_mapping()) == s
    p.write_text("kind = rf\nbogus = 1\n")
    with pytest.raises(FormatError):
        LearnerSpec.from_config(p)


# -- decision tree behaviour ----------------------------------------------------------

def test_separable_feature_gives_depth_one():
    X = [[0, 3], [1, 1], [2, 0], [3, 2], [4, 3], [5, 1]]
    y = [0, 0, 0, 1, 1, 1]
    m = train(LearnerSpec("dt"), dataset(X, y))
    tree = m.trees[0]
    assert tree.depth == 1
    assert tree.node(0) == Split(0, 2, 1, 2)
    assert predict_many(m, np.asarray(X))[0].tolist() == y


def test_conflicting_rows_pick_lowest_class():
    X = [[1, 1], [1, 1], [0, 0]]
    y = [1, 0, 0]
    m = train(LearnerSpec("dt"), dataset(X, y))
    labels, proba = predict_many(m, np.asarray(X))
    assert labels.tolist() == [0, 0, 0]
    assert proba[0].tolist() == [0.5, 0.5]
    assert (labels == np.asarray(y)).mean() < 1.0


def test_leaves_are_probability_rows():
    m = train(LearnerSpec("dt"), random_data(1))
    tree = m.trees[0]
    for i in range(tree.n_nodes):
        node = tree.node(i)
        if isinstance(node, Leaf):
            assert sum(node.probabilities) == pytest.approx(1.0, abs=1e-9)


def test_degenerate_single_class():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = train(spec("rf"), dataset([[0], [1]], [1, 1], n_classes=2))
    assert m.degenerate and any(issubclass(w.category, RuntimeWarning) for w in caught)
    assert predict(m, [5]) == (1, [0.0, 1.0])


def test_predict_width_mismatch():
    m = train(LearnerSpec("dt"), random_data(2))
    with pytest.raises(WidthMismatch):
        predict(m, [1, 2])
    with pytest.raises(WidthMismatch):
        predict_many(m, np.zeros((3, 2)))


# -- memorization and relabelling ---------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dt_memorizes_consistent_policies(seed):
    data, expected = memorization_case(np.random.default_rng(seed), max_rows=2000)
    m = train(LearnerSpec("dt"), data)
    assert np.array_equal(predict_many(m, data.X)[0], expected)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_order_preserving_relabel_keeps_predictions(seed, col):
    data = random_data(seed, n=120)
    rng = np.random.default_rng(seed + 1)
    # strictly increasing map on the codes of one column
    lut = np.cumsum(rng.integers(1, 4, size=8))
    X2 = data.X.copy()
    X2[:, col] = lut[data.X[:, col]]
    relabeled = dataset(X2, data.y, len(data.class_names))
    a = train(LearnerSpec("dt"), data)
    b = train(LearnerSpec("dt"), relabeled)
    # midpoint thresholds give unseen in-between codes no order-isomorphic
    # image, so the check runs on the (relabeled) training inputs
    assert np.array_equal(predict_many(a, data.X)[1], predict_many(b, X2)[1])
    assert np.array_equal(a.trees[0].feature, b.trees[0].feature)
    assert a.trees[0].n_nodes == b.trees[0].n_nodes


def test_dt_splits_never_increase_gini():
    data = random_data(4, n=400)
    m = train(LearnerSpec("dt"), data)
    t = m.trees[0]
    rows = {0: np.arange(len(data))}
    for i in range(t.n_nodes):
        node = t.node(i)
        if not isinstance(node, Split):
            continue
        r = rows[i]
        go_left = data.X[r, node.feature] <= node.threshold
        rows[node.left], rows[node.right] = r[go_left], r[~go_left]
        K = len(data.class_names)

        def g(idx):
            return gini(np.bincount(data.y[idx], minlength=K)) if len(idx) else 0.0
        child = (len(rows[node.left]) * g(rows[node.left])
                 + len(rows[node.right]) * g(rows[node.right])) / len(r)
        assert child <= g(r) + 1e-12
        assert len(rows[node.left]) and len(rows[node.right])


# -- ensembles ------------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_probabilities_are_distributions(kind):
    data = random_data(5)
    proba = predict_proba(train(spec(kind), data), data.X)
    assert (proba >= 0).all()
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_training_is_deterministic(kind):
    data = random_data(6)
    a, b = train(spec(kind), data), train(spec(kind), data)
    assert a.same_as(b)
    assert predict(a, data.X[0]) == predict(b, data.X[0])


@pytest.mark.parametrize("kind", [LearnerKind.RANDOM_FOREST, LearnerKind.EXTRA_TREES,
                                  LearnerKind.GRADIENT_BOOSTING])
def test_seed_changes_ensembles(kind):
    data = random_data(7)
    assert not train(spec(kind, seed=1), data).same_as(train(spec(kind, seed=2), data))


def test_ensembles_fit_training_data():
    data = random_data(8, n=400, K=2)
    for kind in KINDS:
        acc = (predict_many(train(spec(kind, n_trees=25, n_stages=40), data),
                            data.X)[0] == data.y).mean()
        assert acc > 0.7, kind


def test_predicts_only_training_classes():
    X = np.array([[0], [1], [2], [3]])
    data = dataset(X, [0, 2, 0, 2], n_classes=4)
    for kind in KINDS:
        labels = predict_many(train(spec(kind), data), np.arange(6)[:, None])[0]
        assert set(labels.tolist()) <= {0, 2}


@pytest.mark.skipif("numba" not in available_backends(), reason="numba not installed")
@pytest.mark.parametrize("kind", KINDS)
def test_backends_agree_bit_for_bit(kind):
    data = random_data(9, n=250)
    a = train(spec(kind), data, backend="numba")
    b = train(spec(kind), data, backend="numpy")
    assert a.same_as(b)
    assert np.array_equal(predict_proba(a, data.X, "numba"), predict_proba(b, data.X, "numpy"))


def test_backend_env_flag(monkeypatch):
    monkeypatch.setenv("ABACPIP_NUMBA", "0")
    assert get_backend().name == "numpy"
    with pytest.raises(ValueError):
        get_backend("gpu")


# -- serialization ------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_model_round_trip_is_bit_exact(kind, tmp_path):
    data = random_data(10)
    m = train(spec(kind), data)
    save_model(m, tmp_path / "m.bin")
    back, enc = load_model(tmp_path / "m.bin")
    assert enc is None and back.same_as(m)
    assert np.array_equal(predict_proba(back, data.X), predict_proba(m, data.X))
    assert dump_model(back) == dump_model(m)


def test_corrupt_models_rejected():
    blob = dump_model(train(LearnerSpec("dt"), random_data(11)))
    with pytest.raises(ModelFormatError):
        load_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(ModelFormatError):
        load_bytes(blob[:-8])
    with pytest.raises(ModelFormatError):
        load_bytes(blob[:5])
