import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from oracles import best_split_bruteforce
from poigap.boosting import LEAF, BoostParams, GbdtModel, feature_gain, train
from poigap.core_data import DataError

EXACT = dict(reg_lambda=0.0, gamma=0.0, learning_rate=1.0, min_child_weight=0.0)


def node_rows(tree, x):
    """Row indices reaching every node, by walking the tree from the root."""
    rows = {0: np.arange(len(x))}
    for i in range(len(tree)):
        if tree.feature[i] == LEAF:
            continue
        r = rows[i]
        right = x[r, tree.feature[i]] >= tree.threshold[i]
        rows[tree.left[i]], rows[tree.right[i]] = r[~right], r[right]
    return rows


def test_two_point_hand_example():
    x = np.array([[0.0], [1.0]])
    model = train(x, np.array([0.0, 10.0]), BoostParams(rounds=1, max_depth=1, **EXACT))
    tree = model.trees[0]
    assert model.base_score == 5.0
    assert tree.threshold[0] == 0.5 and tree.gain[0] == 25.0
    assert sorted(tree.value[tree.leaves()].tolist()) == [-5.0, 5.0]
    assert model.predict(x).tolist() == [0.0, 10.0]
    assert model.predict(np.array([0.0])) == 0.0
    assert feature_gain(model) == {0: 25.0}


def test_constant_target():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 3))
    model = train(x, np.full(30, 4.0), BoostParams(rounds=5))
    assert model.base_score == 4.0
    assert all(len(t) == 1 and t.value[0] == 0.0 for t in model.trees)
    np.testing.assert_array_equal(model.predict(x), 4.0)
    assert model.feature_gain.tolist() == [0.0, 0.0, 0.0]


def test_min_child_weight_blocks_splits():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(20, 2)), rng.normal(size=20)
    model = train(x, y, BoostParams(rounds=3, min_child_weight=21))
    assert all(len(t) == 1 for t in model.trees)
    # with lambda=1 each stump still shrinks toward zero residual mean, which is already 0
    np.testing.assert_allclose(model.predict(x), y.mean(), atol=1e-12)


def test_threshold_convention():
    x = np.array([[0.0], [1.0]])
    model = train(x, np.array([0.0, 10.0]), BoostParams(rounds=1, max_depth=1, **EXACT))
    assert model.predict(np.array([0.5])) == 10.0
    assert model.predict(np.array([np.nextafter(0.5, 0)])) == 0.0


def test_zero_trees_predict_base():
    model = train(np.ones((3, 1)), np.array([1.0, 2.0, 6.0]), BoostParams(rounds=0))
    assert model.predict(np.array([7.0])) == 3.0


def test_predict_length_mismatch():
    model = train(np.ones((3, 2)), np.arange(3.0), BoostParams(rounds=1))
    with pytest.raises(ValueError):
        model.predict(np.ones(3))


@pytest.mark.parametrize("x, y", [
    (np.zeros((0, 2)), np.zeros(0)),
    (np.ones((2, 1)), np.array([1.0, np.nan])),
    (np.ones((2, 1)), np.ones(3)),
])
def test_training_errors(x, y):
    with pytest.raises(DataError):
        train(x, y, BoostParams(rounds=1))


@pytest.mark.parametrize("kw", [dict(learning_rate=0), dict(max_depth=0), dict(reg_lambda=-1),
                                dict(subsample=1.5), dict(rounds=-1)])
def test_param_validation(kw):
    with pytest.raises(ValueError):
        BoostParams(**kw)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 3), st.floats(0, 2), st.sampled_from([0.0, 1.0, 3.0]))
@example(648, 0.0, 0.0, 0.0)  # two features induce the same partition; gains differ only by rounding
def test_chosen_split_is_optimal(seed, lam, gamma, mcw):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 5, size=(14, 3)).astype(float)
    y = rng.normal(size=14) * 3
    p = BoostParams(rounds=1, max_depth=3, reg_lambda=lam, gamma=gamma, min_child_weight=mcw)
    model = train(x, y, p)
    tree = model.trees[0]
    g = model.base_score - y
    h = np.ones_like(g)
    rows = node_rows(tree, x)
    for i in range(len(tree)):
        r = rows[i]
        if tree.feature[i] == LEAF:
            assert abs(tree.value[i] + g[r].sum() / (len(r) + lam)) <= 1e-12 * (1 + abs(tree.value[i]))
            continue
        gain, f, thr = best_split_bruteforce(x[r], g[r], h[r], lam, gamma, mcw)
        assert tree.gain[i] == pytest.approx(gain, rel=1e-9, abs=1e-9)
        assert (tree.feature[i], tree.threshold[i]) == (f, thr)


def test_split_tie_breaks_to_lower_feature():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    model = train(x, np.array([0.0, 4.0]), BoostParams(rounds=1, max_depth=1, **EXACT))
    assert model.trees[0].feature[0] == 0


def test_leaf_rows_partition():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(60, 4)), rng.normal(size=60)
    model = train(x, y, BoostParams(rounds=3, max_depth=4))
    for tree in model.trees:
        rows = node_rows(tree, x)
        for i in range(len(tree)):
            if tree.feature[i] != LEAF:
                merged = np.sort(np.concatenate([rows[tree.left[i]], rows[tree.right[i]]]))
                np.testing.assert_array_equal(merged, rows[i])
        assert tree.depth <= 4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_loss_non_increasing(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(50, 3)), rng.poisson(3, size=50).astype(float)
    model = train(x, y, BoostParams(rounds=20, max_depth=3))
    loss = np.array(model.train_loss)
    assert np.all(np.diff(loss) <= 1e-9)


def test_gain_accounting_identity():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(80, 5)), rng.normal(size=80)
    model = train(x, y, BoostParams(rounds=10, max_depth=3))
    total = np.zeros(5)
    for t in model.trees:
        for i in range(len(t)):
            if t.feature[i] != LEAF:
                total[t.feature[i]] += t.gain[i]
    np.testing.assert_array_equal(total, model.feature_gain)
    assert np.all(model.feature_gain >= 0)


def test_json_round_trip_exact():
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=(40, 3)), rng.normal(size=40)
    model = train(x, y, BoostParams(rounds=5, max_depth=3), ("a", "b", "c"))
    model.meta["note"] = "x"
    back = GbdtModel.from_json(model.to_json())
    np.testing.assert_array_equal(back.predict(x), model.predict(x))
    assert back.to_json() == model.to_json()


def test_from_json_rejects_other_formats():
    with pytest.raises(DataError):
        GbdtModel.from_json('{"format": "other"}')


def test_determinism_with_subsample():
    rng = np.random.default_rng(6)
    x, y = rng.normal(size=(40, 3)), rng.normal(size=40)
    p = BoostParams(rounds=5, subsample=0.5, seed=3)
    assert train(x, y, p).to_json() == train(x, y, p).to_json()
    other = train(x, y, BoostParams(rounds=5, subsample=0.5, seed=4))
    assert other.to_json() != train(x, y, p).to_json()


def test_prediction_is_sum_of_trees():
    rng = np.random.default_rng(7)
    x, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    model = train(x, y, BoostParams(rounds=4, learning_rate=0.3))
    manual = model.base_score + 0.3 * sum(t.predict(x) for t in model.trees)
    np.testing.assert_allclose(model.predict(x), manual, rtol=0, atol=1e-12)
