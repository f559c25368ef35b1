import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import jacobi_eigh
from poigap.boosting import BoostParams, train
from poigap.core_data import DataError, PoiTable
from poigap.selection import (DEFAULT_THRESHOLDS, PcaResult, cluster_poi_means, gain_rank, mean_distances,
                              pca, ppce_rank, random_select, rank_pois, select_top, similarity_report,
                              tier_select)


def table(rows, cats=None):
    rows = np.asarray(rows)
    cats = cats or tuple(f"c{j}" for j in range(rows.shape[1]))
    return PoiTable(tuple(cats), rows)


def test_cluster_mean_hand_example():
    m = cluster_poi_means(np.array([0, 0]), table([[2, 0], [4, 2]]))
    np.testing.assert_array_equal(m, [[3.0, 1.0]])


def test_single_cluster_is_column_mean():
    rows = np.random.default_rng(0).integers(0, 10, size=(6, 4))
    m = cluster_poi_means(np.zeros(6, dtype=int), table(rows))
    np.testing.assert_allclose(m[0], rows.mean(axis=0))


def test_empty_cluster_zero_row(caplog):
    m = cluster_poi_means(np.array([0, 2]), table([[1, 1], [3, 3]]))
    np.testing.assert_array_equal(m[1], [0.0, 0.0])
    assert "empty" in caplog.text


def test_cluster_mean_dimension_mismatch():
    with pytest.raises(DataError):
        cluster_poi_means(np.array([0, 1, 1]), table([[1], [2]]))


def test_pca_hand_example():
    p = pca(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(p.eigenvalues, [2.0])
    np.testing.assert_allclose(p.components, [[1.0, 0.0]], atol=1e-15)


def test_pca_identical_rows():
    p = pca(np.ones((4, 3)))
    assert len(p.eigenvalues) == 0


def test_pca_needs_two_rows():
    with pytest.raises(ValueError):
        pca(np.ones((1, 3)))


def test_pca_rank_bound():
    p = pca(np.random.default_rng(1).random((5, 173)))
    assert len(p.eigenvalues) <= 4


def test_pca_sign_rule():
    p = pca(np.array([[0.0, -3.0], [0.0, 3.0], [1.0, 0.0]]))
    for row in p.components:
        j = np.argmax(np.abs(row))
        assert row[j] > 0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(1, 8)),
              elements=st.floats(0, 100, allow_nan=False)))
def test_pca_properties(m):
    p = pca(m)
    c = p.covariance(m)
    scale = max(1.0, np.linalg.norm(c))
    for lam, v in zip(p.eigenvalues, p.components):
        assert np.linalg.norm(c @ v - lam * v) <= 1e-8 * scale
        assert abs(np.linalg.norm(v) - 1) <= 1e-10
    if len(p.components) > 1:
        gram = p.components @ p.components.T
        np.testing.assert_allclose(gram, np.eye(len(gram)), atol=1e-8)
    assert np.all(np.diff(p.eigenvalues) <= 1e-12 * max(1.0, p.eigenvalues[0] if len(p.eigenvalues) else 0))
    assert len(p.eigenvalues) <= min(m.shape[0] - 1, m.shape[1])
    total = p.eigenvalues.sum() + p.dropped.sum()
    assert total == pytest.approx(np.trace(c), rel=1e-9, abs=1e-9)


def test_pca_against_jacobi():
    rng = np.random.default_rng(5)
    m = rng.random((5, 4)) * 10
    p = pca(m)
    w, v = jacobi_eigh(p.covariance(m))
    np.testing.assert_allclose(p.eigenvalues, w[:len(p.eigenvalues)], rtol=1e-9)
    for i, row in enumerate(p.components):
        assert abs(abs(row @ v[:, i]) - 1) < 1e-8


def test_rank_axis_aligned():
    r = rank_pois(PcaResult(np.array([4.0]), np.array([[1.0, 0.0, 0.0]]), np.zeros(3)))
    assert r.order.tolist() == [0, 1, 2]
    np.testing.assert_array_equal(r.scores, [4.0, 0.0, 0.0])


def test_rank_symmetric_tie():
    s = np.sqrt(0.5)
    comps = np.array([[0.0, s, s], [0.0, s, -s]])
    r = rank_pois(PcaResult(np.array([1.0, 1.0]), comps, np.zeros(3)))
    assert r.order.tolist() == [1, 2, 0]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(0, 20, allow_nan=False)),
       st.lists(st.booleans(), min_size=3, max_size=3))
def test_rank_sign_flip_invariant(m, flips):
    p = pca(m)
    assume(len(p.eigenvalues) > 0)
    flipped = p.components.copy()
    for i, f in enumerate(flips[:len(flipped)]):
        if f:
            flipped[i] *= -1
    a = rank_pois(p)
    b = rank_pois(PcaResult(p.eigenvalues, flipped, p.column_means))
    np.testing.assert_array_equal(a.order, b.order)
    assert np.all(np.diff(a.scores) <= 0)
    assert sorted(a.order.tolist()) == list(range(6))


def test_rank_fallback_by_totals():
    t = table([[1, 5, 2], [1, 5, 2]])
    r = ppce_rank(np.array([0, 1]), t)
    assert r.fallback
    assert r.order.tolist() == [1, 2, 0]


def test_rank_csv():
    t = table([[1, 5], [3, 0]], ("a", "b"))
    text = ppce_rank(np.array([0, 1]), t).to_csv(t.categories)
    assert text.splitlines()[0] == "rank,category_label,score,method"
    assert text.splitlines()[1].startswith("1,")


def test_select_top():
    r = rank_pois(PcaResult(np.array([4.0]), np.array([[0.6, 0.8, 0.0]]), np.zeros(3)))
    assert select_top(r, 0) == []
    assert select_top(r, 3) == [1, 0, 2]
    with pytest.raises(ValueError):
        select_top(r, 4)


def test_tier_select():
    r = rank_pois(PcaResult(np.array([1.0]), np.array([np.linspace(1, 0.1, 9)]) / 3, np.zeros(9)))
    assert tier_select(r, "max", 2) == [0, 1]
    assert tier_select(r, "med", 2) == [3, 4]
    assert tier_select(r, "min", 3) == [6, 7, 8]
    with pytest.raises(ValueError):
        tier_select(r, "min", 4)


def test_random_select():
    assert random_select(5, 0, 1) == []
    assert sorted(random_select(7, 7, 3)) == list(range(7))
    assert random_select(30, 4, 9) == random_select(30, 4, 9)
    assert len(set(random_select(30, 10, 2))) == 10
    with pytest.raises(ValueError):
        random_select(3, 4, 0)


def test_gain_rank_zero_trees():
    x = np.zeros((4, 3))
    model = train(x, np.full(4, 2.0), BoostParams(rounds=0), ("slot", "poi:a", "poi:b"))
    r = gain_rank(model.feature_gain, model.feature_names, ("a", "b"))
    assert r.order.tolist() == [0, 1] and r.scores.tolist() == [0.0, 0.0]


def test_gain_rank_single_split():
    x = np.array([[0.0, 0.0, 3.0], [0.0, 1.0, 3.0]])
    p = BoostParams(rounds=1, max_depth=1, reg_lambda=0.0, learning_rate=1.0, min_child_weight=0.0)
    model = train(x, np.array([0.0, 10.0]), p, ("slot", "poi:a", "poi:b"))
    r = gain_rank(model.feature_gain, model.feature_names, ("b", "a"))
    assert r.order.tolist() == [1, 0]
    assert r.scores.tolist() == [25.0, 0.0]


def test_gain_rank_needs_poi_features():
    with pytest.raises(ValueError):
        gain_rank(np.zeros(2), ("slot", "lag_1"), ("a",))


def test_similarity_two_thirds():
    # three collinear raw vectors with pair distances 1, 2, 3 (the 0.1/0.2/0.3 case scaled by 10)
    t = PoiTable(("a",), np.array([[0], [1], [3]]))
    sim = similarity_report(np.zeros(3, dtype=int), t, thresholds=(2.5,), normalize=False)
    assert sim.rows[0][1][0] == pytest.approx(2 / 3)


def test_similarity_identical_vectors_and_na():
    t = table([[1, 2], [1, 2], [5, 0]])
    sim = similarity_report(np.array([0, 0, 1]), t, thresholds=DEFAULT_THRESHOLDS)
    assert sim.rows[0][1].tolist() == [1.0] * 5
    assert sim.rows[1][1] is None
    assert len(sim.rows) == 3
    csv = sim.to_csv()
    assert "NA" in csv.splitlines()[2]


def test_similarity_thresholds_increasing():
    with pytest.raises(ValueError):
        similarity_report(np.zeros(2, dtype=int), table([[1], [2]]), thresholds=(0.2, 0.1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_similarity_monotone(seed, normalize):
    rng = np.random.default_rng(seed)
    t = table(rng.integers(0, 6, size=(9, 4)))
    sim = similarity_report(rng.integers(0, 3, size=9), t, thresholds=(0.1, 0.5, 1.0, 2.0, 5.0),
                            normalize=normalize)
    for _, props in sim.rows:
        if props is not None:
            assert np.all(np.diff(props) >= 0)
            assert np.all((props >= 0) & (props <= 1))


def test_mean_distances():
    t = table([[1, 0], [1, 0], [0, 1], [0, 1]])
    within, between = mean_distances(np.array([0, 0, 1, 1]), t)
    assert within == 0.0 and between == pytest.approx(np.sqrt(2))
