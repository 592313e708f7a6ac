import numpy as np
import pytest

from Evaluation.knn import knn_classify, squared_distances
from src.exceptions import RejectedInputError


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    train_x, query_x = rng.normal(size=(30, 4)), rng.normal(size=(12, 4))
    train_y = rng.integers(0, 3, size=30)
    expected = [train_y[np.argmin(((train_x - q) ** 2).sum(axis=1))] for q in query_x]
    assert knn_classify(train_x, train_y, query_x, chunk_size=5).tolist() == expected
    np.testing.assert_allclose(squared_distances(query_x, train_x),
                               ((query_x[:, None] - train_x[None]) ** 2).sum(axis=-1), atol=1e-10)


def test_ties_go_to_the_lowest_index():
    train_x = np.array([[0.0], [2.0]])
    assert knn_classify(train_x, np.array([5, 7]), np.array([[1.0]])).tolist() == [5]


def test_mirrored_neighbours_resolve_to_the_first():
    rng = np.random.default_rng(7)
    tied = 0
    for _ in range(500):
        query, delta = rng.normal(size=3), rng.normal(scale=0.1, size=3)
        train_x = np.stack([query + delta, query - delta])
        d0, d1 = ((query - train_x[0]) ** 2).sum(), ((query - train_x[1]) ** 2).sum()
        if d0 != d1:
            continue
        tied += 1
        assert knn_classify(train_x, np.array([4, 9]), query[None]).tolist() == [4]
        assert knn_classify(train_x, np.array([4, 9]), query[None], k=2).tolist() == [4]
    assert tied > 0


def test_block_size_does_not_change_predictions():
    rng = np.random.default_rng(3)
    train_x, query_x = rng.normal(size=(40, 6)), rng.normal(size=(25, 6))
    train_y = rng.integers(0, 4, size=40)
    np.testing.assert_array_equal(knn_classify(train_x, train_y, query_x, k=3, chunk_size=1),
                                  knn_classify(train_x, train_y, query_x, k=3, chunk_size=1000))


def test_majority_vote():
    train_x = np.array([[0.0], [0.1], [0.2], [5.0]])
    train_y = np.array([3, 1, 1, 3])
    assert knn_classify(train_x, train_y, np.array([[0.0]]), k=3).tolist() == [1]
    assert knn_classify(train_x, train_y, np.array([[0.0]]), k=1).tolist() == [3]


def test_bad_arguments():
    with pytest.raises(RejectedInputError):
        knn_classify(np.zeros((2, 1)), np.zeros(2), np.zeros((1, 1)), k=0)
    with pytest.raises(RejectedInputError):
        knn_classify(np.zeros((2, 1)), np.zeros(2), np.zeros((1, 1)), k=3)
    with pytest.raises(RejectedInputError):
        knn_classify(np.zeros((0, 1)), np.zeros(0), np.zeros((1, 1)))
