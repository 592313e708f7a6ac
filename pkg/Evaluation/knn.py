import numpy as np

from src.exceptions import RejectedInputError

# Upper bound on the float64 elements of one query-by-train difference block.
BLOCK_ELEMENTS = 1 << 22


def squared_distances(queries: np.ndarray, train: np.ndarray) -> np.ndarray:
    """Euclidean distances squared, summed from the coordinate differences.

    Equal distances come out bit-identical, so ties resolve by index alone.
    """
    diff = queries[:, None, :] - train[None, :, :]
    return (diff * diff).sum(axis=-1)


def knn_classify(train_x: np.ndarray, train_y: np.ndarray, query_x: np.ndarray, k: int = 1,
                 chunk_size: int = 256) -> np.ndarray:
    """Brute-force K nearest neighbours with majority vote.

    Distance ties go to the lowest training index, vote ties to the lowest label.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    query_x = np.asarray(query_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    if k < 1:
        raise RejectedInputError(f"K must be >= 1, got {k}")
    if len(train_x) == 0:
        raise RejectedInputError("K-NN needs a nonempty training set")
    if k > len(train_x):
        raise RejectedInputError(f"K={k} exceeds the {len(train_x)} training points")
    train_x = train_x.reshape(len(train_x), -1)
    query_x = query_x.reshape(len(query_x), -1)
    classes, encoded = np.unique(train_y, return_inverse=True)
    chunk_size = max(1, min(chunk_size, BLOCK_ELEMENTS // max(1, train_x.size)))

    predictions = np.empty(len(query_x), dtype=np.int64)
    for start in range(0, len(query_x), chunk_size):
        dist = squared_distances(query_x[start:start + chunk_size], train_x)
        if k == 1:
            predictions[start:start + len(dist)] = encoded[np.argmin(dist, axis=1)]
            continue
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        votes = np.zeros((len(dist), len(classes)), dtype=np.int64)
        np.add.at(votes, (np.arange(len(dist))[:, None], encoded[nearest]), 1)
        predictions[start:start + len(dist)] = np.argmax(votes, axis=1)
    return classes[predictions]
