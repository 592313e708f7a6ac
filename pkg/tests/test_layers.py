import numpy as np
import pytest

from Models.models import ClassifierHead, ConvFeatureBank
from Network.layers import (LOG_FLOOR, batch_loss, classify, conv_forward, extract_features,
                            feature_forward, feature_length, head_loss_and_grads, init_bank, init_head,
                            loss_and_grads, maxpool, predict, relu, softmax)
from src.exceptions import RejectedInputError


def naive_conv(x, bank):
    m = (x.shape[0] - bank.w) // bank.stride + 1
    out = np.zeros((m, m, bank.d))
    for i in range(m):
        for j in range(m):
            window = x[i * bank.stride:i * bank.stride + bank.w, j * bank.stride:j * bank.stride + bank.w]
            for k in range(bank.d):
                out[i, j, k] = np.sum(window * bank.filters[k]) + bank.biases[k]
    return out


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(0)
    bank = ConvFeatureBank(rng.normal(size=(3, 3, 3, 2)), rng.normal(size=3), 2)
    x = rng.normal(size=(9, 9, 2))
    np.testing.assert_allclose(conv_forward(x, bank), naive_conv(x, bank), atol=1e-12)


def test_conv_is_linear_without_bias():
    rng = np.random.default_rng(1)
    bank = ConvFeatureBank(rng.normal(size=(2, 3, 3, 1)), np.zeros(2), 1)
    x, y = rng.normal(size=(6, 6, 1)), rng.normal(size=(6, 6, 1))
    np.testing.assert_allclose(conv_forward(2.0 * x + y, bank),
                               2.0 * conv_forward(x, bank) + conv_forward(y, bank), atol=1e-12)


def test_conv_rejects_geometry_mismatch():
    bank = ConvFeatureBank(np.ones((1, 3, 3, 3)), np.zeros(1), 1)
    with pytest.raises(RejectedInputError):
        conv_forward(np.ones((5, 5, 1)), bank)
    with pytest.raises(RejectedInputError):
        conv_forward(np.ones((2, 2, 3)), bank)


def test_relu_and_maxpool():
    assert relu(np.array([-1.0, 0.0, 2.5])).tolist() == [0.0, 0.0, 2.5]
    fmap = np.arange(25, dtype=np.float64).reshape(5, 5, 1)
    pooled = maxpool(fmap)
    assert pooled.shape == (2, 2, 1)
    assert pooled[..., 0].tolist() == [[12.0, 14.0], [22.0, 24.0]]
    with pytest.raises(RejectedInputError):
        maxpool(np.zeros((2, 2, 1)))


def test_default_geometry_pools_to_one_vector():
    bank = init_bank(64, 11, 3, 4, np.random.default_rng(0))
    assert bank.window == 19
    y = feature_forward(np.random.default_rng(1).random((19, 19, 3)), bank)
    assert y.shape == (64,)
    assert feature_length(bank, 19) == 64
    assert np.all(y >= 0.0)


def test_extract_features_is_chunk_invariant(tiny_bank):
    patches = np.random.default_rng(2).random((10, 5, 5, 3))
    np.testing.assert_allclose(extract_features(patches, tiny_bank, batch_size=3),
                               feature_forward(patches, tiny_bank))
    with pytest.raises(RejectedInputError):
        extract_features(patches[:0], tiny_bank)


def test_softmax_is_shift_invariant():
    logits = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(softmax(logits), softmax(logits + 1000.0))
    expected = np.exp([1.0, 2.0, 3.0]) / np.exp([1.0, 2.0, 3.0]).sum()
    np.testing.assert_allclose(softmax(logits)[0], expected)


def test_uniform_head_gives_log_c():
    features = np.random.default_rng(0).random((5, 6))
    targets = np.eye(4)[[0, 1, 2, 3, 0]]
    loss, _, _ = head_loss_and_grads(features, targets, ClassifierHead(np.zeros((4, 6))))
    assert loss == pytest.approx(np.log(4.0))


def test_confident_correct_head_has_near_zero_loss():
    features = 50.0 * np.eye(3)
    loss, _, _ = head_loss_and_grads(features, np.eye(3), ClassifierHead(np.eye(3)))
    assert loss < 1e-12
    assert predict(features, ClassifierHead(np.eye(3))).tolist() == [0, 1, 2]


def test_vanishing_probability_is_clamped():
    loss, _, _ = head_loss_and_grads(np.array([[100.0, 0.0]]), np.array([[0.0, 1.0]]),
                                     ClassifierHead(np.eye(2)))
    assert loss == pytest.approx(-np.log(LOG_FLOOR))


def test_classify_returns_distribution():
    head = init_head(5, 8, np.random.default_rng(0))
    probs = classify(np.random.default_rng(1).random(8), head)
    assert probs.shape == (5,)
    assert probs.sum() == pytest.approx(1.0)


def _numeric_gradient(f, array, eps=1e-6):
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        saved = array[index]
        array[index] = saved + eps
        plus = f()
        array[index] = saved - eps
        minus = f()
        array[index] = saved
        grad[index] = (plus - minus) / (2.0 * eps)
    return grad


# (a, w, s, d, C, b): patch side, filter side, stride, filters, classes, channels
GEOMETRIES = [
    (7, 3, 1, 2, 3, 2),
    (9, 5, 2, 3, 4, 1),
    (9, 3, 2, 4, 2, 3),
    (8, 4, 1, 1, 4, 2),
    (9, 5, 1, 2, 3, 1),
    (9, 3, 3, 2, 2, 2),
]


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("a, w, s, d, n_classes, b", GEOMETRIES)
def test_analytic_gradients_match_finite_differences(a, w, s, d, n_classes, b, seed):
    rng = np.random.default_rng(seed)
    bank = ConvFeatureBank(rng.normal(size=(d, w, w, b)), rng.normal(0.1, 0.1, size=d), s)
    head = ClassifierHead(rng.normal(size=(n_classes, feature_length(bank, a))))
    patches = rng.normal(size=(2, a, a, b))
    targets = np.eye(n_classes)[rng.integers(0, n_classes, size=2)]
    _, grads = loss_and_grads(patches, targets, bank, head)

    def loss():
        return batch_loss(patches, targets, bank, head)

    np.testing.assert_allclose(grads.d_filters, _numeric_gradient(loss, bank.filters), rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(grads.d_biases, _numeric_gradient(loss, bank.biases), rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(grads.d_head, _numeric_gradient(loss, head.weights), rtol=1e-4, atol=1e-7)


def test_frozen_groups_get_zero_gradients(tiny_bank):
    rng = np.random.default_rng(4)
    patches = rng.random((3, 5, 5, 3))
    head = init_head(2, feature_length(tiny_bank, 5), rng)
    targets = np.eye(2)[[0, 1, 0]]
    _, frozen_bank = loss_and_grads(patches, targets, tiny_bank, head, freeze_bank=True)
    assert not frozen_bank.d_filters.any() and not frozen_bank.d_biases.any()
    _, frozen_head = loss_and_grads(patches, targets, tiny_bank, head, freeze_head=True)
    assert not frozen_head.d_head.any()
