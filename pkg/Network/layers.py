"""Forward and backward passes of the three-layer CG-CNN.

Layout conventions: patches are (row, column, channel), stacks of patches add a
leading example axis, filters are (feature, row, column, channel). Everything is
float64. The convolution is a cross-correlation (no kernel flip).
"""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from Models.models import ClassifierHead, ConvFeatureBank, GradientSet
from src import logger
from src.exceptions import NumericalError, RejectedInputError

POOL_KERNEL = 3
POOL_STRIDE = 2
LOG_FLOOR = 1e-12


def init_bank(d: int, w: int, b: int, s: int, rng: np.random.Generator) -> ConvFeatureBank:
    """Fan-in scaled Gaussian filters, zero biases."""
    scale = np.sqrt(2.0 / (w * w * b))
    filters = rng.normal(0.0, scale, size=(d, w, w, b))
    return ConvFeatureBank(filters, np.zeros(d), s)


def init_head(n_classes: int, n_features: int, rng: np.random.Generator) -> ClassifierHead:
    return ClassifierHead(rng.normal(0.0, 1.0 / np.sqrt(n_features), size=(n_classes, n_features)))


def _as_stack(x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise RejectedInputError(f"expected an a x a x b patch or a stack of them, got shape {x.shape}")


def _im2col(x: np.ndarray, bank: ConvFeatureBank) -> np.ndarray:
    """Stack (n, a, a, b) -> receptive fields (n, m, m, w*w*b) in (row, column, channel) order."""
    n, height, width, channels = x.shape
    if height != width:
        raise RejectedInputError(f"patches must be square, got {height}x{width}")
    if channels != bank.b:
        raise RejectedInputError(f"patch has {channels} channels but the bank expects {bank.b}")
    if height < bank.w:
        raise RejectedInputError(f"patch side {height} is smaller than the filter side {bank.w}")
    if not np.isfinite(x).all():
        raise RejectedInputError("patch entries must be finite")
    windows = sliding_window_view(x, (bank.w, bank.w), axis=(1, 2))[:, ::bank.stride, ::bank.stride]
    m = windows.shape[1]
    return windows.transpose(0, 1, 2, 4, 5, 3).reshape(n, m, m, -1)


def conv_forward(x, bank: ConvFeatureBank) -> np.ndarray:
    """Pre-activation map, m x m x d with m = floor((a - w) / s) + 1."""
    stack, single = _as_stack(x)
    cols = _im2col(stack, bank)
    out = cols @ bank.filters.reshape(bank.d, -1).T + bank.biases
    return out[0] if single else out


def relu(feature_map) -> np.ndarray:
    return np.maximum(np.asarray(feature_map, dtype=np.float64), 0.0)


def _pool_windows(stack: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    m = stack.shape[1]
    if m < kernel:
        raise RejectedInputError(f"max-pool needs a map of side >= {kernel}, got {m}")
    windows = sliding_window_view(stack, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    return windows.reshape(windows.shape[:4] + (kernel * kernel,))


def maxpool(feature_map, kernel: int = POOL_KERNEL, stride: int = POOL_STRIDE) -> np.ndarray:
    """Per-channel window maximum, m' = floor((m - kernel) / stride) + 1."""
    stack, single = _as_stack(feature_map)
    pooled = _pool_windows(stack, kernel, stride).max(axis=-1)
    return pooled[0] if single else pooled


def feature_forward(x, bank: ConvFeatureBank) -> np.ndarray:
    """y = MaxPool(ReLU(W * x)), flattened in raster order (row, column, feature)."""
    stack, single = _as_stack(x)
    pooled = maxpool(relu(conv_forward(stack, bank)))
    features = pooled.reshape(len(stack), -1)
    return features[0] if single else features


def extract_features(patches: np.ndarray, bank: ConvFeatureBank, batch_size: int = 1024) -> np.ndarray:
    """feature_forward over a stack, evaluated in fixed-size chunks."""
    if len(patches) == 0:
        raise RejectedInputError("no patches to featurize")
    chunks = [feature_forward(patches[start:start + batch_size], bank)
              for start in range(0, len(patches), batch_size)]
    return np.concatenate(chunks, axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def _logits(features: np.ndarray, head: ClassifierHead) -> np.ndarray:
    if features.shape[-1] != head.n_features:
        raise RejectedInputError(
            f"feature length {features.shape[-1]} does not match head width {head.n_features}")
    logits = features @ head.weights.T
    if not np.isfinite(logits).all():
        raise NumericalError("non-finite logits in softmax classifier")
    return logits


def classify(y, head: ClassifierHead) -> np.ndarray:
    """Softmax class probabilities for one feature vector or a stack of them."""
    return softmax(_logits(np.asarray(y, dtype=np.float64), head))


def predict(features: np.ndarray, head: ClassifierHead) -> np.ndarray:
    """Arg-max class of every row; ties go to the lowest class index."""
    return np.argmax(_logits(features, head), axis=1)


def head_loss_and_grads(features: np.ndarray, targets: np.ndarray,
                        head: ClassifierHead) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean negative log-likelihood of the softmax head on fixed features.
    Returns (loss, d_head, d_features).
    """
    n = len(features)
    if n == 0:
        raise RejectedInputError("loss needs a nonempty batch")
    if targets.shape != (n, head.n_classes):
        raise RejectedInputError(
            f"targets of shape {targets.shape} do not match {n} examples over {head.n_classes} classes")
    probs = softmax(_logits(features, head))
    floored = probs < LOG_FLOOR
    if np.any(floored & (targets > 0)):
        logger.warning("true-class probability below %.0e clamped in log-likelihood", LOG_FLOOR)
    loss = float(-np.sum(targets * np.log(np.maximum(probs, LOG_FLOOR))) / n)
    d_logits = (probs * targets.sum(axis=1, keepdims=True) - targets) / n
    return loss, d_logits.T @ features, d_logits @ head.weights


def loss_and_grads(patches, targets, bank: ConvFeatureBank, head: ClassifierHead,
                   freeze_bank: bool = False, freeze_head: bool = False) -> Tuple[float, GradientSet]:
    """Cross-entropy loss (mean over the batch) and its exact analytic gradients.

    `patches` is an (n, a, a, b) stack and `targets` the matching (n, C) one-hot rows.
    Frozen parameter groups get all-zero gradients.
    """
    stack, _ = _as_stack(patches)
    targets = np.asarray(targets, dtype=np.float64)

    cols = _im2col(stack, bank)
    pre = cols @ bank.filters.reshape(bank.d, -1).T + bank.biases
    windows = _pool_windows(relu(pre), POOL_KERNEL, POOL_STRIDE)
    pooled = windows.max(axis=-1)
    features = pooled.reshape(len(stack), -1)

    loss, d_head, d_features = head_loss_and_grads(features, targets, head)
    if freeze_head:
        d_head = np.zeros_like(head.weights)

    if freeze_bank:
        return loss, GradientSet(np.zeros_like(bank.filters), np.zeros_like(bank.biases), d_head)

    # route each pooled gradient to the first arg-max of its window
    arg = windows.argmax(axis=-1)
    n_idx, i_idx, j_idx, k_idx = np.indices(pooled.shape)
    rows = i_idx * POOL_STRIDE + arg // POOL_KERNEL
    cols_pos = j_idx * POOL_STRIDE + arg % POOL_KERNEL
    d_act = np.zeros_like(pre)
    np.add.at(d_act, (n_idx, rows, cols_pos, k_idx), d_features.reshape(pooled.shape))

    d_pre = (d_act * (pre > 0)).reshape(-1, bank.d)
    d_filters = (d_pre.T @ cols.reshape(-1, cols.shape[-1])).reshape(bank.filters.shape)
    d_biases = d_pre.sum(axis=0)
    return loss, GradientSet(d_filters, d_biases, d_head)


def batch_loss(patches, targets, bank: ConvFeatureBank, head: ClassifierHead) -> float:
    features = extract_features(np.asarray(patches, dtype=np.float64), bank)
    loss, _, _ = head_loss_and_grads(features, np.asarray(targets, dtype=np.float64), head)
    return loss


def feature_length(bank: ConvFeatureBank, patch_side: int) -> int:
    """Length of the flattened pooled map for a patch of the given side."""
    m = (patch_side - bank.w) // bank.stride + 1
    pooled = (m - POOL_KERNEL) // POOL_STRIDE + 1
    if m < 1 or pooled < 1:
        raise RejectedInputError(f"a {patch_side}-pixel patch is too small for {bank!r}")
    return pooled * pooled * bank.d
