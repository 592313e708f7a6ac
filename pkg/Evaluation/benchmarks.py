"""Downstream benchmarks on frozen features: texture patches and hyperspectral pixels."""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from Evaluation.knn import knn_classify
from Models.models import ConvFeatureBank, HsiCube, ImageStore
from Network.layers import extract_features, init_head, predict
from Schemas.schemas import BenchResult, EvaluationConfig, TrainerConfig
from src import logger
from src.exceptions import RejectedInputError
from Training.em_trainer import train_head


def summarize(name: str, truths: Sequence[np.ndarray], predictions: Sequence[np.ndarray],
              class_labels: Sequence[int], class_names: Sequence[str],
              flagged: Sequence[int] = ()) -> BenchResult:
    """Pool per-run predictions into one confusion matrix plus per-class precision and recall."""
    y_true = np.concatenate(truths)
    y_pred = np.concatenate(predictions)
    labels = list(class_labels)
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, _, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0)
    run_accuracies = [float(np.mean(t == p)) for t, p in zip(truths, predictions)]
    return BenchResult(
        name=name,
        accuracy=float(np.trace(confusion)) / float(confusion.sum()),
        accuracy_std=float(np.std(run_accuracies)),
        run_accuracies=run_accuracies,
        class_labels=[int(label) for label in labels],
        class_names=list(class_names),
        precision=[float(value) for value in precision],
        recall=[float(value) for value in recall],
        confusion=confusion.astype(int).tolist(),
        flagged_classes=[int(label) for label in flagged],
    )


def _fit_and_predict(train_x: np.ndarray, train_y: np.ndarray, test_x: np.ndarray, n_classes: int,
                     classifier: str, evaluation_config: EvaluationConfig,
                     trainer_config: TrainerConfig, rng: np.random.Generator) -> np.ndarray:
    if classifier == "knn":
        return knn_classify(train_x, train_y, test_x, evaluation_config.knn_k)
    targets = np.zeros((len(train_y), n_classes))
    targets[np.arange(len(train_y)), train_y] = 1.0
    head = init_head(n_classes, train_x.shape[1], rng)
    head, _ = train_head(train_x, targets, head, trainer_config, evaluation_config.head_epochs, rng)
    return predict(test_x, head)


# --- Texture benchmark ---
def draw_texture_split(image_shape: Tuple[int, int], patch_size: int,
                       evaluation_config: EvaluationConfig,
                       rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Top-left corners of train and test patches for one texture.

    The image is tiled into square subregions; disjoint random sets of subregions
    go to train and test and each contributes one patch lying entirely inside it.
    """
    size = evaluation_config.subregion_size
    if patch_size > size:
        raise RejectedInputError(
            f"{patch_size}-pixel patches do not fit in {size}-pixel subregions without overlap")
    rows, cols = image_shape[0] // size, image_shape[1] // size
    n_train, n_test = evaluation_config.train_per_class, evaluation_config.test_per_class
    if rows * cols < n_train + n_test:
        raise RejectedInputError(
            f"a {image_shape[0]}x{image_shape[1]} texture has {rows * cols} subregions, "
            f"{n_train + n_test} are needed")
    order = rng.permutation(rows * cols)[:n_train + n_test]
    corners = np.stack([order // cols * size, order % cols * size], axis=1)
    corners = corners + rng.integers(0, size - patch_size + 1, size=corners.shape)
    return corners[:n_train], corners[n_train:]


def _cut(image: np.ndarray, corners: np.ndarray, patch_size: int) -> np.ndarray:
    return np.stack([image[r:r + patch_size, c:c + patch_size] for r, c in corners])


def texture_benchmark(bank: Optional[ConvFeatureBank], textures: ImageStore,
                      evaluation_config: EvaluationConfig, trainer_config: TrainerConfig, seed: int,
                      classifier: Optional[str] = None, patch_size: Optional[int] = None) -> BenchResult:
    """Classify texture patches from frozen bank features (or raw pixels when bank is None).

    Run r draws from default_rng([seed, r]). Grayscale patches are replicated to
    the bank's channel count.
    """
    classifier = classifier or evaluation_config.texture_classifier
    if bank is not None:
        patch_size = bank.window
        if bank.b not in (1, 3):
            raise RejectedInputError(f"texture patches are gray; a {bank.b}-channel bank cannot take them")
    elif patch_size is None:
        raise RejectedInputError("raw-pixel texture baseline needs an explicit patch size")
    n_classes = len(textures)
    truths, predictions = [], []
    for run in range(evaluation_config.texture_runs):
        rng = np.random.default_rng([seed, run])
        train_patches, test_patches, train_y, test_y = [], [], [], []
        for label, image in enumerate(textures.images):
            train_corners, test_corners = draw_texture_split(image.shape[:2], patch_size, evaluation_config, rng)
            train_patches.append(_cut(image, train_corners, patch_size))
            test_patches.append(_cut(image, test_corners, patch_size))
            train_y.append(np.full(len(train_corners), label))
            test_y.append(np.full(len(test_corners), label))
        train_x, test_x = np.concatenate(train_patches), np.concatenate(test_patches)
        train_y, test_y = np.concatenate(train_y), np.concatenate(test_y)
        if bank is not None:
            if bank.b == 3:
                train_x, test_x = np.repeat(train_x, 3, axis=-1), np.repeat(test_x, 3, axis=-1)
            train_x, test_x = extract_features(train_x, bank), extract_features(test_x, bank)
        else:
            train_x, test_x = train_x.reshape(len(train_x), -1), test_x.reshape(len(test_x), -1)
        predicted = _fit_and_predict(train_x, train_y, test_x, n_classes, classifier,
                                     evaluation_config, trainer_config, rng)
        truths.append(test_y)
        predictions.append(predicted)
        logger.info(f"texture run {run}: accuracy {np.mean(predicted == test_y):.4f}")
    source = "cg" if bank is not None else "raw"
    return summarize(f"texture-{source}-{classifier}", truths, predictions,
                     list(range(n_classes)), list(textures.identifiers))


# --- Hyperspectral benchmark ---
def stratified_folds(labels: np.ndarray, folds: int,
                     rng: np.random.Generator) -> Tuple[np.ndarray, List[int]]:
    """Fold index per example; classes with fewer than `folds` members get -1 (always training)."""
    fold_ids = np.full(len(labels), -1, dtype=np.int64)
    flagged = []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        if len(members) < folds:
            flagged.append(int(label))
            logger.warning(f"class {label} has {len(members)} pixels (< {folds} folds); kept in training only")
            continue
        for fold, part in enumerate(np.array_split(rng.permutation(members), folds)):
            fold_ids[part] = fold
    return fold_ids, flagged


def pixel_neighborhoods(cube: np.ndarray, coords: np.ndarray, side: int) -> np.ndarray:
    """side x side x bands windows centred on each pixel, clamp-to-border at the edges."""
    before, after = (side - 1) // 2, side // 2
    padded = np.pad(cube, ((before, after), (before, after), (0, 0)), mode="edge")
    windows = sliding_window_view(padded, (side, side), axis=(0, 1))
    return np.ascontiguousarray(windows[coords[:, 0], coords[:, 1]].transpose(0, 2, 3, 1))


def hsi_benchmark(bank: Optional[ConvFeatureBank], hsi: HsiCube, evaluation_config: EvaluationConfig,
                  seed: int) -> BenchResult:
    """Stratified K-fold K-NN on the labeled pixels, from bank features or raw spectra."""
    coords = hsi.labeled_pixels()
    labels = hsi.label_map[coords[:, 0], coords[:, 1]]
    if bank is not None:
        if bank.b != hsi.bands:
            raise RejectedInputError(f"bank expects {bank.b} bands, cube has {hsi.bands}")
        features = extract_features(pixel_neighborhoods(hsi.cube, coords, bank.window), bank)
    else:
        features = hsi.cube[coords[:, 0], coords[:, 1]]
    folds = evaluation_config.hsi_folds
    fold_ids, flagged = stratified_folds(labels, folds, np.random.default_rng([seed, 0]))

    truths, predictions = [], []
    for fold in range(folds):
        test = fold_ids == fold
        predicted = knn_classify(features[~test], labels[~test], features[test], evaluation_config.knn_k)
        truths.append(labels[test])
        predictions.append(predicted)
        logger.info(f"HSI fold {fold}: accuracy {np.mean(predicted == labels[test]):.4f}")
    class_labels = list(range(1, hsi.n_classes + 1))
    source = "cg" if bank is not None else "raw"
    return summarize(f"hsi-{source}-knn", truths, predictions, class_labels, hsi.class_names, flagged)
