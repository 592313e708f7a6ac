import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from src.exceptions import RejectedInputError, TrainingFailedError


def _checksum(*arrays: np.ndarray) -> str:
    digest = hashlib.sha256()
    for array in arrays:
        digest.update(np.ascontiguousarray(array).tobytes())
    return digest.hexdigest()


@dataclass
class ConvFeatureBank:
    """Convolutional feature generator: the transferable artifact.
    Attributes:
        filters (np.ndarray): d x w x w x b filter weights, (feature, row, column, channel).
        biases (np.ndarray): d per-feature biases.
        stride (int): Convolution stride s.
    A patch of side `window` = w + 2s pools down to a single d-vector.
    """
    filters: np.ndarray
    biases: np.ndarray
    stride: int

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        self.stride = int(self.stride)
        if self.filters.ndim != 4 or self.filters.shape[1] != self.filters.shape[2]:
            raise RejectedInputError(f"filters must be d x w x w x b, got shape {self.filters.shape}")
        if self.biases.shape != (self.filters.shape[0],):
            raise RejectedInputError(
                f"expected {self.filters.shape[0]} biases, got shape {self.biases.shape}")
        if min(self.filters.shape) < 1 or self.stride < 1:
            raise RejectedInputError("bank needs d, w, b and stride all >= 1")
        if not (np.isfinite(self.filters).all() and np.isfinite(self.biases).all()):
            raise RejectedInputError("bank parameters must be finite")

    @property
    def d(self) -> int:
        return self.filters.shape[0]

    @property
    def w(self) -> int:
        return self.filters.shape[1]

    @property
    def b(self) -> int:
        return self.filters.shape[3]

    @property
    def window(self) -> int:
        return self.w + 2 * self.stride

    def copy(self) -> "ConvFeatureBank":
        return ConvFeatureBank(self.filters.copy(), self.biases.copy(), self.stride)

    def checksum(self) -> str:
        return _checksum(self.filters, self.biases)

    def __repr__(self):
        return f"<ConvFeatureBank(d={self.d}, w={self.w}, b={self.b}, s={self.stride})>"


@dataclass
class ClassifierHead:
    """Softmax classifier weights V, one row per class, no bias."""
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise RejectedInputError(f"head weights must be C x D, got shape {self.weights.shape}")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(self.weights.copy())

    def checksum(self) -> str:
        return _checksum(self.weights)

    def __repr__(self):
        return f"<ClassifierHead(C={self.n_classes}, D={self.n_features})>"


@dataclass
class GradientSet:
    d_filters: np.ndarray
    d_biases: np.ndarray
    d_head: np.ndarray


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass
class OptimizerState:
    """Optimizer hyper-parameters plus per-parameter accumulators.
    `first_moment` doubles as the SGD momentum buffer.
    """
    kind: OptimizerKind = OptimizerKind.ADAM
    lr: float = 1e-3
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class TaskDataset:
    """Self-labeled contextual-group task.
    Attributes:
        patches (np.ndarray): n x a x a x b stack of patches.
        labels (np.ndarray): n class indices in [0, n_classes).
        positions (np.ndarray): n x 3 (source image index, top row, left column) of every window.
        n_classes (int): C.
        per_class (int): examples per class (N for a full task, fewer after a split).
    """
    patches: np.ndarray
    labels: np.ndarray
    positions: np.ndarray
    n_classes: int
    per_class: int

    def __len__(self):
        return len(self.labels)

    @property
    def patch_side(self) -> int:
        return self.patches.shape[1]

    def one_hot(self) -> np.ndarray:
        targets = np.zeros((len(self.labels), self.n_classes), dtype=np.float64)
        targets[np.arange(len(self.labels)), self.labels] = 1.0
        return targets

    def subset(self, indices: np.ndarray, per_class: int) -> "TaskDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return TaskDataset(
            patches=self.patches[indices],
            labels=self.labels[indices],
            positions=self.positions[indices],
            n_classes=self.n_classes,
            per_class=per_class,
        )

    def __repr__(self):
        return f"<TaskDataset(C={self.n_classes}, N={self.per_class}, examples={len(self)})>"


@dataclass
class ImageStore:
    images: List[np.ndarray]
    identifiers: List[str]
    skipped: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.images)


@dataclass
class HsiCube:
    """Hyperspectral cube with its ground-truth raster (0 = unlabeled)."""
    cube: np.ndarray
    label_map: np.ndarray
    class_names: List[str]

    @property
    def bands(self) -> int:
        return self.cube.shape[2]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def labeled_pixels(self) -> np.ndarray:
        """Row/column coordinates of labeled pixels in raster order."""
        return np.argwhere(self.label_map > 0)

    def __repr__(self):
        height, width, bands = self.cube.shape
        return f"<HsiCube({height}x{width}x{bands}, classes={self.n_classes})>"


@dataclass
class TransferableAccuracy:
    value: float
    n_classes: int
    n_samples: int
    n_correct: int


class TrainingTrace:
    """Append-only per-iteration record of an EM run."""

    def __init__(self):
        self.records = []

    def append(self, record) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise TrainingFailedError(
                f"trace iteration {record.iteration} does not follow {self.records[-1].iteration}")
        self.records.append(record)

    def accuracies(self) -> List[float]:
        return [record.accuracy for record in self.records]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass
class FilterGridImage:
    """Rendered filter panel(s).
    `pixels` holds one uint8 grid per written file; minima/maxima are the
    per-filter (per-band for split grids) normalization ranges.
    """
    pixels: List[np.ndarray]
    paths: List[str]
    rows: int
    cols: int
    tile_size: int
    minima: np.ndarray
    maxima: np.ndarray
    constant: Optional[np.ndarray] = None
