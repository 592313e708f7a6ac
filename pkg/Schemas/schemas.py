from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, StrictInt, conint, validator

from Models.models import OptimizerKind

# Integer keys refuse floats and bools instead of truncating them.
PositiveInt = conint(strict=True, ge=1)
NonNegativeInt = conint(strict=True, ge=0)
AtLeastTwo = conint(strict=True, ge=2)


class SamplerMode(str, Enum):
    """SamplerMode
    Selects the ingestion path and augmentation for contextual groups.
    """
    RGB = "rgb"
    HSI = "hsi"


class RunMode(str, Enum):
    TRAIN = "train"
    UTILITY = "utility"
    TEXTURE = "texture"
    HSI = "hsi"
    EXPORT = "export"


class BankKind(str, Enum):
    RANDOM = "random"
    CG = "cg"
    SPECIFIC = "specific"


class StrictModel(BaseModel):
    class Config:
        extra = "forbid"
        validate_assignment = True


class BankConfig(StrictModel):
    """Feature Bank Geometry
    Attributes:
        d (int): Number of features (filters).
        w (int): Filter side in pixels.
        s (int): Convolution stride.
    The defaults mirror an AlexNet-shaped first block: 64 filters of 11x11 at stride 4,
    so a 19x19 patch pools down to one 64-vector.
    """
    d: PositiveInt = 64
    w: PositiveInt = 11
    s: PositiveInt = 4

    class Config:
        schema_extra = {"example": {"d": 64, "w": 11, "s": 4}}


class SamplerConfig(StrictModel):
    """Contextual Group Sampler Settings
    Attributes:
        n_groups (int): C, contextual groups (classes) per task.
        group_size (int): N, patches per group, seed window included.
        patch_size (int): a, patch side in pixels.
        channels (int): b, channel count of every patch.
        slide_radius (int): g, maximum slide of a member away from its seed window.
        gray_probability (float): Chance that an RGB member is converted to luma.
        jitter_amplitude (float): Half-width of the per-channel multiplicative color jitter.
        mode (SamplerMode): rgb image directories or hsi cubes.
    """
    n_groups: PositiveInt = 100
    group_size: PositiveInt = 16
    patch_size: PositiveInt = 19
    channels: PositiveInt = 3
    slide_radius: NonNegativeInt = 25
    gray_probability: float = Field(0.5, ge=0.0, le=1.0)
    jitter_amplitude: float = Field(0.10, ge=0.0)
    mode: SamplerMode = SamplerMode.RGB

    class Config:
        schema_extra = {
            "example": {
                "n_groups": 100,
                "group_size": 16,
                "patch_size": 19,
                "channels": 3,
                "slide_radius": 25,
                "gray_probability": 0.5,
                "jitter_amplitude": 0.1,
                "mode": "rgb"
            }
        }


class OptimizerConfig(StrictModel):
    kind: OptimizerKind = OptimizerKind.ADAM
    lr: float = Field(1e-3, ge=0.0)
    momentum: float = Field(0.0, ge=0.0, lt=1.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)


class TrainerConfig(StrictModel):
    """EM Trainer Settings
    Attributes:
        epochs_e (int): Epochs of head training per E-step.
        epochs_m (int): Epochs of bank training per M-step.
        head_optimizer (OptimizerConfig): Optimizer for the classifier head.
        bank_optimizer (OptimizerConfig): Optimizer for the feature bank.
        batch_size (int): Minibatch size.
        max_iterations (int): Upper bound on EM iterations.
        convergence_window (int): Number of recent A values inspected for convergence.
        convergence_threshold (float): Converged once max - min of the window drops below this.
        e_fraction (float): Share of every group assigned to the E-step subset.
        checkpoint_every (int): Write a bank checkpoint every k iterations (0 disables).
        max_consecutive_aborts (int): Diverged iterations tolerated in a row.
        record_wall_time (bool): Fill the `seconds` column of trace.csv with wall time (zeros otherwise).
        seed (int): Root of every random stream of a training run (set from the run seed).
    Defaults are the fast Adam mode (one epoch per step); `classic()` (config key trainer.preset=classic)
    gives SGD with momentum and 10 + 10 epochs.
    """
    epochs_e: PositiveInt = 1
    epochs_m: PositiveInt = 1
    head_optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    bank_optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    batch_size: PositiveInt = 64
    max_iterations: PositiveInt = 100
    convergence_window: AtLeastTwo = 10
    convergence_threshold: float = Field(0.01, gt=0.0)
    e_fraction: float = Field(0.5, gt=0.0, lt=1.0)
    checkpoint_every: NonNegativeInt = 10
    max_consecutive_aborts: NonNegativeInt = 3
    record_wall_time: bool = False
    seed: NonNegativeInt = 0

    @classmethod
    def classic(cls, lr: float = 0.01, **overrides) -> "TrainerConfig":
        sgd = OptimizerConfig(kind=OptimizerKind.SGD, lr=lr, momentum=0.9)
        settings = dict(epochs_e=10, epochs_m=10, head_optimizer=sgd, bank_optimizer=sgd.copy())
        settings.update(overrides)
        return cls(**settings)


class EvaluationConfig(StrictModel):
    """Evaluation Settings
    Attributes:
        c_grid (List[int]): Class counts at which utility curves are sampled.
        trials (int): Tasks evaluated per grid point.
        split_fraction (float): Share of every group used to train the evaluation head.
        head_epochs (int): Epochs used to train every evaluation head.
        specific_epochs (int): Epochs of joint bank + head training for task-specific banks.
        texture_runs (int): Independent train/test draws of the texture benchmark.
        subregion_size (int): Side of the texture subregions patches are drawn from.
        train_per_class (int): Training subregions per texture.
        test_per_class (int): Test subregions per texture.
        texture_classifier (str): softmax or knn on top of frozen features.
        hsi_folds (int): Folds of the stratified cross validation.
        knn_k (int): Neighbours used by the K-NN classifier.
        raw_baseline (bool): Also score raw pixels / raw spectra with K-NN.
    """
    c_grid: List[StrictInt] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    trials: PositiveInt = 10
    split_fraction: float = Field(0.5, gt=0.0, lt=1.0)
    head_epochs: PositiveInt = 20
    specific_epochs: PositiveInt = 20
    texture_runs: PositiveInt = 10
    subregion_size: PositiveInt = 32
    train_per_class: PositiveInt = 128
    test_per_class: PositiveInt = 128
    texture_classifier: str = "softmax"
    hsi_folds: AtLeastTwo = 10
    knn_k: PositiveInt = 1
    raw_baseline: bool = True

    @validator("c_grid")
    def grid_strictly_increasing(cls, value):
        if not value or value[0] < 1 or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("c_grid must be strictly increasing positive class counts")
        return value

    @validator("texture_classifier")
    def known_classifier(cls, value):
        if value not in ("softmax", "knn"):
            raise ValueError("texture_classifier must be 'softmax' or 'knn'")
        return value


class PathsConfig(StrictModel):
    """Filesystem locations used by the commands.
    Attributes:
        dataset_dir (Optional[str]): RGB training images.
        heldout_dir (Optional[str]): RGB images not used in training (utility curves).
        texture_dir (Optional[str]): Grayscale texture images.
        cube (Optional[str]): Raw hyperspectral cube; its header sits next to it as <stem>.json.
        labels (Optional[str]): Ground-truth raster of the cube.
        bank (Optional[str]): Existing bank in the binary container format.
        out_dir (str): Directory receiving every artifact.
    """
    dataset_dir: Optional[str] = None
    heldout_dir: Optional[str] = None
    texture_dir: Optional[str] = None
    cube: Optional[str] = None
    labels: Optional[str] = None
    bank: Optional[str] = None
    out_dir: str = "runs/latest"


class RunConfig(StrictModel):
    """Resolved Run Configuration
    Everything a command needs, after defaults, presets, file values and overrides.
    It is written verbatim to manifest.json so every artifact can be reproduced from it.
    """
    mode: RunMode = RunMode.TRAIN
    seed: NonNegativeInt = 0
    paths: PathsConfig = Field(default_factory=PathsConfig)
    bank: BankConfig = Field(default_factory=BankConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)


# --- Report schemas ---
class TraceRecord(BaseModel):
    iteration: int
    accuracy: float = Field(..., ge=0.0, le=1.0)
    loss_e: float
    loss_m: float
    seconds: float = 0.0


class UtilityPoint(BaseModel):
    n_classes: int
    mean: float = Field(..., ge=0.0, le=1.0)
    std: float
    trials: int
    failed: int = 0


class UtilityCurve(BaseModel):
    bank_kind: BankKind
    points: List[UtilityPoint]

    @validator("points")
    def class_counts_increase(cls, value):
        counts = [point.n_classes for point in value]
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError("utility curve class counts must be strictly increasing")
        return value

    def means(self) -> List[float]:
        return [point.mean for point in self.points]


class UtilityReport(BaseModel):
    """Transfer Utility Report
    Attributes:
        c_grid (List[int]): Shared class-count grid.
        random (UtilityCurve): Frozen random banks, fresh per trial.
        cg (UtilityCurve): Frozen contextually guided bank.
        specific (UtilityCurve): Banks trained on each task.
        utility (Optional[float]): U, the normalized area between the curves; None when the
            specific and random curves enclose no area.
    """
    c_grid: List[int]
    random: UtilityCurve
    cg: UtilityCurve
    specific: UtilityCurve
    utility: Optional[float] = None

    @validator("random", "cg", "specific")
    def shares_grid(cls, value, values):
        grid = values.get("c_grid")
        if grid is not None and [point.n_classes for point in value.points] != grid:
            raise ValueError(f"{value.bank_kind.value} curve does not cover the shared C grid")
        return value


class BenchResult(BaseModel):
    """Downstream Benchmark Result
    Attributes:
        name (str): Benchmark and feature source, e.g. texture-cg-softmax.
        accuracy (float): Pooled accuracy, the confusion trace over its total.
        accuracy_std (float): Standard deviation of per-run (per-fold) accuracies.
        run_accuracies (List[float]): Accuracy of every run or fold.
        class_labels (List[int]): Label of every confusion row/column.
        class_names (List[str]): Display names aligned with class_labels.
        precision (List[float]): Per-class precision over pooled predictions.
        recall (List[float]): Per-class recall over pooled predictions.
        confusion (List[List[int]]): Rows are true classes, columns predictions.
        flagged_classes (List[int]): Classes too small to appear in every test fold.
    """
    name: str
    accuracy: float = Field(..., ge=0.0, le=1.0)
    accuracy_std: float
    run_accuracies: List[float]
    class_labels: List[int]
    class_names: List[str]
    precision: List[float]
    recall: List[float]
    confusion: List[List[int]]
    flagged_classes: List[int] = Field(default_factory=list)
