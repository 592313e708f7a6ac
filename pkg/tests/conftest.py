import numpy as np
import pytest
from PIL import Image

from Models.models import ConvFeatureBank, HsiCube, ImageStore
from Network.layers import init_bank
from Schemas.schemas import BankConfig, OptimizerConfig, SamplerConfig, TrainerConfig


def bar_image(size: int, orientation: str, color) -> np.ndarray:
    """Colored bars on black, 3 pixels wide with period 6."""
    rows, cols = np.indices((size, size))
    coordinate = {"vertical": cols, "horizontal": rows, "diagonal": rows + cols}[orientation]
    mask = (coordinate % 6) < 3
    return mask[..., None] * np.asarray(color, dtype=np.float64)


@pytest.fixture
def bar_images():
    images = [
        bar_image(24, "vertical", (1.0, 0.2, 0.2)),
        bar_image(24, "horizontal", (0.2, 1.0, 0.2)),
        bar_image(24, "diagonal", (0.2, 0.2, 1.0)),
    ]
    return ImageStore(images=images, identifiers=["a.png", "b.png", "c.png"])


@pytest.fixture
def oriented_bars():
    """Nine 20x20 images, every pairing of three colors and three bar orientations."""
    colors = [(1.0, 0.2, 0.2), (0.2, 1.0, 0.2), (0.2, 0.2, 1.0)]
    orientations = ["vertical", "horizontal", "diagonal"]
    images = [bar_image(20, orientation, color) for color in colors for orientation in orientations]
    return ImageStore(images=images, identifiers=[f"bars{i}.png" for i in range(len(images))])


@pytest.fixture
def image_dir(tmp_path, bar_images):
    directory = tmp_path / "images"
    directory.mkdir()
    for name, image in zip(bar_images.identifiers, bar_images.images):
        Image.fromarray(np.rint(image * 255).astype(np.uint8)).save(directory / name)
    return directory


@pytest.fixture
def tiny_bank_config():
    return BankConfig(d=4, w=3, s=1)


@pytest.fixture
def tiny_sampler():
    return SamplerConfig(n_groups=4, group_size=8, patch_size=5, channels=3, slide_radius=2)


@pytest.fixture
def tiny_trainer():
    return TrainerConfig(batch_size=16, max_iterations=2, checkpoint_every=0,
                         head_optimizer=OptimizerConfig(lr=0.01),
                         bank_optimizer=OptimizerConfig(lr=0.01))


@pytest.fixture
def tiny_bank(tiny_bank_config) -> ConvFeatureBank:
    cfg = tiny_bank_config
    return init_bank(cfg.d, cfg.w, 3, cfg.s, np.random.default_rng(7))


@pytest.fixture
def two_class_cube():
    """10x10x4 cube: left half one flat spectrum, right half another, light noise."""
    rng = np.random.default_rng(3)
    cube = np.zeros((10, 10, 4))
    cube[:, 5:] = 1.0
    cube += rng.normal(0.0, 0.01, size=cube.shape)
    label_map = np.ones((10, 10), dtype=np.int64)
    label_map[:, 5:] = 2
    label_map[0, 0] = 0
    return HsiCube(cube=cube, label_map=label_map, class_names=["soil", "water"])
