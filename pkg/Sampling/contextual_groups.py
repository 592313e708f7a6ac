"""Self-labeled task construction from contextual groups of neighboring windows."""
from typing import List, Tuple, Union

import numpy as np

from Models.models import HsiCube, ImageStore, TaskDataset
from Schemas.schemas import SamplerConfig, SamplerMode
from src import logger
from src.exceptions import DatasetError, RejectedInputError

# ITU-R BT.601
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def slide_offsets(radius: int) -> np.ndarray:
    """Every (row, column) offset in the L-inf ball of the given radius."""
    steps = np.arange(-radius, radius + 1)
    rows, cols = np.meshgrid(steps, steps, indexing="ij")
    return np.stack([rows.ravel(), cols.ravel()], axis=1)


def _source_images(source: Union[ImageStore, HsiCube]) -> List[np.ndarray]:
    if isinstance(source, HsiCube):
        return [source.cube]
    return list(source.images)


def _seed_site_counts(images: List[np.ndarray], a: int, g: int) -> np.ndarray:
    """Valid seed positions per image: the window plus its +-g slide must stay inside."""
    counts = []
    for image in images:
        rows = image.shape[0] - a - 2 * g + 1
        cols = image.shape[1] - a - 2 * g + 1
        counts.append(max(rows, 0) * max(cols, 0))
    return np.array(counts, dtype=np.int64)


def augment_patch(x: np.ndarray, config: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    """Either the BT.601 luma replicated to 3 channels, or a per-channel multiplicative jitter."""
    if x.shape[-1] != 3:
        raise RejectedInputError(f"color augmentation needs 3 channels, got {x.shape[-1]}")
    if rng.random() < config.gray_probability:
        return np.repeat((x @ LUMA_WEIGHTS)[..., None], 3, axis=-1)
    amplitude = config.jitter_amplitude
    factors = rng.uniform(1.0 - amplitude, 1.0 + amplitude, size=3)
    return np.clip(x * factors, 0.0, 1.0)


def build_task(source: Union[ImageStore, HsiCube], config: SamplerConfig,
               rng: np.random.Generator) -> TaskDataset:
    """C groups of N windows: a uniformly drawn seed window plus N - 1 slides within +-g.

    Seeds are uniform over every valid position of every image, so larger images
    receive proportionally more groups.
    """
    a, g = config.patch_size, config.slide_radius
    n_groups, group_size = config.n_groups, config.group_size
    images = _source_images(source)
    for image in images:
        if image.ndim != 3 or image.shape[2] != config.channels:
            raise RejectedInputError(
                f"source has {image.shape[-1] if image.ndim == 3 else 1} channels, "
                f"sampler is configured for {config.channels}")

    counts = _seed_site_counts(images, a, g)
    too_small = int((counts == 0).sum())
    if too_small:
        logger.warning(f"{too_small} image(s) smaller than {a + 2 * g} pixels per side are not sampled")
    total = int(counts.sum())
    if total == 0:
        raise DatasetError(
            f"no image fits a {a}x{a} window with +-{g} slide room (patch_size={a}, slide_radius={g}); "
            f"images need at least {a + 2 * g} pixels per side")
    ends = np.cumsum(counts)
    augment = config.mode == SamplerMode.RGB

    n = n_groups * group_size
    patches = np.empty((n, a, a, config.channels), dtype=np.float64)
    labels = np.repeat(np.arange(n_groups), group_size)
    positions = np.empty((n, 3), dtype=np.int64)
    for group in range(n_groups):
        site = int(rng.integers(total))
        index = int(np.searchsorted(ends, site, side="right"))
        local = site - (ends[index] - counts[index])
        image = images[index]
        span = image.shape[1] - a - 2 * g + 1
        seed_row, seed_col = g + local // span, g + local % span
        offsets = np.vstack([[0, 0], rng.integers(-g, g + 1, size=(group_size - 1, 2))])
        for member, (d_row, d_col) in enumerate(offsets):
            row, col = seed_row + d_row, seed_col + d_col
            patch = image[row:row + a, col:col + a]
            slot = group * group_size + member
            patches[slot] = augment_patch(patch, config, rng) if augment else patch
            positions[slot] = (index, row, col)
    return TaskDataset(patches=patches, labels=labels, positions=positions,
                       n_classes=n_groups, per_class=group_size)


def split_em(task: TaskDataset, e_fraction: float,
             rng: np.random.Generator) -> Tuple[TaskDataset, TaskDataset]:
    """Stratified random split into the E-step and M-step subsets."""
    if not 0.0 < e_fraction < 1.0:
        raise RejectedInputError(f"e_fraction must lie in (0, 1), got {e_fraction}")
    n_e = int(np.floor(task.per_class * e_fraction + 0.5))
    if n_e < 1 or n_e >= task.per_class:
        raise RejectedInputError(
            f"splitting {task.per_class} examples per class at {e_fraction} leaves a side empty")
    e_parts, m_parts = [], []
    for label in range(task.n_classes):
        members = rng.permutation(np.flatnonzero(task.labels == label))
        e_parts.append(members[:n_e])
        m_parts.append(members[n_e:])
    e_index = np.sort(np.concatenate(e_parts))
    m_index = np.sort(np.concatenate(m_parts))
    return task.subset(e_index, n_e), task.subset(m_index, task.per_class - n_e)
