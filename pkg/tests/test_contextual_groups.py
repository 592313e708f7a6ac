import numpy as np
import pytest

from Models.models import ImageStore
from Sampling.contextual_groups import augment_patch, build_task, slide_offsets, split_em
from Schemas.schemas import SamplerConfig
from src.exceptions import DatasetError, RejectedInputError


def test_slide_lattice_sizes():
    assert len(slide_offsets(25)) == 2601
    assert len(slide_offsets(2)) == 25
    assert np.abs(slide_offsets(2)).max() == 2


def test_zero_slide_repeats_the_seed_window(bar_images):
    config = SamplerConfig(n_groups=3, group_size=5, patch_size=5, slide_radius=0,
                           gray_probability=0.0, jitter_amplitude=0.0)
    task = build_task(bar_images, config, np.random.default_rng(0))
    for group in range(3):
        members = task.patches[task.labels == group]
        assert all(np.array_equal(member, members[0]) for member in members)


def test_members_stay_near_their_seed(bar_images, tiny_sampler):
    task = build_task(bar_images, tiny_sampler, np.random.default_rng(1))
    assert task.patches.shape == (32, 5, 5, 3)
    assert np.bincount(task.labels).tolist() == [8] * 4
    for group in range(4):
        positions = task.positions[task.labels == group]
        assert len(set(positions[:, 0])) == 1
        assert np.abs(positions[:, 1:] - positions[0, 1:]).max() <= 2
        assert positions[:, 1:].min() >= 0
        assert (positions[:, 1:] + 5).max() <= 24


def test_full_gray_probability_gives_luma():
    config = SamplerConfig(gray_probability=1.0)
    red = np.zeros((2, 2, 3))
    red[..., 0] = 1.0
    out = augment_patch(red, config, np.random.default_rng(0))
    np.testing.assert_allclose(out, 0.299)


def test_no_augmentation_is_identity():
    config = SamplerConfig(gray_probability=0.0, jitter_amplitude=0.0)
    x = np.random.default_rng(0).random((3, 3, 3))
    np.testing.assert_array_equal(augment_patch(x, config, np.random.default_rng(1)), x)


def test_jitter_stays_in_range():
    config = SamplerConfig(gray_probability=0.0, jitter_amplitude=0.5)
    out = augment_patch(np.full((3, 3, 3), 0.9), config, np.random.default_rng(2))
    assert out.min() >= 0.45 - 1e-12 and out.max() <= 1.0


def test_gray_conversion_rate():
    config = SamplerConfig(gray_probability=0.5)
    rng = np.random.default_rng(3)
    x = np.array([[[0.2, 0.5, 0.8]]])
    gray = sum(np.ptp(augment_patch(x, config, rng)) == 0.0 for _ in range(10000))
    assert abs(gray / 10000 - 0.5) < 0.02


def test_augmentation_needs_rgb():
    with pytest.raises(RejectedInputError):
        augment_patch(np.zeros((2, 2, 4)), SamplerConfig(), np.random.default_rng(0))


def test_same_rng_same_task(bar_images, tiny_sampler):
    first = build_task(bar_images, tiny_sampler, np.random.default_rng(5))
    second = build_task(bar_images, tiny_sampler, np.random.default_rng(5))
    np.testing.assert_array_equal(first.patches, second.patches)
    np.testing.assert_array_equal(first.positions, second.positions)


def test_sampler_rejects_unusable_sources(bar_images):
    with pytest.raises(RejectedInputError):
        build_task(bar_images, SamplerConfig(channels=1, patch_size=5, slide_radius=1),
                   np.random.default_rng(0))
    with pytest.raises(DatasetError):
        build_task(bar_images, SamplerConfig(patch_size=19, slide_radius=25), np.random.default_rng(0))


def test_small_images_are_left_out(bar_images):
    store = ImageStore(images=bar_images.images + [np.zeros((4, 4, 3))],
                       identifiers=bar_images.identifiers + ["tiny.png"])
    config = SamplerConfig(n_groups=20, group_size=2, patch_size=5, slide_radius=1)
    task = build_task(store, config, np.random.default_rng(0))
    assert 3 not in set(task.positions[:, 0])


def test_split_is_stratified_and_disjoint(bar_images, tiny_sampler):
    task = build_task(bar_images, tiny_sampler, np.random.default_rng(0))
    x_e, x_m = split_em(task, 0.5, np.random.default_rng(1))
    assert (x_e.per_class, x_m.per_class) == (4, 4)
    assert np.bincount(x_e.labels).tolist() == [4] * 4
    assert np.bincount(x_m.labels).tolist() == [4] * 4
    keys = {tuple(p) + (l,) for p, l in zip(task.positions, task.labels)}
    split_keys = [tuple(p) + (l,) for part in (x_e, x_m) for p, l in zip(part.positions, part.labels)]
    assert len(split_keys) == len(task)
    assert set(split_keys) <= keys


def test_split_depends_on_the_rng(bar_images, tiny_sampler):
    task = build_task(bar_images, tiny_sampler, np.random.default_rng(0))
    draws = {tuple(split_em(task, 0.5, np.random.default_rng(seed))[0].positions.ravel()) for seed in range(5)}
    assert len(draws) > 1


def test_split_rejects_empty_sides(bar_images):
    config = SamplerConfig(n_groups=2, group_size=2, patch_size=5, slide_radius=1)
    task = build_task(bar_images, config, np.random.default_rng(0))
    with pytest.raises(RejectedInputError):
        split_em(task, 0.9, np.random.default_rng(0))
