import json

import numpy as np
import pytest
from PIL import Image

from Models.models import HsiCube
from Sampling.loaders import (header_path_for, load_hsi, load_rgb_dataset, load_texture_images,
                              normalize_bands, write_hsi)
from src.exceptions import DatasetError


def _save(path, pixels):
    Image.fromarray(pixels).save(path)


def test_images_load_in_filename_order(tmp_path):
    for name, level in (("b.png", 10), ("a.png", 255), ("c.jpg", 0)):
        _save(tmp_path / name, np.full((4, 4, 3), level, dtype=np.uint8))
    store = load_rgb_dataset(str(tmp_path))
    assert store.identifiers == ["a.png", "b.png", "c.jpg"]
    assert store.images[0].shape == (4, 4, 3)
    assert store.images[0].max() == 1.0
    assert store.images[0].dtype == np.float64


def test_undecodable_files_are_skipped(tmp_path):
    _save(tmp_path / "good.png", np.zeros((4, 4, 3), dtype=np.uint8))
    (tmp_path / "broken.png").write_bytes(b"not an image")
    store = load_rgb_dataset(str(tmp_path))
    assert store.identifiers == ["good.png"]
    assert store.skipped == ["broken.png"]


def test_empty_or_missing_directory(tmp_path):
    with pytest.raises(DatasetError):
        load_rgb_dataset(str(tmp_path))
    with pytest.raises(DatasetError, match="not found"):
        load_rgb_dataset(str(tmp_path / "absent"))


def test_textures_are_single_channel(tmp_path):
    _save(tmp_path / "t.png", np.full((6, 8, 3), 51, dtype=np.uint8))
    store = load_texture_images(str(tmp_path))
    assert store.images[0].shape == (6, 8, 1)
    assert store.images[0][0, 0, 0] == pytest.approx(0.2)


def test_normalize_bands():
    cube = np.stack([np.full((2, 2), 7.0), np.array([[1.0, 3.0], [5.0, 9.0]])], axis=-1)
    normalized = normalize_bands(cube)
    assert not normalized[..., 0].any()
    assert normalized[..., 1].min() == 0.0 and normalized[..., 1].max() == 1.0
    assert normalized[0, 1, 1] == pytest.approx(0.25)


def test_hsi_round_trip(tmp_path, two_class_cube):
    cube_path, labels_path = str(tmp_path / "scene.raw"), str(tmp_path / "scene_gt.png")
    write_hsi(two_class_cube, cube_path, labels_path)
    loaded = load_hsi(cube_path, labels_path, normalize=False)
    np.testing.assert_allclose(loaded.cube, two_class_cube.cube, atol=1e-6)
    np.testing.assert_array_equal(loaded.label_map, two_class_cube.label_map)
    assert loaded.class_names == ["soil", "water"]
    assert len(loaded.labeled_pixels()) == 99


def test_sixteen_class_raster(tmp_path):
    label_map = np.arange(17, dtype=np.int64).repeat(2).reshape(2, 17)
    hsi = HsiCube(cube=np.random.default_rng(0).random((2, 17, 3)), label_map=label_map,
                  class_names=[f"c{k}" for k in range(1, 17)])
    write_hsi(hsi, str(tmp_path / "c.raw"), str(tmp_path / "c.png"))
    loaded = load_hsi(str(tmp_path / "c.raw"), str(tmp_path / "c.png"))
    assert loaded.n_classes == 16
    assert loaded.cube.min() >= 0.0 and loaded.cube.max() <= 1.0


def test_interleaves_agree(tmp_path):
    cube = np.arange(2 * 3 * 4, dtype="<f4").reshape(2, 3, 4)
    layouts = {"bsq": cube.transpose(2, 0, 1), "bil": cube.transpose(0, 2, 1), "bip": cube}
    for layout, raw in layouts.items():
        path = tmp_path / f"{layout}.raw"
        raw.tofile(path)
        header = {"width": 3, "height": 2, "bands": 4, "dtype": "f32", "interleave": layout}
        with open(header_path_for(str(path)), "w") as handle:
            json.dump(header, handle)
        loaded = load_hsi(str(path), None, normalize=False)
        np.testing.assert_array_equal(loaded.cube, cube)
        assert not loaded.label_map.any()


def test_bad_cube_files(tmp_path):
    path = tmp_path / "cube.raw"
    np.zeros(5, dtype="<f4").tofile(path)
    with pytest.raises(DatasetError, match="header"):
        load_hsi(str(path), None)
    with open(header_path_for(str(path)), "w") as handle:
        json.dump({"width": 2, "height": 2, "bands": 2, "dtype": "f32", "interleave": "bsq"}, handle)
    with pytest.raises(DatasetError, match="holds 5 values"):
        load_hsi(str(path), None)
