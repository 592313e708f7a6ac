import json
import os
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from Models.models import HsiCube, ImageStore
from src import logger
from src.exceptions import DatasetError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
RAW_DTYPES = {"f32": "<f4", "f64": "<f8", "i16": "<i2", "u16": "<u2"}
HEADER_KEYS = ("width", "height", "bands", "dtype", "interleave")


def _decode_directory(directory: str, mode: str) -> Tuple[List[np.ndarray], List[str], List[str]]:
    if not os.path.isdir(directory):
        raise DatasetError(f"image directory not found: {directory}")
    names = sorted(name for name in os.listdir(directory) if name.lower().endswith(IMAGE_SUFFIXES))
    images, identifiers, skipped = [], [], []
    for name in names:
        path = os.path.join(directory, name)
        try:
            with Image.open(path) as image:
                pixels = np.asarray(image.convert(mode), dtype=np.float64) / 255.0
        except (UnidentifiedImageError, OSError, ValueError) as e:
            logger.warning(f"Skipping undecodable image {path}: {e}")
            skipped.append(name)
            continue
        images.append(pixels)
        identifiers.append(name)
    if not images:
        raise DatasetError(f"no decodable PNG/JPEG images in {directory}")
    if skipped:
        logger.warning(f"{len(skipped)} of {len(names)} files in {directory} could not be decoded")
    return images, identifiers, skipped


def load_rgb_dataset(directory: str) -> ImageStore:
    """Decode every PNG/JPEG in `directory` to float RGB in [0, 1], in filename order."""
    images, identifiers, skipped = _decode_directory(directory, "RGB")
    logger.info(f"Loaded {len(images)} RGB images from {directory}")
    return ImageStore(images=images, identifiers=identifiers, skipped=skipped)


def load_texture_images(directory: str) -> ImageStore:
    """Grayscale textures as H x W x 1 arrays in [0, 1]."""
    images, identifiers, skipped = _decode_directory(directory, "L")
    images = [image[..., None] for image in images]
    logger.info(f"Loaded {len(images)} texture images from {directory}")
    return ImageStore(images=images, identifiers=identifiers, skipped=skipped)


def header_path_for(cube_path: str) -> str:
    return os.path.splitext(cube_path)[0] + ".json"


def _read_header(cube_path: str) -> dict:
    header_path = header_path_for(cube_path)
    if not os.path.isfile(header_path):
        raise DatasetError(f"missing cube header {header_path}")
    with open(header_path) as handle:
        header = json.load(handle)
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise DatasetError(f"{header_path} lacks keys: {', '.join(missing)}")
    if header["dtype"] not in RAW_DTYPES:
        raise DatasetError(f"{header_path}: unsupported dtype {header['dtype']!r}")
    if header["interleave"] not in ("bsq", "bil", "bip"):
        raise DatasetError(f"{header_path}: unsupported interleave {header['interleave']!r}")
    return header


def normalize_bands(cube: np.ndarray) -> np.ndarray:
    """Per-band min-max scaling to [0, 1]; constant bands become 0."""
    low = cube.min(axis=(0, 1))
    span = cube.max(axis=(0, 1)) - low
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (cube - low) / safe, 0.0)


def load_hsi(cube_path: str, labels_path: Optional[str], normalize: bool = True) -> HsiCube:
    """Load a raw cube plus its JSON sidecar header and ground-truth raster.
    Without a label raster every pixel is unlabeled, which is all training needs.
    """
    header = _read_header(cube_path)
    height, width, bands = int(header["height"]), int(header["width"]), int(header["bands"])
    if not os.path.isfile(cube_path):
        raise DatasetError(f"cube file not found: {cube_path}")
    raw = np.fromfile(cube_path, dtype=RAW_DTYPES[header["dtype"]])
    if raw.size != height * width * bands:
        raise DatasetError(
            f"{cube_path} holds {raw.size} values, header says {height}x{width}x{bands}")
    layout = header["interleave"]
    if layout == "bsq":
        cube = raw.reshape(bands, height, width).transpose(1, 2, 0)
    elif layout == "bil":
        cube = raw.reshape(height, bands, width).transpose(0, 2, 1)
    else:
        cube = raw.reshape(height, width, bands)
    cube = np.ascontiguousarray(cube, dtype=np.float64)
    if not np.isfinite(cube).all():
        raise DatasetError(f"{cube_path} contains non-finite values")

    if labels_path is None:
        label_map = np.zeros((height, width), dtype=np.int64)
    elif not os.path.isfile(labels_path):
        raise DatasetError(f"label raster not found: {labels_path}")
    else:
        with Image.open(labels_path) as image:
            if image.mode not in ("L", "P", "I", "I;16", "I;16B", "I;16L"):
                raise DatasetError(f"{labels_path}: label raster must be 8- or 16-bit single channel")
            label_map = np.asarray(image).astype(np.int64)
    if label_map.shape != (height, width):
        raise DatasetError(
            f"label raster is {label_map.shape[0]}x{label_map.shape[1]}, cube is {height}x{width}")

    n_classes = int(label_map.max())
    class_names = header.get("class_names") or [f"class_{k}" for k in range(1, n_classes + 1)]
    if label_map.min() < 0 or n_classes > len(class_names):
        raise DatasetError(f"{labels_path}: labels outside [0, {len(class_names)}]")

    if normalize:
        cube = normalize_bands(cube)
    logger.info(f"Loaded {height}x{width}x{bands} cube from {cube_path} "
                f"with {int((label_map > 0).sum())} labeled pixels")
    return HsiCube(cube=cube, label_map=label_map, class_names=list(class_names))


def write_hsi(hsi: HsiCube, cube_path: str, labels_path: str) -> None:
    """Write a cube as f32 BSQ with its header, and the labels as PNG."""
    for path in (cube_path, labels_path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
    height, width, bands = hsi.cube.shape
    hsi.cube.astype("<f4").transpose(2, 0, 1).tofile(cube_path)
    header = {"width": width, "height": height, "bands": bands, "dtype": "f32",
              "interleave": "bsq", "class_names": list(hsi.class_names)}
    with open(header_path_for(cube_path), "w") as handle:
        json.dump(header, handle, indent=2)
    depth = np.uint8 if hsi.label_map.max() <= 255 else np.uint16
    Image.fromarray(hsi.label_map.astype(depth)).save(labels_path)
