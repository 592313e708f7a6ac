import math
import os
from typing import Tuple

import numpy as np
from PIL import Image

from Models.models import ConvFeatureBank, FilterGridImage
from src import logger
from src.exceptions import ArtifactError

SEPARATOR = 255
CONSTANT_LEVEL = 128


def grid_shape(d: int) -> Tuple[int, int]:
    cols = math.isqrt(d - 1) + 1 if d > 1 else 1
    return math.ceil(d / cols), cols


def normalize_tiles(tiles: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Map each tile's min to 0 and max to 255; constant tiles become mid-gray."""
    axes = tuple(range(1, tiles.ndim))
    low = tiles.min(axis=axes, keepdims=True)
    high = tiles.max(axis=axes, keepdims=True)
    span = high - low
    constant = span == 0
    scaled = np.where(constant, CONSTANT_LEVEL, np.rint((tiles - low) / np.where(constant, 1.0, span) * 255.0))
    return scaled.astype(np.uint8), low.reshape(-1), high.reshape(-1), constant.reshape(-1)


def tile_grid(tiles: np.ndarray) -> np.ndarray:
    """Lay d tiles out row-major with 1-pixel separators."""
    d, w = tiles.shape[0], tiles.shape[1]
    rows, cols = grid_shape(d)
    canvas = np.full((rows * (w + 1) - 1, cols * (w + 1) - 1) + tiles.shape[3:], SEPARATOR, dtype=np.uint8)
    for index, tile in enumerate(tiles):
        r, c = divmod(index, cols)
        canvas[r * (w + 1):r * (w + 1) + w, c * (w + 1):c * (w + 1) + w] = tile
    return canvas


def tile_at(grid: np.ndarray, index: int, d: int, w: int) -> np.ndarray:
    r, c = divmod(index, grid_shape(d)[1])
    return grid[r * (w + 1):r * (w + 1) + w, c * (w + 1):c * (w + 1) + w]


def _save(pixels: np.ndarray, path: str) -> None:
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        Image.fromarray(pixels).save(path, format="PNG")
    except (OSError, ValueError) as e:
        raise ArtifactError(f"cannot write filter grid {path}: {e}")


def export_filter_grid(bank: ConvFeatureBank, path: str) -> FilterGridImage:
    """Write the bank's filters as a PNG panel, each filter normalized on its own.

    3-channel banks render in color, 1-channel banks in gray, anything else as one
    gray panel per input channel (<stem>_band###.png).
    """
    rows, cols = grid_shape(bank.d)
    if bank.b in (1, 3):
        tiles = bank.filters if bank.b == 3 else bank.filters[..., 0]
        scaled, low, high, constant = normalize_tiles(tiles)
        pixels, paths = [tile_grid(scaled)], [path]
    else:
        stem, ext = os.path.splitext(path)
        pixels, paths, lows, highs, flags = [], [], [], [], []
        for band in range(bank.b):
            scaled, low, high, constant = normalize_tiles(bank.filters[..., band])
            pixels.append(tile_grid(scaled))
            paths.append(f"{stem}_band{band:03d}{ext or '.png'}")
            lows.append(low)
            highs.append(high)
            flags.append(constant)
        low, high, constant = np.stack(lows), np.stack(highs), np.stack(flags)
    for grid, target in zip(pixels, paths):
        _save(grid, target)
    logger.info(f"Wrote {len(paths)} filter grid(s) of {bank.d} tiles ({rows}x{cols}) to {paths[0]}")
    return FilterGridImage(pixels=pixels, paths=paths, rows=rows, cols=cols, tile_size=bank.w,
                           minima=low, maxima=high, constant=constant)
