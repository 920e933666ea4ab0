"""Run-length codec for binary masks (row-major, zeros first)."""

from __future__ import annotations

import numpy as np

from .types import SegmentationMask


def rle_encode(bitmap: np.ndarray) -> SegmentationMask:
    """Encode a 2-D 0/1 array; canonical (no zero-length interior runs)."""
    bitmap = np.asarray(bitmap)
    if bitmap.ndim != 2:
        raise ValueError(f"bitmap must be 2-D, got ndim={bitmap.ndim}")
    height, width = bitmap.shape
    flat = (bitmap.ravel() != 0).astype(np.int8)
    if flat.size == 0:
        raise ValueError("bitmap must be non-empty")
    change = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return SegmentationMask(width=width, height=height, rle=tuple(int(r) for r in runs))


def rle_decode(mask: SegmentationMask) -> np.ndarray:
    """Decode back to a 2-D uint8 array; the run sum is re-checked."""
    total = sum(mask.rle)
    if total != mask.width * mask.height:
        raise ValueError(
            f"rle runs sum to {total}, expected {mask.width * mask.height}"
        )
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in mask.rle:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(mask.height, mask.width)


def full_mask(width: int, height: int) -> SegmentationMask:
    return SegmentationMask(width=width, height=height, rle=(0, width * height))


def empty_mask(width: int, height: int) -> SegmentationMask:
    return SegmentationMask(width=width, height=height, rle=(width * height,))


def rect_mask(width: int, height: int, x1: int, y1: int, x2: int, y2: int) -> SegmentationMask:
    """Axis-aligned rectangle [x1, x2) x [y1, y2) in pixel coordinates."""
    bitmap = np.zeros((height, width), dtype=np.uint8)
    bitmap[y1:y2, x1:x2] = 1
    return rle_encode(bitmap)
