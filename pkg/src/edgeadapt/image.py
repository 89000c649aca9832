"""Core raster types and pure image operations.

All pixel data lives in float64 numpy arrays with values in [0, 1].
Arrays are made read-only on construction so values can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """H x W x C raster with values in [0, 1]. C is 1 or 3."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image must be HxWxC, got shape {arr.shape}")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"image dims must be >= 1, got {h}x{w}")
        if c not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {c}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"image values outside [0,1]: min={arr.min()}, max={arr.max()}"
            )
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class SegMask:
    """H x W array of class indices: 0 = background, 1 = vessel."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"mask must be HxW, got shape {arr.shape}")
        uniq = np.unique(arr)
        if not np.all(np.isin(uniq, (0, 1))):
            raise ValueError(f"mask values must be 0/1, got {uniq}")
        object.__setattr__(self, "data", _freeze(arr.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ProbMap:
    """H x W x K per-pixel class probabilities, K = 2."""

    data: np.ndarray
    _TOL: float = field(default=1e-5, repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"prob map must be HxWxK, got shape {arr.shape}")
        if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
            raise ValueError("probabilities outside [0,1]")
        sums = arr.sum(axis=2)
        if np.max(np.abs(sums - 1.0)) > self._TOL:
            raise ValueError("per-pixel probabilities do not sum to 1")
        object.__setattr__(self, "data", _freeze(np.clip(arr, 0.0, 1.0)))


def to_grayscale(img: Image) -> Image:
    """Luminance grayscale, 0.299 R + 0.587 G + 0.114 B. Grayscale passes through."""
    if img.channels == 1:
        return img
    lum = img.data @ GRAY_WEIGHTS
    return Image(np.clip(lum, 0.0, 1.0)[:, :, None])


def extract_patch(img: Image, top: int, left: int, size: int, pad: bool = False) -> Image:
    """Cut a size x size window at (top, left).

    Windows that leave the image bounds raise unless ``pad`` is set, in which
    case the image is reflect-padded first (reflection avoids fabricating hard
    synthetic edges).
    """
    if size < 1:
        raise ValueError("patch size must be >= 1")
    h, w = img.height, img.width
    inside = 0 <= top and 0 <= left and top + size <= h and left + size <= w
    if not inside:
        if not pad:
            raise ValueError(
                f"patch window ({top},{left})+{size} exceeds {h}x{w} image"
            )
        before_h = max(0, -top)
        after_h = max(0, top + size - h)
        before_w = max(0, -left)
        after_w = max(0, left + size - w)
        data = np.pad(
            img.data,
            ((before_h, after_h), (before_w, after_w), (0, 0)),
            mode="reflect",
        )
        top += before_h
        left += before_w
    else:
        data = img.data
    return Image(data[top : top + size, left : left + size])


def embed_patch(img: Image, patch: Image, top: int, left: int) -> Image:
    """Paste ``patch`` into a copy of ``img`` at (top, left)."""
    if patch.channels != img.channels:
        raise ValueError("channel mismatch")
    if top < 0 or left < 0 or top + patch.height > img.height or left + patch.width > img.width:
        raise ValueError("patch does not fit inside image")
    data = img.data.copy()
    data[top : top + patch.height, left : left + patch.width] = patch.data
    return Image(data)


def resize(img: Image, h: int, w: int) -> Image:
    """Bilinear resize with corner-aligned sampling.

    Same-size resize is pixel-identical and constants are preserved exactly.
    """
    if h < 1 or w < 1:
        raise ValueError("target dims must be >= 1")
    if h == img.height and w == img.width:
        return img
    rows = _axis_coords(img.height, h)
    cols = _axis_coords(img.width, w)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = np.empty((h, w, img.channels))
    for c in range(img.channels):
        out[:, :, c] = ndimage.map_coordinates(
            img.data[:, :, c], [rr, cc], order=1, mode="nearest"
        )
    return Image(np.clip(out, 0.0, 1.0))


def _axis_coords(src: int, dst: int) -> np.ndarray:
    if dst == 1:
        return np.array([(src - 1) / 2.0])
    return np.arange(dst) * (src - 1) / (dst - 1)


# --- raster I/O ------------------------------------------------------------

_SAVE_FORMATS = {".png": "PNG", ".tif": "TIFF", ".tiff": "TIFF", ".ppm": "PPM", ".gif": "GIF"}


def load_image(path: str | Path) -> Image:
    """Decode PNG/TIFF/PPM/GIF; values normalized from bit depth to [0,1]."""
    with PILImage.open(path) as pil:
        pil.load()
        if pil.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(pil, dtype=np.float64) / 65535.0
        elif pil.mode == "1":
            arr = np.asarray(pil.convert("L"), dtype=np.float64) / 255.0
        elif pil.mode in ("L", "P"):
            arr = np.asarray(pil.convert("L"), dtype=np.float64) / 255.0
        else:
            arr = np.asarray(pil.convert("RGB"), dtype=np.float64) / 255.0
    return Image(np.clip(arr, 0.0, 1.0))


def save_image(img: Image, path: str | Path) -> None:
    """Encode as 8-bit raster; format chosen from the extension."""
    path = Path(path)
    fmt = _SAVE_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise ValueError(f"unsupported raster extension: {path.suffix}")
    arr = np.round(img.data * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    if fmt == "GIF":
        pil = pil.convert("P")
    pil.save(path, format=fmt)


def load_mask(path: str | Path) -> SegMask:
    """Decode a binary label raster; any value above half-scale counts as vessel."""
    img = load_image(path)
    gray = to_grayscale(img)
    return SegMask((gray.data[:, :, 0] > 0.5).astype(np.uint8))


def save_mask(mask: SegMask, path: str | Path) -> None:
    save_image(Image(mask.data.astype(np.float64)[:, :, None]), path)
