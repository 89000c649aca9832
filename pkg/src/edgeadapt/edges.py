"""Edge extraction: reference Canny for evaluation, differentiable soft
edges for training losses, and a tolerance-aware edge F-measure.

The Canny pipeline is written so every float is produced by a per-pixel
tap-order accumulation: a naive loop implementation using the same kernels
and reflect indexing reproduces it bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import Image

TAN_22_5 = math.tan(math.pi / 8)
TAN_67_5 = math.tan(3 * math.pi / 8)

# Sobel kernels normalized so a full-contrast step yields magnitude <= 1.
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8.0
SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64) / 8.0


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.0
    low: float = 0.1
    high: float = 0.2
    soft_temperature: float = 50.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not (0 <= self.low < self.high):
            raise ValueError("need 0 <= low < high")
        if self.soft_temperature <= 0:
            raise ValueError("soft_temperature must be positive")

    @property
    def center(self) -> float:
        return (self.low + self.high) / 2.0


@dataclass(frozen=True)
class EdgeMap:
    """H x W binary edge response."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError("edge map must be HxW")
        if not np.all(np.isin(np.unique(arr), (0, 1))):
            raise ValueError("edge map values must be 0/1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)


@dataclass(frozen=True)
class SoftEdgeMap:
    """H x W continuous edge response in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("soft edge map must be HxW")
        if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
            raise ValueError("soft edge values must be finite and in [0,1]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Truncated normalized 1-D Gaussian, radius ceil(3*sigma)."""
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _reflect_pad(arr: np.ndarray, rh: int, rw: int) -> np.ndarray:
    return np.pad(arr, ((rh, rh), (rw, rw)), mode="reflect")


def _correlate1d(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    # Accumulate tap by tap so summation order matches a naive loop.
    r = len(kernel) // 2
    padded = _reflect_pad(arr, r if axis == 0 else 0, r if axis == 1 else 0)
    h, w = arr.shape
    out = np.zeros_like(arr)
    for i, kv in enumerate(kernel):
        if axis == 0:
            out = out + kv * padded[i : i + h, :]
        else:
            out = out + kv * padded[:, i : i + w]
    return out


def _correlate2d(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape
    padded = _reflect_pad(arr, kh // 2, kw // 2)
    h, w = arr.shape
    out = np.zeros_like(arr)
    for i in range(kh):
        for j in range(kw):
            out = out + kernel[i, j] * padded[i : i + h, j : j + w]
    return out


def smooth_and_gradients(gray: np.ndarray, sigma: float):
    """Gaussian smoothing followed by normalized Sobel gradients."""
    k = gaussian_kernel(sigma)
    smooth = _correlate1d(_correlate1d(gray, k, axis=0), k, axis=1)
    gx = _correlate2d(smooth, SOBEL_X)
    gy = _correlate2d(smooth, SOBEL_Y)
    mag = np.sqrt(gx * gx + gy * gy)
    return smooth, gx, gy, mag


def quantize_direction(gx: float, gy: float) -> int:
    """Gradient direction bucket: 0=E/W, 1=N/S, 2=diag ++, 3=diag +-.

    Pure comparisons, no trigonometry, so any reimplementation agrees
    bit-exactly.
    """
    ax, ay = abs(gx), abs(gy)
    if ay <= ax * TAN_22_5:
        return 0
    if ay >= ax * TAN_67_5:
        return 1
    return 2 if (gx > 0) == (gy > 0) else 3


# forward/backward neighbor offsets (drow, dcol) per direction bucket
_NMS_OFFSETS = {
    0: ((0, 1), (0, -1)),
    1: ((1, 0), (-1, 0)),
    2: ((1, 1), (-1, -1)),
    3: ((1, -1), (-1, 1)),
}


def _nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels strictly above the backward neighbor and at least equal to
    the forward neighbor along the gradient; ties produce single-pixel lines."""
    h, w = mag.shape
    ax, ay = np.abs(gx), np.abs(gy)
    bucket = np.full((h, w), 2, dtype=np.int8)
    bucket[ay <= ax * TAN_22_5] = 0
    bucket[ay >= ax * TAN_67_5] = 1
    diag_neg = (bucket == 2) & ((gx > 0) != (gy > 0))
    bucket[diag_neg] = 3

    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = mag
    keep = np.zeros((h, w), dtype=bool)
    for b, (fwd, bwd) in _NMS_OFFSETS.items():
        f = padded[1 + fwd[0] : 1 + fwd[0] + h, 1 + fwd[1] : 1 + fwd[1] + w]
        bk = padded[1 + bwd[0] : 1 + bwd[0] + h, 1 + bwd[1] : 1 + bwd[1] + w]
        keep |= (bucket == b) & (mag > bk) & (mag >= f)
    return keep


def canny_edges(img: Image, p: CannyParams) -> EdgeMap:
    """Classical Canny: Gaussian smoothing, Sobel gradients, non-maximum
    suppression, double-threshold hysteresis (8-connected)."""
    if img.channels != 1:
        raise ValueError("canny_edges expects a grayscale image")
    gray = img.data[:, :, 0]
    _, gx, gy, mag = smooth_and_gradients(gray, p.sigma)
    keep = _nms(mag, gx, gy)
    weak = keep & (mag >= p.low)
    strong = keep & (mag >= p.high)
    if not strong.any():
        return EdgeMap(np.zeros_like(weak, dtype=np.uint8))
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    good = np.zeros(n + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return EdgeMap(good[labels].astype(np.uint8))


def soft_edges(img: Image, p: CannyParams) -> SoftEdgeMap:
    """Differentiable edge response: smoothed Sobel magnitude through a
    logistic threshold at (low+high)/2. No NMS or hysteresis, so the map is
    smooth in the input pixels."""
    if img.channels != 1:
        raise ValueError("soft_edges expects a grayscale image")
    _, _, _, mag = smooth_and_gradients(img.data[:, :, 0], p.sigma)
    resp = 1.0 / (1.0 + np.exp(-p.soft_temperature * (mag - p.center)))
    return SoftEdgeMap(resp)


def soft_edges_sum_grad(img: Image, p: CannyParams) -> np.ndarray:
    """Analytic gradient of sum(soft_edges) w.r.t. each input pixel,
    via reverse-mode differentiation of the tensor implementation."""
    import torch

    from .torchedges import soft_edge_response

    x = torch.tensor(img.data[:, :, 0], dtype=torch.float64, requires_grad=True)
    resp = soft_edge_response(x[None, None], p)
    resp.sum().backward()
    return x.grad.numpy()


def edge_f_measure(pred: EdgeMap, ref: EdgeMap, tol_px: int = 0) -> float:
    """F1 over edge pixels, counting a pixel matched when the other map has an
    edge within ``tol_px`` Chebyshev distance. Empty-vs-empty scores 1.0."""
    if pred.data.shape != ref.data.shape:
        raise ValueError("edge map dims differ")
    if tol_px < 0:
        raise ValueError("tol_px must be >= 0")
    p = pred.data.astype(bool)
    r = ref.data.astype(bool)
    np_pred, np_ref = p.sum(), r.sum()
    if np_pred == 0 and np_ref == 0:
        return 1.0
    if np_pred == 0 or np_ref == 0:
        return 0.0
    if tol_px > 0:
        size = 2 * tol_px + 1
        r_dil = ndimage.maximum_filter(r.astype(np.uint8), size=size).astype(bool)
        p_dil = ndimage.maximum_filter(p.astype(np.uint8), size=size).astype(bool)
    else:
        r_dil, p_dil = r, p
    precision = (p & r_dil).sum() / np_pred
    recall = (r & p_dil).sum() / np_ref
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
