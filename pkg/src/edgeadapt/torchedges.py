"""Tensor implementation of the soft edge response, used inside the
edge-preservation loss so gradients flow back into the generators."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .edges import SOBEL_X, SOBEL_Y, CannyParams, gaussian_kernel

RGB_WEIGHTS = (0.299, 0.587, 0.114)


def grayscale_tensor(x: torch.Tensor) -> torch.Tensor:
    """(B,C,H,W) in [0,1] -> (B,1,H,W) luminance."""
    if x.shape[1] == 1:
        return x
    w = torch.tensor(RGB_WEIGHTS, dtype=x.dtype, device=x.device).view(1, 3, 1, 1)
    return (x * w).sum(dim=1, keepdim=True)


def _reflect_conv(x: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    kh, kw = kernel.shape[-2:]
    x = F.pad(x, (kw // 2, kw // 2, kh // 2, kh // 2), mode="reflect")
    return F.conv2d(x, kernel)


def soft_edge_response(x: torch.Tensor, p: CannyParams) -> torch.Tensor:
    """(B,1,H,W) in [0,1] -> (B,1,H,W) soft edge map in (0,1).

    Matches edges.soft_edges: Gaussian smoothing, normalized Sobel magnitude,
    logistic threshold at (low+high)/2.
    """
    if x.shape[1] != 1:
        raise ValueError("soft_edge_response expects single-channel input")
    k1 = torch.tensor(gaussian_kernel(p.sigma), dtype=x.dtype, device=x.device)
    smooth = _reflect_conv(x, k1.view(1, 1, -1, 1))
    smooth = _reflect_conv(smooth, k1.view(1, 1, 1, -1))
    kx = torch.tensor(SOBEL_X, dtype=x.dtype, device=x.device).view(1, 1, 3, 3)
    ky = torch.tensor(SOBEL_Y, dtype=x.dtype, device=x.device).view(1, 1, 3, 3)
    gx = _reflect_conv(smooth, kx)
    gy = _reflect_conv(smooth, ky)
    # small epsilon keeps the sqrt gradient defined at zero magnitude
    mag = torch.sqrt(gx * gx + gy * gy + 1e-12)
    return torch.sigmoid(p.soft_temperature * (mag - p.center))
