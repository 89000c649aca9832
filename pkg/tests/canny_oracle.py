"""Brute-force per-pixel Canny used as an independent oracle: naive loop
convolutions, explicit per-pixel NMS, BFS hysteresis.

Kernel constants (Gaussian taps, Sobel matrices) are shared parameter
definitions imported from the implementation; every pipeline stage is
re-implemented here from scratch with plain Python loops.
"""

from collections import deque

import numpy as np

from edgeadapt.edges import SOBEL_X, SOBEL_Y, gaussian_kernel

TAN_22_5 = np.tan(np.pi / 8)
TAN_67_5 = np.tan(3 * np.pi / 8)


def _reflect(i: int, n: int) -> int:
    # numpy 'reflect' convention: edge value not repeated (abc -> b a|abc|b a)
    if i < 0:
        return -i
    if i >= n:
        return 2 * n - 2 - i
    return i


def _convolve1d_axis(arr, kernel, axis):
    h, w = arr.shape
    r = len(kernel) // 2
    out = np.zeros_like(arr)
    for row in range(h):
        for col in range(w):
            acc = 0.0
            for i, kv in enumerate(kernel):
                off = i - r
                if axis == 0:
                    acc = acc + kv * arr[_reflect(row + off, h), col]
                else:
                    acc = acc + kv * arr[row, _reflect(col + off, w)]
            out[row, col] = acc
    return out


def _correlate2d(arr, kernel):
    h, w = arr.shape
    kh, kw = kernel.shape
    rh, rw = kh // 2, kw // 2
    out = np.zeros_like(arr)
    for row in range(h):
        for col in range(w):
            acc = 0.0
            for i in range(kh):
                for j in range(kw):
                    acc = acc + kernel[i, j] * arr[
                        _reflect(row + i - rh, h), _reflect(col + j - rw, w)
                    ]
            out[row, col] = acc
    return out


def _direction(gx, gy):
    ax, ay = abs(gx), abs(gy)
    if ay <= ax * TAN_22_5:
        return (0, 1), (0, -1)
    if ay >= ax * TAN_67_5:
        return (1, 0), (-1, 0)
    if (gx > 0) == (gy > 0):
        return (1, 1), (-1, -1)
    return (1, -1), (-1, 1)


def brute_force_canny(gray: np.ndarray, sigma: float, low: float, high: float) -> np.ndarray:
    """Returns the binary edge map as uint8, same semantics as canny_edges:
    keep pixels strictly above the backward neighbor and >= the forward
    neighbor along the gradient, then BFS hysteresis from strong pixels."""
    h, w = gray.shape
    k = gaussian_kernel(sigma)
    smooth = _convolve1d_axis(_convolve1d_axis(gray, k, axis=0), k, axis=1)
    gx = _correlate2d(smooth, SOBEL_X)
    gy = _correlate2d(smooth, SOBEL_Y)
    mag = np.sqrt(gx * gx + gy * gy)

    def neighbor(r, c, d):
        rr, cc = r + d[0], c + d[1]
        if 0 <= rr < h and 0 <= cc < w:
            return mag[rr, cc]
        return 0.0

    keep = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            fwd, bwd = _direction(gx[r, c], gy[r, c])
            m = mag[r, c]
            if m > neighbor(r, c, bwd) and m >= neighbor(r, c, fwd):
                keep[r, c] = True

    strong = keep & (mag >= high)
    weak = keep & (mag >= low)
    edges = np.zeros((h, w), dtype=np.uint8)
    queue = deque((r, c) for r in range(h) for c in range(w) if strong[r, c])
    for r, c in queue:
        edges[r, c] = 1
    while queue:
        r, c = queue.popleft()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and weak[rr, cc] and not edges[rr, cc]:
                    edges[rr, cc] = 1
                    queue.append((rr, cc))
    return edges
