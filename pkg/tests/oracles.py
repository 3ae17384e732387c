"""Slow, obviously-correct reference implementations used only by the tests.

Nothing here imports the package's algorithms; each oracle works from the
definition with plain loops.
"""
from __future__ import annotations

import math

import numpy as np


def edt_brute(sources: np.ndarray) -> np.ndarray:
    """Euclidean distance from every pixel to the nearest True pixel."""
    pts = np.argwhere(sources)
    h, w = sources.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = min(math.hypot(y - py, x - px) for py, px in pts)
    return out


def correlate_brute(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size correlation with replicate (clamp-to-edge) borders."""
    h, w = img.shape
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    out = np.zeros((h, w), dtype=np.result_type(img, kernel, np.int64))
    for y in range(h):
        for x in range(w):
            acc = 0
            for i in range(kh):
                for j in range(kw):
                    yy = min(max(y + i - ry, 0), h - 1)
                    xx = min(max(x + j - rx, 0), w - 1)
                    acc += kernel[i, j] * img[yy, xx]
            out[y, x] = acc
    return out


def cross_kernel_brute(d: int) -> np.ndarray:
    n = 2 * d + 1
    k = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if i == d and j == d:
                k[i, j] = 4 * d
            elif i == d or j == d:
                k[i, j] = -1
    return k


def directed_hausdorff_brute(a, b) -> float:
    return max(min(math.hypot(ax - bx, ay - by) for bx, by in b) for ax, ay in a)


def boundary_brute(g: np.ndarray) -> np.ndarray:
    """Region pixels with a 4-neighbour outside the region (frame excluded)."""
    h, w = g.shape
    out = np.zeros_like(g, dtype=bool)
    for y in range(h):
        for x in range(w):
            if not g[y, x]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and not g[yy, xx]:
                    out[y, x] = True
    return out


def bd_loss_brute(s: np.ndarray, g: np.ndarray) -> float:
    bnd = np.argwhere(boundary_brute(g))
    h, w = g.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            d = min(math.hypot(y - by, x - bx) for by, bx in bnd)
            total += (-d if g[y, x] else d) * s[y, x]
    return total / (h * w)


def confusion_brute(pred: np.ndarray, gt: np.ndarray, classes: int, ignore: int = 255):
    cm = np.zeros((classes, classes), dtype=np.int64)
    for p, g in zip(pred.ravel(), gt.ravel()):
        if g != ignore:
            cm[g, p] += 1
    return cm


def axis_distance_to_complement(region: np.ndarray) -> np.ndarray:
    """For region pixels: the smaller of the row and column distances to the
    nearest non-region pixel, scanning with replicate borders (so the frame
    never counts as outside).  inf when the row and column are all region."""
    h, w = region.shape
    out = np.full((h, w), np.inf)
    for y in range(h):
        for x in range(w):
            if not region[y, x]:
                continue
            best = np.inf
            for xx in range(w):
                if not region[y, xx]:
                    best = min(best, abs(xx - x))
            for yy in range(h):
                if not region[yy, x]:
                    best = min(best, abs(yy - y))
            out[y, x] = best
    return out
