"""Reference boundary losses (BD, HD) and pixel-wise cross-entropy."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateRegion, EmptyBoundary, EmptyTarget, InvalidInput, ShapeError
from .imagecore import LabelMap, as_binary, as_soft, exact_edt, replicate_shift


def boundary_pixels(region) -> np.ndarray:
    """Region pixels with a 4-neighbour outside the region (frame is not outside)."""
    g = as_binary(region)
    touches = np.zeros_like(g)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        touches |= ~replicate_shift(g, dy, dx)
    return g & touches


def signed_level_set(region) -> np.ndarray:
    """Distance to the region boundary, negative inside the region."""
    g = as_binary(region)
    if not g.any() or g.all():
        raise DegenerateRegion("region must be non-empty and not the whole frame")
    dist = exact_edt(boundary_pixels(g))
    return np.where(g, -dist, dist)


def bd_loss(soft, region) -> float:
    """Mean over pixels of phi_G * S (boundary loss, size-normalized)."""
    s = as_soft(soft)
    g = as_binary(region)
    if s.shape != g.shape:
        raise ShapeError(f"prediction {s.shape} vs region {g.shape}")
    return float((signed_level_set(g) * s).mean())


def boundary_points(region) -> np.ndarray:
    ys, xs = np.nonzero(boundary_pixels(region))
    return np.stack([xs, ys], axis=1)


def directed_hausdorff(a, b) -> float:
    """max over points of ``a`` of the distance to the nearest point of ``b``.

    Computed by sampling the exact distance transform of ``b`` at ``a``.
    """
    a = np.asarray(a, dtype=np.int64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise EmptyBoundary("directed Hausdorff needs two non-empty point sets")
    both = np.vstack([a, b])
    lo = both.min(axis=0)
    w, h = both.max(axis=0) - lo + 1
    raster = np.zeros((h, w), dtype=bool)
    raster[b[:, 1] - lo[1], b[:, 0] - lo[0]] = True
    dist = exact_edt(raster)
    return float(dist[a[:, 1] - lo[1], a[:, 0] - lo[0]].max())


def hausdorff(a, b) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def hd_loss(soft, region, threshold: float = 0.5) -> float:
    s = as_soft(soft)
    g = as_binary(region)
    if s.shape != g.shape:
        raise ShapeError(f"prediction {s.shape} vs region {g.shape}")
    pred_pts = boundary_points(s > threshold)
    gt_pts = boundary_points(g)
    if len(pred_pts) == 0:
        raise EmptyBoundary("prediction has no boundary")
    if len(gt_pts) == 0:
        raise EmptyBoundary("ground truth has no boundary")
    return hausdorff(pred_pts, gt_pts)


# ------------------------------------------------------------ cross-entropy

def softmax(logits: np.ndarray, axis: int = -3) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _target_array(target, ignore_index):
    if isinstance(target, LabelMap):
        return target.data, target.ignore_index
    return np.asarray(target, dtype=np.int64), ignore_index


def ce_loss(probs, target, ignore_index: int = 255, eps: float = 1e-12):
    """Mean ``-log p(target)`` over non-ignored pixels.

    ``probs`` has the class axis third from last: ``(C, H, W)`` or
    ``(B, C, H, W)``.  Returns ``(loss, grad)`` where ``grad`` is the gradient
    with respect to the logits that produced ``probs`` through a softmax.
    Probabilities are clipped at ``eps`` inside the log only.
    """
    probs = np.asarray(probs, dtype=np.float64)
    tgt, ignore_index = _target_array(target, ignore_index)
    if probs.ndim < 3 or probs.shape[:-3] + probs.shape[-2:] != tgt.shape:
        raise ShapeError(f"probs {probs.shape} do not match target {tgt.shape}")
    sums = probs.sum(axis=-3)
    if not np.allclose(sums, 1.0, atol=1e-6):
        raise InvalidInput("class probabilities must sum to 1 per pixel")
    classes = probs.shape[-3]
    valid = tgt != ignore_index
    count = int(valid.sum())
    if count == 0:
        raise EmptyTarget("every target pixel is ignored")
    if ((tgt[valid] < 0) | (tgt[valid] >= classes)).any():
        raise InvalidInput("target id outside the class range")
    safe = np.where(valid, tgt, 0)
    onehot = np.moveaxis(np.eye(classes)[safe], -1, -3)
    p_t = np.take_along_axis(probs, np.expand_dims(safe, -3), axis=-3)[..., 0, :, :]
    loss = float(-np.log(np.maximum(p_t[valid], eps)).sum() / count)
    grad = (probs - onehot) * np.expand_dims(valid, -3) / count
    return loss, grad


def ce_from_logits(logits, target, ignore_index: int = 255):
    """Cross-entropy straight from logits (stable log-softmax, no clipping)."""
    logits = np.asarray(logits, dtype=np.float64)
    tgt, ignore_index = _target_array(target, ignore_index)
    if logits.shape[:-3] + logits.shape[-2:] != tgt.shape:
        raise ShapeError(f"logits {logits.shape} do not match target {tgt.shape}")
    valid = tgt != ignore_index
    count = int(valid.sum())
    if count == 0:
        raise EmptyTarget("every target pixel is ignored")
    z = logits - logits.max(axis=-3, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-3, keepdims=True))
    logp = z - log_norm
    safe = np.where(valid, tgt, 0)
    lp_t = np.take_along_axis(logp, np.expand_dims(safe, -3), axis=-3)[..., 0, :, :]
    loss = float(-lp_t[valid].sum() / count)
    classes = logits.shape[-3]
    onehot = np.moveaxis(np.eye(classes)[safe], -1, -3)
    grad = (np.exp(logp) - onehot) * np.expand_dims(valid, -3) / count
    return loss, grad
