"""Thickness-controlled edge ground truth.

The cross kernel has side ``2*d_e + 1``, ``4*d_e`` in the centre and ``-1``
along the rest of the central row and column.  A foreground pixel responds
positively iff some background pixel lies within ``d_e`` steps along its row
or column, which gives an inner band ``d_e`` pixels thick.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGT, InvalidThickness
from .imagecore import LabelMap, as_binary, convolve_same


@dataclass(frozen=True, eq=False)
class EdgeKernel:
    thickness: int
    weights: np.ndarray

    @property
    def side(self) -> int:
        return self.weights.shape[0]


def kernel_for_thickness(d_e: int) -> EdgeKernel:
    if int(d_e) != d_e or d_e < 1:
        raise InvalidThickness(f"edge thickness must be an integer >= 1, got {d_e}")
    d_e = int(d_e)
    n = 2 * d_e + 1
    w = np.zeros((n, n), dtype=np.int64)
    w[d_e, :] = -1
    w[:, d_e] = -1
    w[d_e, d_e] = 4 * d_e
    w.setflags(write=False)
    return EdgeKernel(d_e, w)


def extract_edge_mask(region, d_e: int) -> np.ndarray:
    """Inner band of ``region`` with thickness ``d_e`` (response > 0)."""
    kernel = kernel_for_thickness(d_e)
    return convolve_same(as_binary(region), kernel) > 0


def extract_edge_label_map(gt: LabelMap, d_e: int) -> LabelMap:
    """Edge GT: class ids on each class's inner band, ignore index elsewhere."""
    kernel_for_thickness(d_e)
    if not gt.valid().any():
        raise EmptyGT("ground truth holds only ignore pixels")
    out = np.full(gt.shape, gt.ignore_index, dtype=np.int64)
    taken = np.zeros(gt.shape, dtype=bool)
    for c in range(gt.classes):
        region = gt.class_mask(c)
        if not region.any():
            continue
        band = extract_edge_mask(region, d_e)
        # inner bands of disjoint regions cannot overlap
        assert not (band & taken).any()
        out[band] = c
        taken |= band
    return LabelMap(out, gt.classes, gt.ignore_index)


def edge_pixel_counts(edge_gt: LabelMap) -> list[int]:
    return [int((edge_gt.data == c).sum()) for c in range(edge_gt.classes)]
