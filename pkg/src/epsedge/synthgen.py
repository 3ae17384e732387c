"""Deterministic synthetic scenes and parametric edge bands.

All randomness goes through numpy's Philox4x64 counter-based generator keyed
by ``SeedSequence([seed, index])``, so scene ``index`` of a dataset is the
same on every platform and independent of generation order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy import ndimage

from .errors import CorruptDataset, FormatError, FrameError, InvalidInput, PlacementError
from .imagecore import LabelMap, load_label_pgm, load_soft_pgm, quantize_soft, save_pgm

Radius = Union[float, Callable[[np.ndarray], np.ndarray]]

MAX_ATTEMPTS = 1000


def scene_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


# ------------------------------------------------------------------- bands

@dataclass(frozen=True)
class BandSpec:
    r_inner: Radius
    r_outer: Radius
    center: tuple[float, float]  # (x, y)
    size: int | tuple[int, int] = 64


def _radius(r: Radius, theta: np.ndarray) -> np.ndarray:
    if callable(r):
        return np.asarray(r(theta), dtype=np.float64)
    return np.full_like(theta, float(r))


def gen_band(spec: BandSpec) -> np.ndarray:
    """Pixels whose centre satisfies r_inner(theta) <= dist <= r_outer(theta)."""
    h, w = (spec.size, spec.size) if np.isscalar(spec.size) else spec.size
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    dx, dy = xx - spec.center[0], yy - spec.center[1]
    dist = np.hypot(dx, dy)
    theta = np.mod(np.arctan2(dy, dx), 2 * math.pi)
    r_in, r_out = _radius(spec.r_inner, theta), _radius(spec.r_outer, theta)
    if (r_in < 1).any() or (r_out <= r_in).any():
        raise InvalidInput("need r_outer > r_inner >= 1 at every angle")
    band = (dist >= r_in) & (dist <= r_out)
    if band[0].any() or band[-1].any() or band[:, 0].any() or band[:, -1].any():
        raise FrameError("band touches the image frame")
    return band


def contour_band(r_inner: Radius, r_outer: Radius, size: int = 64, center=None) -> np.ndarray:
    """Band whose inner and outer contour pixels sit at r_inner and r_outer.

    Pixel centres within half a pixel of either radius belong to the band, so
    the radial distance between contour pixel centres, which is what the
    polar Hausdorff distance measures, is r_outer - r_inner.
    """
    if center is None:
        center = (size // 2, size // 2)

    def grow(r, d):
        return (lambda t: _radius(r, t) + d) if callable(r) else float(r) + d

    return gen_band(BandSpec(grow(r_inner, -0.5), grow(r_outer, 0.5), center, size))


def annulus(r_inner: float, r_outer: float, size: int = 64, center=None) -> np.ndarray:
    return contour_band(r_inner, r_outer, size, center)


def square_radius(half_width: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: half_width / np.maximum(np.abs(np.cos(t)), np.abs(np.sin(t)))


def ellipse_radius(a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: a * b / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)


def thickness_sweep_band(t: int, r_inner: float = 12.0, size: int = 64) -> np.ndarray:
    """Annulus of contour thickness ``t`` used by the thickness sweep."""
    return annulus(r_inner, r_inner + t, size)


# ------------------------------------------------------------------- scenes

SHAPES = ("disk", "rectangle", "ellipse")


@dataclass(frozen=True)
class SceneSpec:
    size: int = 64
    classes: int = 3
    shapes: tuple[str, ...] = SHAPES
    scale_range: tuple[float, float] = (5.0, 11.0)
    margin: int = 3
    gap: int = 3
    intensities: tuple[float, ...] | None = None
    noise: float = 0.15
    seed: int = 0

    def class_means(self) -> np.ndarray:
        if self.intensities is not None:
            if len(self.intensities) != self.classes:
                raise InvalidInput("need one intensity per class")
            return np.asarray(self.intensities, dtype=np.float64)
        if self.classes == 1:
            return np.array([0.5])
        return 0.3 + 0.4 * np.arange(self.classes) / (self.classes - 1)


@dataclass(frozen=True)
class Instance:
    cls: int
    shape: str
    center: tuple[float, float]
    params: tuple[float, ...]

    def area(self) -> float:
        if self.shape == "disk":
            return math.pi * self.params[0] ** 2
        if self.shape == "rectangle":
            return 4 * self.params[0] * self.params[1]
        return math.pi * self.params[0] * self.params[1]

    def perimeter(self) -> float:
        if self.shape == "disk":
            return 2 * math.pi * self.params[0]
        if self.shape == "rectangle":
            return 4 * (self.params[0] + self.params[1])
        a, b = self.params[:2]
        return math.pi * (3 * (a + b) - math.sqrt((3 * a + b) * (a + 3 * b)))


@dataclass(frozen=True, eq=False)
class Scene:
    index: int
    seed: int
    image: np.ndarray
    gt: LabelMap
    instances: tuple[Instance, ...] = field(default=())


def rasterize(inst: Instance, size: int) -> np.ndarray:
    yy, xx = np.mgrid[:size, :size].astype(np.float64)
    dx, dy = xx - inst.center[0], yy - inst.center[1]
    if inst.shape == "disk":
        return dx ** 2 + dy ** 2 <= inst.params[0] ** 2
    if inst.shape == "rectangle":
        return (np.abs(dx) <= inst.params[0]) & (np.abs(dy) <= inst.params[1])
    if inst.shape == "ellipse":
        a, b, phi = inst.params
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0
    raise InvalidInput(f"unknown shape {inst.shape!r}")


def _extent(shape: str, params) -> float:
    return max(params[:2]) if shape != "disk" else params[0]


def _sample_instance(rng, spec: SceneSpec, cls: int) -> Instance:
    shape = spec.shapes[int(rng.integers(len(spec.shapes)))]
    lo, hi = spec.scale_range
    if shape == "disk":
        params = (float(rng.uniform(lo, hi)),)
    elif shape == "rectangle":
        params = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
    else:
        params = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)),
                  float(rng.uniform(0, math.pi)))
    ext = _extent(shape, params)
    low, high = spec.margin + ext, spec.size - 1 - spec.margin - ext
    if high < low:
        raise PlacementError(f"{shape} of extent {ext:.1f} does not fit a {spec.size}px frame")
    cx, cy = rng.uniform(low, high, size=2)
    return Instance(cls, shape, (float(cx), float(cy)), params)


def gen_scene(spec: SceneSpec, index: int = 0) -> Scene:
    """One scene: background class 0 plus one instance per foreground class."""
    if spec.classes < 1 or spec.size < 8:
        raise InvalidInput("scene needs >= 1 class and size >= 8")
    rng = scene_rng(spec.seed, index)
    labels = np.zeros((spec.size, spec.size), dtype=np.int64)
    forbidden = np.zeros_like(labels, dtype=bool)
    grow = ndimage.generate_binary_structure(2, 2)
    instances = []
    for cls in range(1, spec.classes):
        for _ in range(MAX_ATTEMPTS):
            inst = _sample_instance(rng, spec, cls)
            mask = rasterize(inst, spec.size)
            if mask.any() and not (mask & forbidden).any():
                break
        else:
            raise PlacementError(f"could not place class {cls} after {MAX_ATTEMPTS} attempts")
        labels[mask] = cls
        forbidden |= ndimage.binary_dilation(mask, grow, iterations=spec.gap)
        instances.append(inst)
    means = spec.class_means()
    image = means[labels] + rng.normal(0.0, spec.noise, labels.shape) if spec.noise > 0 \
        else means[labels].copy()
    image = quantize_soft(np.clip(image, 0.0, 1.0))
    return Scene(index, spec.seed, image, LabelMap(labels, spec.classes), tuple(instances))


def gen_dataset(spec: SceneSpec, count: int) -> list[Scene]:
    return [gen_scene(spec, i) for i in range(count)]


# ------------------------------------------------------------ dataset I/O

MANIFEST = "dataset.csv"


def save_dataset(directory, scenes: Sequence[Scene]):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / MANIFEST, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "seed", "C"])
        for s in scenes:
            save_pgm(s.image, d / f"{s.index:04d}_img.pgm")
            save_pgm(s.gt, d / f"{s.index:04d}_gt.pgm")
            writer.writerow([s.index, s.seed, s.gt.classes])


def load_dataset(directory) -> list[Scene]:
    d = Path(directory)
    try:
        with open(d / MANIFEST, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        raise CorruptDataset(f"missing {MANIFEST} in {d}") from exc
    scenes = []
    for row in rows:
        try:
            index, seed, classes = int(row["index"]), int(row["seed"]), int(row["C"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptDataset(f"bad manifest row {row}") from exc
        img_path, gt_path = d / f"{index:04d}_img.pgm", d / f"{index:04d}_gt.pgm"
        if not img_path.exists() or not gt_path.exists():
            raise CorruptDataset(f"scene {index} is listed but its files are missing")
        try:
            image = load_soft_pgm(img_path)
            gt = load_label_pgm(gt_path, classes=classes)
        except FormatError as exc:
            raise CorruptDataset(f"scene {index}: {exc}") from exc
        if image.shape != gt.shape:
            raise CorruptDataset(f"scene {index}: image and gt sizes differ")
        scenes.append(Scene(index, seed, image, gt))
    scenes.sort(key=lambda s: s.index)
    return scenes
