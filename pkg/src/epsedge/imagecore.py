"""Raster primitives shared by the rest of the package.

Binary masks are ``bool`` arrays and soft masks are ``float64`` arrays with
values in [0, 1]; both are indexed ``[row, col]``.  Label maps carry their
class count and ignore index, so they get a small dataclass.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptySourceSet, FormatError, InvalidInput, ShapeError

IGNORE_INDEX = 255
SOFT_SCALE = 65535


@dataclass(frozen=True, eq=False)
class LabelMap:
    data: np.ndarray
    classes: int
    ignore_index: int = IGNORE_INDEX

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ShapeError(f"label map must be 2-D, got shape {data.shape}")
        if self.classes < 1:
            raise InvalidInput("label map needs at least one class")
        if 0 <= self.ignore_index < self.classes:
            raise InvalidInput("ignore_index collides with a class id")
        data = data.astype(np.int64)
        bad = (data != self.ignore_index) & ((data < 0) | (data >= self.classes))
        if bad.any():
            raise InvalidInput(f"{int(bad.sum())} pixels hold ids outside [0, {self.classes})")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def class_mask(self, c: int) -> np.ndarray:
        return self.data == c

    def valid(self) -> np.ndarray:
        return self.data != self.ignore_index

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (self.classes == other.classes and self.ignore_index == other.ignore_index
                and np.array_equal(self.data, other.data))


def as_binary(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool)


def as_soft(values) -> np.ndarray:
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 2:
        raise ShapeError(f"soft mask must be 2-D, got shape {s.shape}")
    if s.size and (np.isnan(s).any() or s.min() < 0.0 or s.max() > 1.0):
        raise InvalidInput("soft mask values must lie in [0, 1]")
    return s


# ---------------------------------------------------------------- convolution

def replicate_shift(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """``out[..., y, x] = img[..., clamp(y + dy), clamp(x + dx)]``."""
    h, w = img.shape[-2:]
    rows = np.clip(np.arange(h) + dy, 0, h - 1)
    cols = np.clip(np.arange(w) + dx, 0, w - 1)
    return img[..., rows, :][..., cols]


def correlate_replicate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size correlation with clamp-to-edge padding.

    Works for integer or float input; only nonzero taps are visited, so the
    sparse cross kernels cost O(taps) passes.
    """
    kernel = np.asarray(kernel)
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise InvalidInput("kernel sides must be odd")
    cy, cx = kh // 2, kw // 2
    out = np.zeros(img.shape, dtype=np.result_type(img.dtype, kernel.dtype))
    for ky, kx in zip(*np.nonzero(kernel)):
        out += kernel[ky, kx] * replicate_shift(img, ky - cy, kx - cx)
    return out


def _shift_adjoint_axis(g: np.ndarray, d: int, axis: int) -> np.ndarray:
    # transpose of out[i] = in[clamp(i + d)] along one axis
    n = g.shape[axis]
    g = np.moveaxis(g, axis, 0)
    res = np.zeros_like(g)
    if d == 0:
        res += g
    elif d > 0:
        k = min(d, n)
        res[k:] += g[:n - k]
        res[n - 1] += g[n - k:].sum(axis=0)
    else:
        k = min(-d, n)
        res[:n - k] += g[k:]
        res[0] += g[:k].sum(axis=0)
    return np.moveaxis(res, 0, axis)


def replicate_shift_adjoint(g: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Transpose of :func:`replicate_shift` on the last two axes."""
    return _shift_adjoint_axis(_shift_adjoint_axis(g, dy, g.ndim - 2), dx, g.ndim - 1)


def correlate_replicate_adjoint(grad_out: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Transpose of :func:`correlate_replicate` with respect to its input."""
    kernel = np.asarray(kernel)
    cy, cx = kernel.shape[0] // 2, kernel.shape[1] // 2
    grad_in = np.zeros(grad_out.shape, dtype=np.float64)
    for ky, kx in zip(*np.nonzero(kernel)):
        grad_in += kernel[ky, kx] * replicate_shift_adjoint(grad_out, ky - cy, kx - cx)
    return grad_in


def convolve_same(mask, kernel) -> np.ndarray:
    """Integer response of a binary mask to an edge kernel (replicate padding)."""
    m = as_binary(mask)
    if m.size == 0:
        raise InvalidInput("empty mask")
    weights = getattr(kernel, "weights", kernel)
    return correlate_replicate(m.astype(np.int64), np.asarray(weights, dtype=np.int64))


# ----------------------------------------------------------- distance transform

def _lower_envelope(f: np.ndarray) -> np.ndarray:
    # 1-D squared distance transform, Felzenszwalb & Huttenlocher.
    n = len(f)
    finite = np.isfinite(f)
    if not finite.any():
        return f.copy()
    out = np.empty(n)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1)
    k = -1
    for q in range(n):
        if not finite[q]:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -math.inf
            z[1] = math.inf
            continue
        while True:
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2 * q - 2 * p)
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -math.inf
        else:
            k += 1
            v[k] = q
            z[k] = s
        z[k + 1] = math.inf
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        p = v[j]
        out[q] = (q - p) ** 2 + f[p]
    return out


def squared_edt(sources) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest set pixel."""
    src = as_binary(sources)
    if not src.any():
        raise EmptySourceSet("distance transform needs at least one source pixel")
    h, w = src.shape
    # column pass: 1-D distance along each column, vectorized over columns
    col = np.full((h, w), np.inf)
    run = np.full(w, np.inf)
    for y in range(h):
        run = np.where(src[y], 0.0, run + 1.0)
        col[y] = run
    run = np.full(w, np.inf)
    for y in range(h - 1, -1, -1):
        run = np.where(src[y], 0.0, run + 1.0)
        col[y] = np.minimum(col[y], run)
    g = col ** 2
    out = np.empty((h, w))
    for y in range(h):
        out[y] = _lower_envelope(g[y])
    return out


def exact_edt(sources) -> np.ndarray:
    """Euclidean distance from every pixel to the nearest source pixel."""
    return np.sqrt(squared_edt(sources))


# ------------------------------------------------------- connected components

def connected_components(mask, connectivity: int = 4) -> tuple[np.ndarray, int]:
    """Label set pixels; ids run 0..count-1 and unset pixels get -1."""
    if connectivity not in (4, 8):
        raise InvalidInput("connectivity must be 4 or 8")
    m = as_binary(mask)
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, count = ndimage.label(m, structure=structure)
    return labels.astype(np.int64) - 1, int(count)


# ------------------------------------------------------------------ PGM I/O

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*")


def _read_header(buf: bytes):
    if len(buf) < 2 or buf[:2] not in (b"P2", b"P5"):
        raise FormatError("not a P2/P5 PGM file")
    magic = buf[:2].decode()
    pos = 2
    comments = []
    fields = []
    while len(fields) < 3:
        # skip whitespace and comments, collecting the comments
        while pos < len(buf):
            ch = buf[pos:pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                end = buf.find(b"\n", pos)
                end = len(buf) if end < 0 else end
                comments.append(buf[pos + 1:end].decode("ascii", "replace").strip())
                pos = end
            else:
                break
        start = pos
        while pos < len(buf) and buf[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise FormatError("malformed PGM header")
        fields.append(int(buf[start:pos]))
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        if magic == "P5" or pos < len(buf):
            raise FormatError("malformed PGM header")
    width, height, maxval = fields
    if maxval < 1 or maxval > 65535:
        raise FormatError(f"maxval {maxval} outside [1, 65535]")
    if width < 1 or height < 1:
        raise FormatError("PGM dimensions must be positive")
    return magic, width, height, maxval, comments, pos + 1


def read_pgm_raw(path) -> tuple[np.ndarray, int, list[str]]:
    """Return the raw integer raster, its maxval, and the header comments."""
    buf = Path(path).read_bytes()
    magic, width, height, maxval, comments, pos = _read_header(buf)
    count = width * height
    if magic == "P5":
        itemsize = 1 if maxval < 256 else 2
        payload = buf[pos:pos + count * itemsize]
        if len(payload) < count * itemsize:
            raise FormatError("truncated PGM payload")
        dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
        data = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    else:
        tokens = buf[pos - 1:].split()
        if len(tokens) < count:
            raise FormatError("truncated PGM payload")
        try:
            data = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError as exc:
            raise FormatError("non-integer sample in P2 payload") from exc
    if data.size and (data.min() < 0 or data.max() > maxval):
        raise FormatError("sample exceeds maxval")
    return data.reshape(height, width), maxval, comments


def write_pgm_raw(path, data: np.ndarray, maxval: int, comments=(), plain: bool = False):
    data = np.asarray(data, dtype=np.int64)
    if data.ndim != 2 or data.size == 0:
        raise ShapeError("PGM raster must be non-empty and 2-D")
    if data.min() < 0 or data.max() > maxval:
        raise InvalidInput("sample outside [0, maxval]")
    h, w = data.shape
    header = [("P2" if plain else "P5")]
    header += [f"# {c}" for c in comments]
    header += [f"{w} {h}", str(maxval)]
    head = ("\n".join(header) + "\n").encode("ascii")
    if plain:
        rows = [" ".join(str(v) for v in row) for row in data]
        body = ("\n".join(rows) + "\n").encode("ascii")
    elif maxval < 256:
        body = data.astype(np.uint8).tobytes()
    else:
        body = data.astype(">u2").tobytes()
    Path(path).write_bytes(head + body)


def _parse_tag(comments):
    for c in comments:
        parts = c.split()
        if parts and parts[0] == "epsedge":
            kind = parts[1] if len(parts) > 1 else ""
            opts = dict(p.split("=", 1) for p in parts[2:] if "=" in p)
            return kind, opts
    return None, {}


def quantize_soft(values: np.ndarray) -> np.ndarray:
    """Snap a soft mask onto the 16-bit grid used on disk."""
    return np.rint(as_soft(values) * SOFT_SCALE) / SOFT_SCALE


def save_pgm(raster, path, plain: bool = False):
    """Write a LabelMap (ids verbatim) or a soft mask (16-bit, value*65535)."""
    if isinstance(raster, LabelMap):
        maxval = 255 if raster.data.max() <= 255 else 65535
        tag = f"epsedge labelmap classes={raster.classes} ignore={raster.ignore_index}"
        write_pgm_raw(path, raster.data, maxval, [tag], plain)
    else:
        soft = as_soft(raster)
        q = np.rint(soft * SOFT_SCALE).astype(np.int64)
        write_pgm_raw(path, q, SOFT_SCALE, [f"epsedge softmask scale={SOFT_SCALE}"], plain)


def load_label_pgm(path, classes: int | None = None, ignore_index: int | None = None) -> LabelMap:
    data, _, comments = read_pgm_raw(path)
    kind, opts = _parse_tag(comments)
    if kind == "labelmap":
        classes = classes or int(opts.get("classes", 0)) or None
        if ignore_index is None and "ignore" in opts:
            ignore_index = int(opts["ignore"])
    if ignore_index is None:
        ignore_index = IGNORE_INDEX
    if classes is None:
        ids = data[data != ignore_index]
        classes = int(ids.max()) + 1 if ids.size else 1
    try:
        return LabelMap(data, classes, ignore_index)
    except InvalidInput as exc:
        raise FormatError(str(exc)) from exc


def load_soft_pgm(path) -> np.ndarray:
    """Read any PGM as a soft mask, scaling samples by 1/maxval."""
    data, maxval, _ = read_pgm_raw(path)
    return data.astype(np.float64) / maxval


def load_pgm(path):
    """Load a PGM as LabelMap or soft mask, following the header tag.

    Untagged files are soft masks when maxval is 65535, label maps otherwise.
    """
    data, maxval, comments = read_pgm_raw(path)
    kind, _ = _parse_tag(comments)
    if kind == "softmask" or (kind is None and maxval == SOFT_SCALE):
        return data.astype(np.float64) / maxval
    return load_label_pgm(path)
