"""Frames, patch resampling and the initial seed-derived training set.

All resampling goes through one bilinear kernel so that a patch cut out of
a whole-frame resize (see ``resample_level``) matches ``extract_patch`` on
the corresponding window.  Intensities are rounded half-up to uint8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import gaussian_filter

FERN_PATCH = 32
HOG_PATCH = 64

POSITIVE = 1
NEGATIVE = -1


class BoundingBox(NamedTuple):
    """Axis-aligned box, top-left origin.  Coordinates may be fractional."""

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    def clip(self, width: int, height: int) -> "BoundingBox | None":
        x0, y0 = max(self.x, 0.0), max(self.y, 0.0)
        x1, y1 = min(self.x + self.w, width), min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            return None
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass
class Frame:
    pixels: np.ndarray  # (height, width) uint8
    index: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError(f"frame must be a non-empty 2-D array, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            self.pixels = round_intensity(self.pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class AffineParams:
    scale: float = 1.0
    rotation: float = 0.0  # radians
    shear: float = 0.0
    dx: float = 0.0  # pixels
    dy: float = 0.0

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls()

    @classmethod
    def random(cls, rng: np.random.Generator, box: BoundingBox) -> "AffineParams":
        return cls(
            scale=rng.uniform(0.9, 1.1),
            rotation=rng.uniform(-0.1, 0.1),
            shear=rng.uniform(-0.05, 0.05),
            dx=rng.uniform(-0.05, 0.05) * box.w,
            dy=rng.uniform(-0.05, 0.05) * box.h,
        )

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        shear = np.array([[1.0, self.shear], [0.0, 1.0]])
        return self.scale * (rot @ shear)


@dataclass
class Sample:
    """A labelled training patch.

    ``patch`` is the fern-resolution view; ``hog_patch`` the same region at
    HOG resolution (None when the sample only feeds the ferns).  ``box`` is
    the frame region the sample was cut from, before warping.
    """

    patch: np.ndarray
    label: int
    provenance: str = "seed-warp"
    hog_patch: np.ndarray | None = field(default=None, repr=False)
    box: BoundingBox | None = None


def round_intensity(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return round_intensity(luma)


def load_frame(path, index: int = 0) -> Frame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such frame: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("L", "1"):
                arr = np.asarray(img.convert("L"))
            elif img.mode.startswith("I") or img.mode == "F":
                raise ValueError(f"{path}: not an 8-bit image (mode {img.mode})")
            else:
                arr = rgb_to_gray(np.asarray(img.convert("RGB")))
    except (UnidentifiedImageError, OSError) as exc:
        raise ValueError(f"cannot decode {path}: {exc}") from exc
    if arr.size == 0:
        raise ValueError(f"{path}: zero-area image")
    return Frame(arr.astype(np.uint8), index)


def save_frame(frame: Frame, path) -> None:
    Image.fromarray(frame.pixels, mode="L").save(path)


def _axis_coords(origin: float, extent: float, n: int) -> np.ndarray:
    # pixel-centre mapping of n output samples onto [origin, origin + extent)
    return origin + (np.arange(n) + 0.5) * (extent / n) - 0.5


def _interp_index(coords: np.ndarray, limit: int):
    c = np.clip(coords, 0.0, limit - 1)
    i0 = np.floor(c).astype(np.intp)
    i1 = np.minimum(i0 + 1, limit - 1)
    return i0, i1, (c - i0).astype(np.float32)


def _round_half_up(values: np.ndarray) -> np.ndarray:
    # inputs are convex combinations of uint8 values, so no clipping needed
    values += np.float32(0.5)
    np.floor(values, out=values)
    return values.astype(np.uint8)


def bilinear(pixels: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample ``pixels`` at broadcastable coordinate arrays, clamping at borders.

    Interpolates along y first, then x, in float32; returns float32.
    """
    img = pixels.astype(np.float32, copy=False)
    h, w = img.shape
    y0, y1, fy = _interp_index(np.asarray(ys, dtype=np.float64), h)
    x0, x1, fx = _interp_index(np.asarray(xs, dtype=np.float64), w)
    a, c = img[y0, x0], img[y1, x0]
    b, d = img[y0, x1], img[y1, x1]
    v0 = a + fy * (c - a)
    v1 = b + fy * (d - b)
    return v0 + fx * (v1 - v0)


def resample_level(pixels: np.ndarray, sy: float, sx: float, ny: int, nx: int) -> np.ndarray:
    """Resize the whole frame so one output pixel spans ``sy`` x ``sx`` source pixels.

    Same arithmetic as ``bilinear`` on a separable grid, so a crop of the
    result equals ``extract_patch`` of the matching window up to rounding of
    the coordinates themselves.
    """
    h, w = pixels.shape
    y0, y1, fy = _interp_index((np.arange(ny) + 0.5) * sy - 0.5, h)
    x0, x1, fx = _interp_index((np.arange(nx) + 0.5) * sx - 0.5, w)
    top = pixels[y0].astype(np.float32)
    rows = pixels[y1].astype(np.float32)
    rows -= top
    rows *= fy[:, None]
    rows += top
    left = rows[:, x0]
    out = rows[:, x1]
    out -= left
    out *= fx
    out += left
    return _round_half_up(out)


def extract_patch(frame: Frame, box: BoundingBox, target: int = FERN_PATCH) -> np.ndarray:
    clipped = box.clip(frame.width, frame.height)
    if clipped is None:
        raise ValueError(f"box {box} lies outside the {frame.width}x{frame.height} frame")
    ys = _axis_coords(clipped.y, clipped.h, target)
    xs = _axis_coords(clipped.x, clipped.w, target)
    return _round_half_up(bilinear(frame.pixels, ys[:, None], xs[None, :]))


def extract_patches(frame: Frame, boxes, target: int = FERN_PATCH) -> np.ndarray:
    """Batch form of ``extract_patch`` for boxes that lie inside the frame."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if len(boxes) == 0:
        return np.zeros((0, target, target), dtype=np.uint8)
    step = np.arange(target) + 0.5
    ys = boxes[:, 1:2] + step * (boxes[:, 3:4] / target) - 0.5
    xs = boxes[:, 0:1] + step * (boxes[:, 2:3] / target) - 0.5
    return _round_half_up(bilinear(frame.pixels, ys[:, :, None], xs[:, None, :]))


def warp_affine(frame: Frame, box: BoundingBox, params: AffineParams, target: int = FERN_PATCH) -> np.ndarray:
    """Sample the box content under an affine warp about the box centre."""
    a = params.matrix()
    if abs(np.linalg.det(a)) < 1e-6:
        raise ValueError("degenerate affine transform")
    clipped = box.clip(frame.width, frame.height)
    if clipped is None:
        raise ValueError(f"box {box} lies outside the frame")
    ys = _axis_coords(clipped.y, clipped.h, target)[:, None]
    xs = _axis_coords(clipped.x, clipped.w, target)[None, :]
    cy = clipped.y + clipped.h / 2 - 0.5
    cx = clipped.x + clipped.w / 2 - 0.5
    # offsets of (A - I)(p - c) + t; identity params give exact zeros
    d = a - np.eye(2)
    u, v = xs - cx, ys - cy
    src_x = xs + (d[0, 0] * u + d[0, 1] * v + params.dx)
    src_y = ys + (d[1, 0] * u + d[1, 1] * v + params.dy)
    return _round_half_up(bilinear(frame.pixels, src_y, src_x))


def smooth_frame(frame: Frame, sigma: float) -> Frame:
    """Gaussian-blurred copy of ``frame`` (border replicated); ``sigma <= 0`` is a no-op.

    Two-pixel comparisons are very sensitive to sensor noise in flat image
    regions, so fern codes are taken on a lightly smoothed view of the frame.
    """
    if sigma <= 0:
        return frame
    blurred = gaussian_filter(frame.pixels.astype(np.float32), sigma, mode="nearest")
    return Frame(_round_half_up(blurred), frame.index)


def box_iou(a, b) -> float:
    """Intersection over union of two ``(x, y, w, h)`` boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def _random_negative_box(frame: Frame, seeds, rng: np.random.Generator, max_tries: int = 500):
    for _ in range(max_tries):
        ref = seeds[rng.integers(len(seeds))]
        factor = 1.15 ** rng.integers(-5, 6)
        w = min(max(8.0, round(ref.w * factor)), frame.width)
        h = min(max(8.0, round(ref.h * factor)), frame.height)
        x = float(rng.integers(0, int(frame.width - w) + 1))
        y = float(rng.integers(0, int(frame.height - h) + 1))
        box = BoundingBox(x, y, w, h)
        if all(box_iou(box, s) < 0.2 for s in seeds):
            return box
    return None


def generate_initial_samples(
    frame: Frame,
    seeds,
    warps_per_seed: int = 50,
    rng_seed: int = 0,
    hog_size: int | None = HOG_PATCH,
    fern_frame: Frame | None = None,
) -> list[Sample]:
    """Build the seed training set: seed patches plus random warps as positives,
    and twice as many warped background patches as negatives.

    Fern patches are cut from ``fern_frame`` when given (a smoothed view of
    the same frame), HOG patches always from ``frame``.
    """
    fern_frame = frame if fern_frame is None else fern_frame
    if (fern_frame.width, fern_frame.height) != (frame.width, frame.height):
        raise ValueError("fern_frame must have the same size as frame")
    seeds = [BoundingBox(*map(float, s)) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed box is required")
    if warps_per_seed < 0:
        raise ValueError("warps_per_seed must be >= 0")
    rng = np.random.default_rng(rng_seed)

    def make(box, params, label, provenance):
        patch = warp_affine(fern_frame, box, params, FERN_PATCH)
        hog = warp_affine(frame, box, params, hog_size) if hog_size else None
        return Sample(patch, label, provenance, hog, box)

    samples = []
    for seed in seeds:
        samples.append(make(seed, AffineParams.identity(), POSITIVE, "seed-warp"))
        for _ in range(warps_per_seed):
            samples.append(make(seed, AffineParams.random(rng, seed), POSITIVE, "seed-warp"))

    n_neg = 2 * len(samples)
    for _ in range(n_neg):
        box = _random_negative_box(frame, seeds, rng)
        if box is None:
            raise ValueError("frame too small to place a negative sample away from the seeds")
        samples.append(make(box, AffineParams.random(rng, box), NEGATIVE, "seed-warp"))
    return samples
