"""Dense fern scoring of every sliding-window position at one window size.

Rather than resampling each window to the fern patch size, the frame is
resized once so that the window maps to exactly ``patch`` x ``patch``
pixels; window positions then sit on an integer lattice of that level and
every pixel comparison becomes a strided slice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fern import OsfClassifier
from .imaging import FERN_PATCH, Frame, resample_level

log = logging.getLogger(__name__)

MIN_WINDOW = 8


@dataclass(frozen=True)
class ScaleSet:
    sizes: tuple  # ((w, h), ...) strictly increasing

    def __len__(self) -> int:
        return len(self.sizes)

    def __iter__(self):
        return iter(self.sizes)


def build_scale_set(seed_box, n_scales: int = 11, ratio: float = 1.15) -> ScaleSet:
    """Geometric ladder of window sizes centred on the seed box size.

    Sizes under MIN_WINDOW pixels on either side are dropped with a warning.
    """
    if n_scales < 1:
        raise ValueError("n_scales must be >= 1")
    if ratio <= 1.0:
        raise ValueError("scale ratio must exceed 1")
    w, h = float(seed_box[2]), float(seed_box[3])
    half = (n_scales - 1) / 2
    sizes = []
    for e in np.arange(-half, half + 1):
        size = (int(round(w * ratio**e)), int(round(h * ratio**e)))
        if min(size) < MIN_WINDOW:
            log.warning("dropping window size %dx%d (below %d px)", *size, MIN_WINDOW)
            continue
        if sizes and size <= sizes[-1]:
            continue
        sizes.append(size)
    if not sizes:
        raise ValueError("every window size fell below the minimum")
    return ScaleSet(tuple(sizes))


def seed_scale_set(seeds, n_scales: int = 11, ratio: float = 1.15) -> ScaleSet:
    """Scale set around the mean size of several seed boxes."""
    w = float(np.mean([s[2] for s in seeds]))
    h = float(np.mean([s[3] for s in seeds]))
    return build_scale_set((0, 0, w, h), n_scales, ratio)


@dataclass(frozen=True)
class WindowGrid:
    w: int
    h: int
    nx: int
    ny: int
    level_step: int  # lattice step in level pixels
    patch: int = FERN_PATCH

    @property
    def step_x(self) -> float:
        return self.level_step * self.w / self.patch

    @property
    def step_y(self) -> float:
        return self.level_step * self.h / self.patch

    @property
    def count(self) -> int:
        return self.nx * self.ny

    def boxes(self) -> np.ndarray:
        """(ny * nx, 4) boxes in row-major position order."""
        xs = np.arange(self.nx) * self.step_x
        ys = np.arange(self.ny) * self.step_y
        gy, gx = np.meshgrid(ys, xs, indexing="ij")
        return np.column_stack(
            [gx.ravel(), gy.ravel(), np.full(gx.size, float(self.w)), np.full(gx.size, float(self.h))]
        )


def level_step(stride_frac: float, patch: int = FERN_PATCH) -> int:
    if not 0.0 < stride_frac <= 1.0:
        raise ValueError("stride_frac must lie in (0, 1]")
    return max(1, int(round(stride_frac * patch)))


def window_grid(frame_w: int, frame_h: int, w: int, h: int, stride_frac: float, patch: int = FERN_PATCH):
    """Positions of a w x h window; None when the window does not fit."""
    if w > frame_w or h > frame_h:
        return None
    k = level_step(stride_frac, patch)
    step_x, step_y = k * w / patch, k * h / patch
    nx = int(math.floor((frame_w - w) / step_x + 1e-9)) + 1
    ny = int(math.floor((frame_h - h) / step_y + 1e-9)) + 1
    return WindowGrid(int(w), int(h), nx, ny, k, patch)


def scan_scores(osf: OsfClassifier, frame: Frame, grid: WindowGrid) -> np.ndarray:
    """Strong fern score of every window in ``grid`` as an (ny, nx) array."""
    k, p = grid.level_step, grid.patch
    ly = (grid.ny - 1) * k + p
    lx = (grid.nx - 1) * k + p
    level = resample_level(frame.pixels, grid.h / p, grid.w / p, ly, lx)
    span_y = (grid.ny - 1) * k + 1
    span_x = (grid.nx - 1) * k + 1

    pairs = osf.active_pairs()
    tables = osf.active_tables()
    total = np.zeros((grid.ny, grid.nx))
    ctype = np.uint8 if osf.bits <= 8 else np.uint16
    for n in range(osf.n_selectors):
        code = np.zeros((grid.ny, grid.nx), ctype)
        for bit, (ra, ca, rb, cb) in enumerate(pairs[n]):
            a = level[ra : ra + span_y : k, ca : ca + span_x : k]
            b = level[rb : rb + span_y : k, cb : cb + span_x : k]
            code |= np.greater(a, b).view(np.uint8).astype(ctype) << ctype(bit)
        total += tables[n][code]
    return total / osf.n_selectors
