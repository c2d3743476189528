"""Histogram-of-oriented-gradients descriptor for fixed-size patches.

Centered [-1, 0, 1] gradients with replicated borders, unsigned orientation
(0 to 180 degrees), votes shared bilinearly between the two nearest
orientation bins and the neighbouring cells, and L2 normalisation per block
of cells.  Bin b is centred on b * 180 / bins degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HogParams:
    cell: int = 16
    block: int = 2  # cells per block side
    block_stride: int = 1  # in cells
    bins: int = 9
    norm_epsilon: float = 1e-6

    def grid(self, patch_size: int) -> int:
        if patch_size % self.cell:
            raise ValueError(f"patch size {patch_size} not divisible by cell size {self.cell}")
        n_cells = patch_size // self.cell
        if self.block > n_cells:
            raise ValueError(f"block of {self.block} cells does not fit a {n_cells}-cell grid")
        return n_cells

    def n_blocks(self, patch_size: int) -> int:
        return (self.grid(patch_size) - self.block) // self.block_stride + 1

    def block_length(self) -> int:
        return self.block * self.block * self.bins

    def dimension(self, patch_size: int = 64) -> int:
        return self.n_blocks(patch_size) ** 2 * self.block_length()


def _gradients(img: np.ndarray):
    padded = np.pad(img, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]
    gy = padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]
    return gx, gy


def _spatial_weights(size: int, cell: int, n_cells: int) -> np.ndarray:
    """(n_cells, size) bilinear weight of each pixel row/column in each cell.

    Pixel centres sit at (i + 0.5) / cell - 0.5 in cell units and cells are
    centred on integers; votes falling outside the grid are dropped.
    """
    pos = (np.arange(size) + 0.5) / cell - 0.5
    c0 = np.floor(pos).astype(np.intp)
    frac = pos - c0
    weights = np.zeros((n_cells + 2, size))
    cols = np.arange(size)
    weights[c0 + 1, cols] += 1 - frac
    weights[c0 + 2, cols] += frac
    return weights[1:-1]


def cell_histograms(patches: np.ndarray, params: HogParams = HogParams()) -> np.ndarray:
    """(n, cells, cells, bins) orientation histograms for square patches.

    Computed in float32; the result is returned as float64.
    """
    patches = np.asarray(patches, dtype=np.float32)
    if patches.ndim == 2:
        patches = patches[None]
    n, h, w = patches.shape
    if h != w:
        raise ValueError("HOG expects square patches")
    n_cells = params.grid(h)
    bins = params.bins

    gx, gy = _gradients(patches)
    mag = np.hypot(gx, gy)
    angle = np.arctan2(gy, gx)
    angle[angle < 0] += np.float32(np.pi)
    bpos = angle * np.float32(bins / np.pi)
    b0 = bpos.astype(np.intp)  # angle >= 0, so truncation is floor
    upper = mag * (bpos - b0)
    b0 %= bins
    b1 = b0 + 1
    b1[b1 == bins] = 0

    # per-pixel orientation votes, then separable spatial pooling into cells
    votes = np.zeros((n * h * w, bins), np.float32)
    rows = np.arange(n * h * w)
    votes[rows, b0.ravel()] = (mag - upper).ravel()
    votes[rows, b1.ravel()] += upper.ravel()
    spatial = _spatial_weights(h, params.cell, n_cells).astype(np.float32)
    pooled = np.matmul(spatial, votes.reshape(n, h, w * bins)).reshape(n, n_cells, w, bins)
    return np.matmul(spatial, pooled).astype(np.float64)


def compute_hog_batch(patches: np.ndarray, params: HogParams = HogParams()) -> np.ndarray:
    cells = cell_histograms(patches, params)
    n, n_cells = cells.shape[0], cells.shape[1]
    k, step = params.block, params.block_stride
    starts = range(0, n_cells - k + 1, step)
    blocks = [cells[:, y : y + k, x : x + k].reshape(n, -1) for y in starts for x in starts]
    blocks = np.stack(blocks, axis=1)  # (n, n_blocks, block_len)
    norms = np.sqrt((blocks**2).sum(axis=-1, keepdims=True) + params.norm_epsilon**2)
    return (blocks / norms).reshape(n, -1)


def compute_hog(patch: np.ndarray, params: HogParams = HogParams()) -> np.ndarray:
    return compute_hog_batch(np.asarray(patch)[None], params)[0]
