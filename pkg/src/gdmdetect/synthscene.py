"""Deterministic synthetic surveillance sequences with exact ground truth.

A static cluttered background (flat and striped rectangles, flat ellipses)
is overlaid with textured rectangles that move in straight lines and bounce
off the frame edges.  Each frame gets a
global illumination gain/offset and Gaussian sensor noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BoundingBox, Frame


@dataclass(frozen=True)
class SceneConfig:
    width: int = 320
    height: int = 240
    n_objects: int = 2
    object_size: tuple = (32, 48)  # (w, h)
    texture_seed: int = 7
    speed: float = 2.0  # max displacement per frame, pixels
    clutter_density: float = 0.6  # clutter shapes per 1000 background pixels
    noise_sigma: float = 8.0
    illumination_jitter: float = 0.1  # relative gain range
    n_frames: int = 100
    rng_seed: int = 0


def _blob_texture(rng: np.random.Generator, w: int, h: int, n_blobs: int, base: float, amp: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    tex = np.full((h, w), base)
    for _ in range(n_blobs):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        sy, sx = rng.uniform(0.06, 0.2) * h, rng.uniform(0.06, 0.2) * w
        tex += rng.uniform(-amp, amp) * np.exp(-(((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2) / 2)
    return tex


def object_texture(rng: np.random.Generator, w: int, h: int, cells: tuple = (4, 6)) -> np.ndarray:
    """Object appearance: a dark rim around a bright diagonal cross laid over
    a low-contrast random grid of cells.  The cross gives every object the
    same global layout (so a quarter of an object does not look like a whole
    one); the cell grid makes each object's texture its own."""
    cx, cy = cells
    levels = rng.uniform(70, 150, size=(cy, cx))
    rows = np.minimum(np.arange(h) * cy // h, cy - 1)
    cols = np.minimum(np.arange(w) * cx // w, cx - 1)
    tex = levels[rows][:, cols] + _blob_texture(rng, w, h, n_blobs=4, base=0.0, amp=25)
    yy, xx = np.mgrid[0:h, 0:w]
    u, v = xx / max(w - 1, 1), yy / max(h - 1, 1)
    arm = max(1.5, min(w, h) / 10)
    diag = np.minimum(np.abs(u - v), np.abs(u + v - 1)) * min(w, h)
    tex = np.where(diag < arm, 225.0, tex)
    rim = max(1, min(w, h) // 12)
    tex[:rim], tex[-rim:], tex[:, :rim], tex[:, -rim:] = 25, 25, 25, 25
    return np.clip(tex, 0, 255)


def background(rng: np.random.Generator, config: SceneConfig) -> np.ndarray:
    h, w = config.height, config.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    bg = 100 + 30 * (xx / w) + 20 * (yy / h)
    n_shapes = int(round(config.clutter_density * w * h / 1000))
    for _ in range(n_shapes):
        sw, sh = rng.integers(3, max(4, w // 8)), rng.integers(3, max(4, h // 8))
        x0, y0 = rng.integers(0, w - 1), rng.integers(0, h - 1)
        level = rng.uniform(40, 200)
        kind = rng.random()
        if kind < 0.4:
            bg[y0 : y0 + sh, x0 : x0 + sw] = level
        elif kind < 0.6:
            # striped patch: textured clutter that is not an object
            period = rng.integers(3, 9)
            stripes = np.where((np.arange(sw) // period) % 2 == 0, level, 255 - level)
            region = bg[y0 : y0 + sh, x0 : x0 + sw]
            region[:] = stripes[: region.shape[1]]
        else:
            mask = ((yy - y0) / (sh / 2)) ** 2 + ((xx - x0) / (sw / 2)) ** 2 <= 1
            bg[mask] = level
    return bg


def generate_sequence(config: SceneConfig) -> tuple[list[Frame], dict[int, list[BoundingBox]]]:
    """Render the sequence; ground truth maps frame index to object boxes."""
    if config.n_frames < 1:
        raise ValueError("need at least one frame")
    ow, oh = config.object_size
    if config.n_objects and (ow > config.width or oh > config.height):
        raise ValueError("objects larger than the frame")

    scene_rng = np.random.default_rng(config.rng_seed)
    tex_rng = np.random.default_rng(config.texture_seed)
    bg = background(scene_rng, config)
    textures = [object_texture(tex_rng, ow, oh) for _ in range(config.n_objects)]

    max_x, max_y = config.width - ow, config.height - oh
    pos = np.column_stack(
        [scene_rng.uniform(0, max_x, config.n_objects), scene_rng.uniform(0, max_y, config.n_objects)]
    )
    angle = scene_rng.uniform(0, 2 * np.pi, config.n_objects)
    speed = scene_rng.uniform(0.5, 1.0, config.n_objects) * config.speed
    vel = np.column_stack([np.cos(angle), np.sin(angle)]) * speed[:, None]

    frames, gt = [], {}
    for t in range(config.n_frames):
        img = bg.copy()
        boxes = []
        for k in range(config.n_objects):
            x, y = int(round(pos[k, 0])), int(round(pos[k, 1]))
            img[y : y + oh, x : x + ow] = textures[k]
            boxes.append(BoundingBox(float(x), float(y), float(ow), float(oh)))
        gain = 1.0 + scene_rng.uniform(-config.illumination_jitter, config.illumination_jitter)
        offset = scene_rng.uniform(-10, 10)
        img = gain * img + offset + scene_rng.normal(0, config.noise_sigma, img.shape)
        frames.append(Frame(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8), t))
        gt[t] = boxes

        pos += vel
        for axis, limit in ((0, max_x), (1, max_y)):
            low, high = pos[:, axis] < 0, pos[:, axis] > limit
            pos[low, axis] = -pos[low, axis]
            pos[high, axis] = 2 * limit - pos[high, axis]
            vel[low | high, axis] *= -1
    return frames, gt
