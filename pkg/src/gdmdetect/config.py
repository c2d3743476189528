"""One flat key-value configuration shared by every command.

Values marked "method" are the settings the detector is designed around;
the rest are our own defaults for things the method leaves open.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .hog import HogParams
from .svm import IsvmConfig


@dataclass(frozen=True)
class LearnerConfig:
    beta: float = 0.5
    theta0: float = 1.0
    nu: float = 0.85
    theta_stop: float = 0.3
    hard_batch: int = 100
    hard_per_frame: int = 64
    warps_per_seed: int = 50

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("nu must lie in (0, 1]")
        if not 0.0 < self.theta_stop < 1.0:
            raise ValueError("theta_stop must lie in (0, 1)")
        if self.hard_batch < 1:
            raise ValueError("hard_batch must be >= 1")
        if self.hard_per_frame < 1:
            raise ValueError("hard_per_frame must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    # online selector ferns
    n_selectors: int = 10  # method: 10 selectors
    n_candidates: int = 10  # method: 10 ferns per selector
    bits: int = 6  # method: 6 binary features per fern
    epsilon: float = 0.01  # weak-confidence smoothing
    th_fern: float = 0.5  # method: 0.5
    fern_blur: float = 1.5  # Gaussian sigma (frame pixels) applied before fern comparisons; 0 disables

    # dual boundary and learner loop
    beta: float = 0.5  # method
    theta0: float = 1.0  # method
    nu: float = 0.85  # method
    theta_stop: float = 0.3  # method: loop runs while theta > 0.3
    hard_batch: int = 100  # method: retrain once more than 100 hard samples
    hard_per_frame: int = 64  # cap on hard windows kept per frame (half top-scored, half random)
    warps_per_seed: int = 50  # random warps per seed box in the initial set

    # iterative SVM
    th_pos: float = 0.8  # method: about 0.8; negative threshold is -th_pos
    c_reg: float = 1.0
    d_reg: float = 1.0
    isvm_max_iters: int = 20

    # HOG
    hog_cell: int = 16  # method: 16x16 cells
    hog_block: int = 2  # cells per block side
    hog_block_stride: int = 1
    hog_bins: int = 9
    hog_norm_epsilon: float = 1e-6

    # scanning and matching
    n_scales: int = 11  # method: 11 scales
    scale_ratio: float = 1.15
    stride_frac: float = 0.125
    nms_iou: float = 0.3
    match_iou: float = 0.5
    workers: int = 1

    rng_seed: int = 0

    def learner(self) -> LearnerConfig:
        return LearnerConfig(
            beta=self.beta,
            theta0=self.theta0,
            nu=self.nu,
            theta_stop=self.theta_stop,
            hard_batch=self.hard_batch,
            hard_per_frame=self.hard_per_frame,
            warps_per_seed=self.warps_per_seed,
        )

    def isvm(self) -> IsvmConfig:
        return IsvmConfig(th_pos=self.th_pos, d_reg=self.d_reg, max_iters=self.isvm_max_iters)

    def hog(self) -> HogParams:
        return HogParams(self.hog_cell, self.hog_block, self.hog_block_stride, self.hog_bins, self.hog_norm_epsilon)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        out = {}
        for key, value in data.items():
            kind = type(getattr(cls, key))
            if kind is int and (isinstance(value, bool) or not float(value).is_integer()):
                raise ValueError(f"{key} must be an integer, got {value!r}")
            out[key] = kind(value)
        return cls(**out)

    def override(self, **values) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        return _merge(self, values) if values else self


def _merge(base: RunConfig, values: dict) -> RunConfig:
    merged = base.to_dict()
    merged.update(values)
    return RunConfig.from_dict(merged)


def load_config(path=None, **overrides) -> RunConfig:
    """Read a JSON config document (if given) and apply non-None overrides."""
    base = RunConfig()
    if path is not None:
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        base = RunConfig.from_dict(data)
    return base.override(**overrides)
