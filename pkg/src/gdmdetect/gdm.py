"""The generative-discriminative hybrid and its online gradual learner.

Fern scores are split by two boundaries, ``beta +/- theta / 2``, into a
positive region, a negative region and a hard band in between.  Windows in
the hard band are handed to the SVM.  While learning, the hard windows are
pooled; whenever the pool exceeds ``hard_batch`` the iterative SVM labels
them, the ferns are retrained on those labels, and the band is narrowed
according to how well fern offsets agree with the SVM signs.  Learning ends
once ``theta <= theta_stop``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .config import LearnerConfig, RunConfig
from .fern import OsfClassifier
from .hog import HogParams, compute_hog_batch
from .imaging import (
    FERN_PATCH,
    HOG_PATCH,
    BoundingBox,
    Frame,
    bilinear,
    extract_patches,
    generate_initial_samples,
    round_intensity,
    smooth_frame,
)
from .scan import scan_scores, seed_scale_set, window_grid
from .svm import LinearSvmModel, isvm_run, predict_labels, svm_score, svm_train

log = logging.getLogger(__name__)


class Region(str, enum.Enum):
    POSITIVE = "positive"
    HARD = "hard"
    NEGATIVE = "negative"


REGION_CODE = {Region.POSITIVE: 1, Region.HARD: 0, Region.NEGATIVE: -1}


@dataclass
class DualBoundary:
    beta: float = 0.5
    theta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")

    @property
    def upper(self) -> float:
        return self.beta + self.theta / 2

    @property
    def lower(self) -> float:
        return self.beta - self.theta / 2


def partition_response(score: float, boundary: DualBoundary) -> Region:
    if score > boundary.upper:
        return Region.POSITIVE
    if score < boundary.lower:
        return Region.NEGATIVE
    return Region.HARD


def partition_scores(scores, boundary: DualBoundary) -> np.ndarray:
    """Vectorised partition: 1 positive, 0 hard, -1 negative."""
    scores = np.asarray(scores)
    return np.where(scores > boundary.upper, 1, np.where(scores < boundary.lower, -1, 0))


def compute_zeta(fern_scores, svm_margins, beta: float) -> float:
    """Agreement between fern offsets from beta and SVM signs, in [-1, 1].

    ``fern_scores`` may also be a ``HardSampleBuffer``.
    """
    if isinstance(fern_scores, HardSampleBuffer):
        fern_scores = fern_scores.scores
    offsets = np.asarray(fern_scores, dtype=np.float64) - beta
    margins = np.asarray(svm_margins, dtype=np.float64)
    if offsets.size == 0:
        raise ValueError("cannot measure agreement on an empty hard set")
    if offsets.shape != margins.shape:
        raise ValueError("one SVM margin per hard sample is required")
    denom = np.abs(offsets).sum()
    if denom == 0:
        return 0.0
    return float((offsets * predict_labels(margins)).sum() / denom)


def update_theta(theta_prev: float, zeta: float, nu: float = 0.85) -> float:
    """Narrow the band to 1 - nu * zeta, never widening it and never below 0."""
    raw = 1.0 - nu * zeta
    return min(theta_prev, max(0.0, raw))


@dataclass
class HardSampleBuffer:
    patches: list = field(default_factory=list)
    hog_patches: list = field(default_factory=list)
    fern_scores: list = field(default_factory=list)
    frame_indices: list = field(default_factory=list)
    boxes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.fern_scores)

    @property
    def scores(self) -> np.ndarray:
        return np.asarray(self.fern_scores, dtype=np.float64)

    def add(self, patches, hog_patches, scores, frame_index: int, boxes) -> None:
        self.patches.extend(patches)
        self.hog_patches.extend(hog_patches)
        self.fern_scores.extend(float(s) for s in scores)
        self.frame_indices.extend([frame_index] * len(scores))
        self.boxes.extend(BoundingBox(*map(float, b)) for b in boxes)

    def clear(self) -> None:
        for items in (self.patches, self.hog_patches, self.fern_scores, self.frame_indices, self.boxes):
            items.clear()


@dataclass
class GdmModel:
    osf: OsfClassifier
    svm: LinearSvmModel
    boundary: DualBoundary
    hog_params: HogParams = field(default_factory=HogParams)
    seeds: list = field(default_factory=list)
    seed_frame: int = 0
    fern_blur: float = 0.0
    svm_evaluations: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.svm.dimension != self.hog_params.dimension(HOG_PATCH):
            raise ValueError(
                f"SVM dimension {self.svm.dimension} does not match HOG dimension "
                f"{self.hog_params.dimension(HOG_PATCH)}"
            )

    def fern_view(self, frame: Frame) -> Frame:
        """The smoothed frame that fern codes are computed on."""
        return smooth_frame(frame, self.fern_blur)

    def svm_margins(self, hog_patches) -> np.ndarray:
        """SVM margins of 64x64 patches; every patch counts as one SVM evaluation."""
        margins = self.raw_margins(hog_patches)
        self.svm_evaluations += len(margins)
        return margins

    def raw_margins(self, hog_patches) -> np.ndarray:
        """Uncounted margins, safe to call from worker threads."""
        hog_patches = np.asarray(hog_patches)
        if len(hog_patches) == 0:
            return np.zeros(0)
        return np.atleast_1d(svm_score(self.svm, compute_hog_batch(hog_patches, self.hog_params)))


class HybridDecision(NamedTuple):
    label: int
    fern_score: float
    svm_used: bool
    svm_margin: float | None = None


def upsample_patch(patch: np.ndarray, target: int = HOG_PATCH) -> np.ndarray:
    n = patch.shape[0]
    coords = (np.arange(target) + 0.5) * (n / target) - 0.5
    return round_intensity(bilinear(patch, coords[:, None], coords[None, :]))


def hybrid_classify(model: GdmModel, patch: np.ndarray, hog_patch: np.ndarray | None = None) -> HybridDecision:
    """Label one window: ferns decide outside the band, the SVM inside it.

    ``patch`` is the fern-resolution window cut from ``model.fern_view(frame)``.
    ``hog_patch`` is the same window at HOG resolution from the raw frame;
    when omitted it is upsampled from ``patch``.
    """
    score = model.osf.score(patch)
    region = partition_response(score, model.boundary)
    if region is Region.POSITIVE:
        return HybridDecision(1, score, False)
    if region is Region.NEGATIVE:
        return HybridDecision(-1, score, False)
    if hog_patch is None:
        hog_patch = upsample_patch(patch)
    margin = float(model.svm_margins(np.asarray(hog_patch)[None])[0])
    return HybridDecision(int(predict_labels(margin)), score, True, margin)


def _check_seeds(frame: Frame, seeds) -> list[BoundingBox]:
    seeds = [BoundingBox(*map(float, s)) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed box is required")
    for s in seeds:
        if s.w < 1 or s.h < 1 or s.clip(frame.width, frame.height) is None:
            raise ValueError(f"seed box {tuple(s)} is empty or outside the frame")
    return seeds


def initial_set(frame: Frame, seeds, config: RunConfig = RunConfig()):
    """The seed-derived training set; deterministic given ``config.rng_seed``."""
    seeds = _check_seeds(frame, seeds)
    fern_frame = smooth_frame(frame, config.fern_blur)
    return generate_initial_samples(frame, seeds, config.warps_per_seed, config.rng_seed, fern_frame=fern_frame)


def initialize(frame: Frame, seeds, config: RunConfig = RunConfig()):
    """Build the initial set from the seed boxes and train both models on it.

    Returns ``(model, samples)``.
    """
    seeds = _check_seeds(frame, seeds)
    samples = initial_set(frame, seeds, config)
    osf = OsfClassifier(
        config.n_selectors, config.n_candidates, config.bits, config.epsilon, config.th_fern, config.rng_seed
    )
    osf.train_samples(samples)
    hog_params = config.hog()
    X = compute_hog_batch(np.stack([s.hog_patch for s in samples]), hog_params)
    y = np.array([s.label for s in samples])
    svm = svm_train(X, y, config.c_reg)
    boundary = DualBoundary(config.beta, config.theta0)
    model = GdmModel(osf, svm, boundary, hog_params, seeds, frame.index, config.fern_blur)
    return model, samples


@dataclass
class LearnerState:
    t: int = 0
    theta_history: list = field(default_factory=list)
    zeta_last: float | None = None
    samples_learned: tuple = (0, 0)
    frames_seen: int = 0
    last_frame: int | None = None
    converged: bool = False
    progress: list = field(default_factory=list)  # rows of t, theta, zeta, n_hard, n_pos, n_neg

    @property
    def theta(self) -> float:
        return self.theta_history[-1]


class Learner:
    """Frame-by-frame driver of the online gradual optimisation loop."""

    def __init__(self, model: GdmModel, initial_samples, config: RunConfig = RunConfig(), state=None):
        self.model = model
        self.config = config
        self.learner_config: LearnerConfig = config.learner()
        self.isvm_config = config.isvm()
        self.state = state or LearnerState(theta_history=[model.boundary.theta])
        self.buffer = HardSampleBuffer()
        self.l0_X = compute_hog_batch(np.stack([s.hog_patch for s in initial_samples]), model.hog_params)
        self.l0_y = np.array([s.label for s in initial_samples])
        self.sizes = seed_scale_set(model.seeds, config.n_scales, config.scale_ratio)

    @property
    def done(self) -> bool:
        return self.state.theta <= self.learner_config.theta_stop

    def collect(self, frame: Frame) -> int:
        """Scan one frame with the ferns and pool its hard windows."""
        boundary = self.model.boundary
        fern_frame = self.model.fern_view(frame)
        all_boxes, all_scores = [], []
        for w, h in self.sizes:
            grid = window_grid(frame.width, frame.height, w, h, self.config.stride_frac)
            if grid is None:
                continue
            all_scores.append(scan_scores(self.model.osf, fern_frame, grid).ravel())
            all_boxes.append(grid.boxes())
        if not all_scores:
            return 0
        scores = np.concatenate(all_scores)
        boxes = np.vstack(all_boxes)
        hard = np.flatnonzero(partition_scores(scores, boundary) == 0)
        hard = self._subsample(hard, scores, frame.index)
        if len(hard) == 0:
            return 0
        chosen = boxes[hard]
        self.buffer.add(
            extract_patches(fern_frame, chosen, FERN_PATCH),
            extract_patches(frame, chosen, HOG_PATCH),
            scores[hard],
            frame.index,
            chosen,
        )
        return len(hard)

    def _subsample(self, hard: np.ndarray, scores: np.ndarray, frame_index: int) -> np.ndarray:
        cap = self.learner_config.hard_per_frame
        if len(hard) <= cap:
            return hard
        # keep the best-scored half of the cap, fill the rest at random
        order = hard[np.argsort(-scores[hard], kind="stable")]
        top = order[: cap // 2]
        rng = np.random.default_rng([self.config.rng_seed, frame_index])
        rest = rng.choice(order[cap // 2 :], size=cap - len(top), replace=False)
        return np.sort(np.concatenate([top, rest]))

    def optimise(self) -> dict:
        """One pass of: label the pool with the ISVM, retrain ferns, narrow the band."""
        buf = self.buffer
        U = compute_hog_batch(np.stack(buf.hog_patches), self.model.hog_params)
        result = isvm_run(self.l0_X, self.l0_y, U, self.isvm_config, self.config.c_reg)
        self.model.svm = result.model
        labels = result.pseudo_labels
        patches = np.stack(buf.patches)
        self.model.osf.train(patches, labels)
        rescored = self.model.osf.scores(patches)
        margins = svm_score(result.model, U)
        zeta = compute_zeta(rescored, margins, self.learner_config.beta)
        theta = update_theta(self.state.theta, zeta, self.learner_config.nu)
        self.model.boundary.theta = theta

        n_pos = int((labels > 0).sum())
        n_neg = len(labels) - n_pos
        st = self.state
        st.samples_learned = (st.samples_learned[0] + n_pos, st.samples_learned[1] + n_neg)
        st.zeta_last = zeta
        st.theta_history.append(theta)
        row = {"t": st.t, "theta": theta, "zeta": zeta, "n_hard": len(buf), "n_pos_pseudo": n_pos, "n_neg_pseudo": n_neg}
        st.progress.append(row)
        log.info("iteration %d: zeta=%.4f theta=%.4f hard=%d (+%d/-%d)", st.t, zeta, theta, len(buf), n_pos, n_neg)
        buf.clear()
        st.t += 1
        return row

    def step(self, frame: Frame) -> dict | None:
        self.collect(frame)
        self.state.frames_seen += 1
        self.state.last_frame = frame.index
        if len(self.buffer) > self.learner_config.hard_batch:
            row = self.optimise()
            self.state.converged = self.done
            return row
        return None

    def run(
        self, frames: Iterable[Frame], on_iteration: Callable | None = None, max_iterations: int | None = None
    ) -> LearnerState:
        """Consume frames until the band closes or the stream ends.

        ``max_iterations`` stops early right after that many optimisation
        passes (counted over the whole run, resumed or not).  The hard pool
        is empty at that point, so continuing from ``state.last_frame + 1``
        with a fresh learner gives the same result as never stopping.
        """
        for frame in frames:
            if self.done or (max_iterations is not None and self.state.t >= max_iterations):
                break
            row = self.step(frame)
            if row is not None and on_iteration is not None:
                on_iteration(self, row)
        self.state.converged = self.done
        return self.state


def run_learner(frames: Iterable[Frame], seeds, config: RunConfig = RunConfig()):
    """Initialise from the first frame's seed boxes, then learn over the rest.

    Returns ``(model, state)``; ``state.converged`` is False when the stream
    ended before the band closed to ``theta_stop``.
    """
    frames = iter(frames)
    try:
        first = next(frames)
    except StopIteration:
        raise ValueError("empty frame stream") from None
    model, samples = initialize(first, seeds, config)
    learner = Learner(model, samples, config)
    state = learner.run(frames)
    return model, state
