"""Multi-scale sliding-window detection with the hybrid model, plus NMS."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from .gdm import DualBoundary, GdmModel, Region, partition_scores
from .imaging import HOG_PATCH, BoundingBox, Frame, extract_patches
from .scan import ScaleSet, build_scale_set, scan_scores, seed_scale_set, window_grid

__all__ = [
    "DetectionResponse",
    "ResponseSet",
    "ScaleSet",
    "build_scale_set",
    "seed_scale_set",
    "detection_score",
    "sliding_window_detect",
    "nms",
    "nms_indices",
]

_REGIONS = {1: Region.POSITIVE, 0: Region.HARD, -1: Region.NEGATIVE}


@dataclass
class DetectionResponse:
    box: BoundingBox
    fern_score: float
    region: Region
    svm_margin: float | None = None
    frame_index: int = 0
    score: float | None = None  # ranking score used by NMS

    @property
    def svm_used(self) -> bool:
        return self.svm_margin is not None

    @property
    def is_detection(self) -> bool:
        return self.region is Region.POSITIVE or (self.region is Region.HARD and self.svm_margin > 0)


def detection_score(fern_score, region_code, svm_margin, boundary: DualBoundary):
    """Ranking score: the fern score, except hard windows get the SVM margin
    squashed by a logistic into the hard band, ``beta + theta * (sigmoid(m) - 1/2)``.

    Works elementwise on arrays.
    """
    fern_score = np.asarray(fern_score, dtype=np.float64)
    margin = np.nan_to_num(np.asarray(svm_margin, dtype=np.float64))
    calibrated = boundary.beta + boundary.theta * (1.0 / (1.0 + np.exp(-margin)) - 0.5)
    return np.where(np.asarray(region_code) == 0, calibrated, fern_score)


@dataclass
class ResponseSet:
    """Every scored window of one frame, stored column-wise."""

    boxes: np.ndarray  # (n, 4)
    fern_scores: np.ndarray
    regions: np.ndarray  # 1 positive, 0 hard, -1 negative
    svm_margins: np.ndarray  # NaN outside the hard band
    scores: np.ndarray
    frame_index: int = 0

    def __len__(self) -> int:
        return len(self.fern_scores)

    @property
    def detection_mask(self) -> np.ndarray:
        return (self.regions == 1) | ((self.regions == 0) & (np.nan_to_num(self.svm_margins) > 0))

    def response(self, i: int) -> DetectionResponse:
        m = self.svm_margins[i]
        return DetectionResponse(
            BoundingBox(*map(float, self.boxes[i])),
            float(self.fern_scores[i]),
            _REGIONS[int(self.regions[i])],
            None if np.isnan(m) else float(m),
            self.frame_index,
            float(self.scores[i]),
        )

    def responses(self, indices=None) -> list[DetectionResponse]:
        indices = range(len(self)) if indices is None else indices
        return [self.response(int(i)) for i in indices]

    def detections(self) -> list[DetectionResponse]:
        return self.responses(np.flatnonzero(self.detection_mask))


def _score_scale(model, fern_frame, size, stride_frac):
    grid = window_grid(fern_frame.width, fern_frame.height, size[0], size[1], stride_frac)
    if grid is None:
        return None
    return grid.boxes(), scan_scores(model.osf, fern_frame, grid).ravel()


def sliding_window_detect(
    model: GdmModel, frame: Frame, scales: ScaleSet, stride_frac: float = 0.125, workers: int = 1
) -> ResponseSet:
    """Score every window position at every scale with the hybrid classifier.

    The ferns score all windows; the SVM sees only windows in the hard band.
    With ``workers > 1`` the per-scale fern scans and the HOG/SVM chunks of
    the band run on a thread pool; results do not depend on ``workers``.
    """
    sizes = list(scales)
    fern_frame = model.fern_view(frame)
    with ThreadPoolExecutor(max_workers=workers) if workers > 1 else nullcontext() as pool:
        scorer = pool.map if pool else map
        parts = [p for p in scorer(lambda s: _score_scale(model, fern_frame, s, stride_frac), sizes) if p is not None]
        if not parts:
            empty = np.zeros(0)
            return ResponseSet(np.zeros((0, 4)), empty, np.zeros(0, int), empty, empty, frame.index)

        boxes = np.vstack([p[0] for p in parts])
        fern = np.concatenate([p[1] for p in parts])
        regions = partition_scores(fern, model.boundary)
        margins = np.full(len(fern), np.nan)
        hard = np.flatnonzero(regions == 0)
        if len(hard):
            chunks = np.array_split(hard, max(1, math.ceil(len(hard) / 512)))
            results = scorer(lambda c: model.raw_margins(extract_patches(frame, boxes[c], HOG_PATCH)), chunks)
            for chunk, values in zip(chunks, results):
                margins[chunk] = values
            model.svm_evaluations += len(hard)
    scores = detection_score(fern, regions, margins, model.boundary)
    return ResponseSet(boxes, fern, regions, margins, scores, frame.index)


def _iou_one_to_many(box, others):
    x1 = np.maximum(box[0], others[:, 0])
    y1 = np.maximum(box[1], others[:, 1])
    x2 = np.minimum(box[0] + box[2], others[:, 0] + others[:, 2])
    y2 = np.minimum(box[1] + box[3], others[:, 1] + others[:, 3])
    inter = np.clip(x2 - x1, 0, None) * np.clip(y2 - y1, 0, None)
    union = box[2] * box[3] + others[:, 2] * others[:, 3] - inter
    return inter / union


def nms_indices(boxes, scores, iou_thresh: float = 0.3) -> np.ndarray:
    """Greedy suppression; order is score descending, then x, then y."""
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError("iou_thresh must lie in (0, 1)")
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((boxes[:, 1], boxes[:, 0], -scores))
    keep = []
    while len(order):
        i = order[0]
        keep.append(i)
        rest = order[1:]
        order = rest[_iou_one_to_many(boxes[i], boxes[rest]) < iou_thresh]
    return np.array(keep, dtype=np.intp)


def nms(responses: list[DetectionResponse], iou_thresh: float = 0.3) -> list[DetectionResponse]:
    if not responses:
        return []
    boxes = [tuple(r.box) for r in responses]
    scores = [r.fern_score if r.score is None else r.score for r in responses]
    return [responses[i] for i in nms_indices(boxes, scores, iou_thresh)]


def detect_frame(model: GdmModel, frame: Frame, scales: ScaleSet, stride_frac=0.125, nms_iou=0.3, workers=1):
    """Detections after NMS, plus the full response set."""
    responses = sliding_window_detect(model, frame, scales, stride_frac, workers)
    return nms(responses.detections(), nms_iou), responses
