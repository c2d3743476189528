"""Matching detections to ground truth: IoU, precision/recall/F and ROC points."""

from __future__ import annotations

from dataclasses import dataclass, field

from .imaging import box_iou


def iou(a, b) -> float:
    return box_iou(a, b)


@dataclass
class Metrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f_measure: float = 0.0
    roc: list = field(default_factory=list)

    def summary(self) -> str:
        return (
            f"TP={self.tp} FP={self.fp} FN={self.fn}  "
            f"precision={self.precision:.4f} recall={self.recall:.4f} F={self.f_measure:.4f}"
        )


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def f_from_pr(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def _ordered(dets):
    # dets: list of (box, score); stable sort by descending score
    return sorted(dets, key=lambda d: -d[1])


def _match_frame(dets, gts, iou_thresh):
    """Greedy one-to-one matching; returns a TP flag per detection in score order."""
    taken = [False] * len(gts)
    flags = []
    for box, _score in _ordered(dets):
        best, best_iou = -1, iou_thresh
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            o = box_iou(box, g)
            if o >= best_iou and (best < 0 or o > best_iou):
                best, best_iou = j, o
        if best >= 0:
            taken[best] = True
        flags.append(best >= 0)
    return flags


def match_detections(dets: dict, gt: dict, iou_thresh: float = 0.5, frames=None) -> Metrics:
    """Count TP/FP/FN over frames.

    ``dets`` maps frame index to ``(box, score)`` pairs, ``gt`` to boxes.
    ``frames`` restricts the evaluation; by default every frame in either map.
    """
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError("iou_thresh must lie in (0, 1)")
    frames = sorted(set(dets) | set(gt)) if frames is None else frames
    tp = fp = fn = 0
    for f in frames:
        d, g = dets.get(f, []), gt.get(f, [])
        flags = _match_frame(d, g, iou_thresh)
        hits = sum(flags)
        tp += hits
        fp += len(flags) - hits
        fn += len(g) - hits
    p, r, fm = prf(tp, fp, fn)
    return Metrics(tp, fp, fn, p, r, fm)


def roc_curve(dets: dict, gt: dict, iou_thresh: float = 0.5, frames=None) -> list[tuple[float, float, float]]:
    """(threshold, false positives per frame, recall) at every distinct score.

    Greedy matching in score order means the matches at a threshold are a
    prefix of the full run, so one pass over the sorted detections suffices.
    The first point is the empty set (threshold +inf).
    """
    frames = sorted(set(dets) | set(gt)) if frames is None else list(frames)
    n_frames = max(1, len(frames))
    n_gt = sum(len(gt.get(f, [])) for f in frames)
    scored = []
    for f in frames:
        d = _ordered(dets.get(f, []))
        for (box, score), hit in zip(d, _match_frame(d, gt.get(f, []), iou_thresh)):
            scored.append((score, hit))
    scored.sort(key=lambda s: -s[0])
    points = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    for i, (score, hit) in enumerate(scored):
        tp += hit
        fp += not hit
        if i + 1 == len(scored) or scored[i + 1][0] != score:
            points.append((float(score), fp / n_frames, tp / n_gt if n_gt else 0.0))
    return points


def evaluate(dets: dict, gt: dict, iou_thresh: float = 0.5, frames=None) -> Metrics:
    metrics = match_detections(dets, gt, iou_thresh, frames)
    metrics.roc = roc_curve(dets, gt, iou_thresh, frames)
    return metrics
