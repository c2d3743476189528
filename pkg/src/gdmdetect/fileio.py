"""Frame directories and the CSV formats exchanged between commands."""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from pathlib import Path

from .imaging import BoundingBox, Frame, load_frame, save_frame

FRAME_PATTERN = re.compile(r"(\d+)\.(png|pgm)$", re.IGNORECASE)

BOX_HEADER = ["frame_index", "x", "y", "w", "h"]
DETECTION_HEADER = ["frame_index", "x", "y", "w", "h", "score", "region", "svm_used"]
PROGRESS_HEADER = ["t", "theta", "zeta", "n_hard", "n_pos_pseudo", "n_neg_pseudo"]


def frame_path(directory, index: int) -> Path:
    return Path(directory) / f"frame_{index:06d}.png"


def list_frames(directory) -> list[tuple[int, Path]]:
    """(index, path) for every numbered PNG/PGM file, sorted by index."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such frame directory: {directory}")
    out = []
    for path in directory.iterdir():
        m = FRAME_PATTERN.search(path.name)
        if m:
            out.append((int(m.group(1)), path))
    return sorted(out)


def read_frames(directory, start: int | None = None, end: int | None = None):
    """Yield frames with start <= index <= end."""
    for index, path in list_frames(directory):
        if start is not None and index < start:
            continue
        if end is not None and index > end:
            break
        yield load_frame(path, index)


def read_frame(directory, index: int) -> Frame:
    for i, path in list_frames(directory):
        if i == index:
            return load_frame(path, index)
    raise FileNotFoundError(f"frame {index} not found in {directory}")


def write_frames(frames, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for frame in frames:
        save_frame(frame, frame_path(directory, frame.index))


def _rows(path):
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip() == "frame_index" or row[0].strip() == "t":
                continue
            yield [c.strip() for c in row]


def read_boxes(path) -> dict[int, list[BoundingBox]]:
    """Seed or ground-truth CSV: frame_index,x,y,w,h per line."""
    boxes: dict[int, list[BoundingBox]] = defaultdict(list)
    for lineno, row in enumerate(_rows(path), 1):
        if len(row) < 5:
            raise ValueError(f"{path}: row {lineno} needs frame_index,x,y,w,h")
        boxes[int(row[0])].append(BoundingBox(*(float(v) for v in row[1:5])))
    return dict(boxes)


def write_boxes(boxes: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BOX_HEADER)
        for index in sorted(boxes):
            for b in boxes[index]:
                writer.writerow([index, _num(b.x), _num(b.y), _num(b.w), _num(b.h)])


def _num(v: float):
    return int(v) if float(v).is_integer() else repr(float(v))


def write_detections(rows, path) -> None:
    """rows: iterables of DetectionResponse (anything with box, score, region)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DETECTION_HEADER)
        for r in rows:
            score = r.fern_score if r.score is None else r.score
            writer.writerow(
                [r.frame_index, _num(r.box.x), _num(r.box.y), _num(r.box.w), _num(r.box.h),
                 repr(float(score)), r.region.value, int(r.svm_used)]
            )


def read_detections(path) -> dict[int, list[tuple[BoundingBox, float]]]:
    out: dict[int, list] = defaultdict(list)
    for lineno, row in enumerate(_rows(path), 1):
        if len(row) < 6:
            raise ValueError(f"{path}: row {lineno} needs at least frame_index,x,y,w,h,score")
        out[int(row[0])].append((BoundingBox(*(float(v) for v in row[1:5])), float(row[5])))
    return dict(out)


def write_progress(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PROGRESS_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
