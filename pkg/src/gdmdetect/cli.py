"""Command-line entry points: ``synth``, ``init``, ``learn``, ``detect``, ``eval``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 learning ended before
the band closed (the model is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import fileio
from .config import RunConfig, load_config
from .detect import detect_frame, nms, seed_scale_set, sliding_window_detect
from .evaluate import evaluate
from .gdm import Learner, LearnerState, initial_set, initialize
from .modelio import load_model, save_model
from .synthscene import SceneConfig, generate_sequence

log = logging.getLogger("gdmdetect")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config_for(args, stored: RunConfig | None = None) -> RunConfig:
    """Config file (or the model's stored snapshot) with command-line overrides."""
    if args.config is not None:
        base = load_config(args.config)
    else:
        base = stored or RunConfig()
    return base.override(rng_seed=getattr(args, "seed", None), workers=getattr(args, "workers", None))


def _in_range(index, start, end):
    return (start is None or index >= start) and (end is None or index <= end)


def cmd_synth(args) -> int:
    width, height = args.size
    scene = SceneConfig(
        width=width,
        height=height,
        n_objects=args.objects,
        object_size=tuple(args.object_size),
        noise_sigma=args.noise,
        n_frames=args.frames,
        rng_seed=args.seed,
        texture_seed=args.texture_seed,
    )
    frames, gt = generate_sequence(scene)
    out = Path(args.out)
    fileio.write_frames(frames, out / "frames")
    fileio.write_boxes(gt, out / "gt.csv")
    fileio.write_boxes({0: gt[0]}, out / "seeds.csv")
    log.info("wrote %d frames to %s", len(frames), out)
    return EXIT_OK


def cmd_init(args) -> int:
    config = _config_for(args)
    seeds = fileio.read_boxes(args.seeds)
    if not seeds:
        raise ValueError(f"{args.seeds}: no seed boxes")
    seed_frame = min(seeds)
    frame = fileio.read_frame(args.frames, seed_frame)
    model, samples = initialize(frame, seeds[seed_frame], config)
    state = LearnerState(theta_history=[model.boundary.theta])
    save_model(args.model, model, config, state)
    log.info("initial model from %d samples written to %s", len(samples), args.model)
    return EXIT_OK


def cmd_learn(args) -> int:
    model, stored, state = load_model(args.model)
    config = _config_for(args, stored)
    model, config, state = load_model(args.model, config)
    state = state or LearnerState(theta_history=[model.boundary.theta])

    start = args.start
    if start is None:
        start = (state.last_frame if state.last_frame is not None else model.seed_frame) + 1
    indices = [i for i, _ in fileio.list_frames(args.frames) if _in_range(i, start, args.end)]
    if state.last_frame is None and len(indices) < 2:
        raise ValueError("learning needs at least two frames")

    seed = fileio.read_frame(args.frames, model.seed_frame)
    learner = Learner(model, initial_set(seed, model.seeds, config), config, state)

    def report(_learner, row):
        log.info("t=%d theta=%.4f zeta=%.4f", row["t"], row["theta"], row["zeta"])

    learner.run(fileio.read_frames(args.frames, start, args.end), report, args.max_iterations)
    out = args.out or args.model
    save_model(out, model, config, state)
    if args.progress:
        fileio.write_progress(state.progress, args.progress)
    log.info("t=%d theta=%.4f converged=%s last frame %s", state.t, state.theta, state.converged, state.last_frame)
    interrupted = args.max_iterations is not None and state.t >= args.max_iterations
    return EXIT_OK if state.converged or interrupted else EXIT_NOT_CONVERGED


def cmd_detect(args) -> int:
    model, stored, _ = load_model(args.model)
    config = _config_for(args, stored)
    model, config, _ = load_model(args.model, config)
    scales = seed_scale_set(model.seeds, config.n_scales, config.scale_ratio)

    detections, raw = [], []
    for frame in fileio.read_frames(args.frames, args.start, args.end):
        if args.raw:
            responses = sliding_window_detect(model, frame, scales, config.stride_frac, config.workers)
            raw.extend(responses.responses())
            detections.extend(nms(responses.detections(), config.nms_iou))
        else:
            dets, _ = detect_frame(model, frame, scales, config.stride_frac, config.nms_iou, config.workers)
            detections.extend(dets)
    fileio.write_detections(detections, args.out)
    if args.raw:
        fileio.write_detections(raw, args.raw)
    log.info("%d detections written to %s", len(detections), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config_for(args)
    iou = config.match_iou if args.iou is None else args.iou
    dets = fileio.read_detections(args.detections)
    gt = fileio.read_boxes(args.gt)
    frames = sorted(i for i in set(gt) | set(dets) if _in_range(i, args.start, args.end))
    for index in sorted(set(dets) - set(gt)):
        if _in_range(index, args.start, args.end):
            log.warning("frame %d has detections but no ground-truth rows", index)

    metrics = evaluate(dets, gt, iou, frames)
    report = {
        "frames": len(frames),
        "iou": iou,
        "tp": metrics.tp,
        "fp": metrics.fp,
        "fn": metrics.fn,
        "precision": metrics.precision,
        "recall": metrics.recall,
        "f_measure": metrics.f_measure,
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.roc:
        with open(args.roc, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "fp_per_frame", "recall"])
            writer.writerows((repr(t), repr(f), repr(r)) for t, f, r in metrics.roc)
    return EXIT_OK


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gdmdetect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic sequence with ground truth")
    p.add_argument("--out", required=True, help="output directory (frames/, gt.csv, seeds.csv)")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--size", type=_size, default=(320, 240), help="frame size WxH")
    p.add_argument("--objects", type=int, default=2)
    p.add_argument("--object-size", type=_size, default=(32, 48), help="object size WxH")
    p.add_argument("--noise", type=float, default=8.0, help="sensor noise sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--texture-seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("init", help="train the initial model from seed boxes")
    p.add_argument("--frames", required=True)
    p.add_argument("--seeds", required=True, help="CSV frame_index,x,y,w,h")
    p.add_argument("--model", required=True, help="model file to write")
    p.add_argument("--config", help="JSON configuration document")
    p.add_argument("--seed", type=int, help="override rng_seed")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("learn", help="run the online learner over a frame range")
    p.add_argument("--frames", required=True)
    p.add_argument("--model", required=True, help="model file to continue from")
    p.add_argument("--out", help="model file to write (default: overwrite --model)")
    p.add_argument("--start", type=int, help="first frame (default: after the last learned frame)")
    p.add_argument("--end", type=int, help="last frame, inclusive")
    p.add_argument("--max-iterations", type=int, help="stop after this many optimisation passes")
    p.add_argument("--progress", help="CSV of per-iteration theta/zeta")
    p.add_argument("--config", help="JSON configuration document (default: the model's)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("detect", help="detect objects with a trained model")
    p.add_argument("--frames", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="detections CSV after NMS")
    p.add_argument("--raw", help="also write every scored window to this CSV")
    p.add_argument("--start", type=int)
    p.add_argument("--end", type=int)
    p.add_argument("--config", help="JSON configuration document (default: the model's)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--start", type=int)
    p.add_argument("--end", type=int)
    p.add_argument("--iou", type=float, help="match threshold (default from config, 0.5)")
    p.add_argument("--out", help="write the metrics JSON here too")
    p.add_argument("--roc", help="ROC points CSV")
    p.add_argument("--config", help="JSON configuration document")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"gdmdetect {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
