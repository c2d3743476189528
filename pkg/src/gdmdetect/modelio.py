"""Model files: a versioned JSON document holding everything needed to
score windows and to resume learning.

Fern counts are stored as raw integers and SVM weights as shortest
round-trip float literals, so ``load_model(save_model(m))`` scores every
patch exactly as ``m`` does.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import RunConfig
from .fern import OsfClassifier
from .gdm import DualBoundary, GdmModel, LearnerState
from .imaging import BoundingBox
from .svm import LinearSvmModel

FORMAT = "gdmdetect-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _osf_to_dict(osf: OsfClassifier) -> dict:
    return {
        "n_selectors": osf.n_selectors,
        "n_candidates": osf.n_candidates,
        "bits": osf.bits,
        "epsilon": osf.epsilon,
        "th_fern": osf.th_fern,
        "rng_seed": osf.rng_seed,
        "patch_size": osf.patch_size,
        "pairs": osf.pairs.tolist(),
        "pos_counts": osf.pos_counts.tolist(),
        "neg_counts": osf.neg_counts.tolist(),
        "chosen": osf.chosen.tolist(),
    }


def _osf_from_dict(d: dict) -> OsfClassifier:
    osf = OsfClassifier(
        d["n_selectors"], d["n_candidates"], d["bits"], d["epsilon"], d["th_fern"], d["rng_seed"], d["patch_size"]
    )
    pairs = np.asarray(d["pairs"], dtype=osf.pairs.dtype)
    pos = np.asarray(d["pos_counts"], dtype=np.int64)
    neg = np.asarray(d["neg_counts"], dtype=np.int64)
    if pairs.shape != osf.pairs.shape or pos.shape != osf.pos_counts.shape or neg.shape != pos.shape:
        raise ModelFormatError("fern arrays do not match the declared fern layout")
    osf.pairs, osf.pos_counts, osf.neg_counts = pairs, pos, neg
    osf.chosen = np.asarray(d["chosen"], dtype=np.intp)
    osf._tables = None
    return osf


def _state_to_dict(state: LearnerState | None) -> dict | None:
    if state is None:
        return None
    return {
        "t": state.t,
        "theta_history": list(state.theta_history),
        "zeta_last": state.zeta_last,
        "samples_learned": list(state.samples_learned),
        "frames_seen": state.frames_seen,
        "last_frame": state.last_frame,
        "converged": state.converged,
        "progress": state.progress,
    }


def _state_from_dict(d: dict | None) -> LearnerState | None:
    if d is None:
        return None
    return LearnerState(
        t=d["t"],
        theta_history=list(d["theta_history"]),
        zeta_last=d["zeta_last"],
        samples_learned=tuple(d["samples_learned"]),
        frames_seen=d["frames_seen"],
        last_frame=d["last_frame"],
        converged=d["converged"],
        progress=list(d["progress"]),
    )


def model_to_dict(model: GdmModel, config: RunConfig, state: LearnerState | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": config.to_dict(),
        "osf": _osf_to_dict(model.osf),
        "svm": {
            "weights": [float(w) for w in model.svm.weights],
            "bias": float(model.svm.bias),
            "c_reg": float(model.svm.c_reg),
        },
        "boundary": {"beta": model.boundary.beta, "theta": model.boundary.theta},
        "seeds": [list(map(float, s)) for s in model.seeds],
        "seed_frame": model.seed_frame,
        "fern_blur": model.fern_blur,
        "learner": _state_to_dict(state),
    }


def model_from_dict(d: dict, config: RunConfig | None = None):
    """Rebuild ``(model, config, state)``.

    ``config`` replaces the stored snapshot; its HOG settings must agree with
    the stored SVM dimension, otherwise ``ValueError`` is raised.
    """
    if d.get("format") != FORMAT:
        raise ModelFormatError("not a model file")
    if d.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
    try:
        config = RunConfig.from_dict(d["config"]) if config is None else config
        svm = LinearSvmModel(np.asarray(d["svm"]["weights"], dtype=np.float64), d["svm"]["bias"], d["svm"]["c_reg"])
        model = GdmModel(
            osf=_osf_from_dict(d["osf"]),
            svm=svm,
            boundary=DualBoundary(**d["boundary"]),
            hog_params=config.hog(),
            seeds=[BoundingBox(*s) for s in d["seeds"]],
            seed_frame=d["seed_frame"],
            fern_blur=d["fern_blur"],
        )
        state = _state_from_dict(d["learner"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    return model, config, state


def dumps(model: GdmModel, config: RunConfig, state: LearnerState | None = None) -> str:
    return json.dumps(model_to_dict(model, config, state), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(path, model: GdmModel, config: RunConfig, state: LearnerState | None = None) -> None:
    Path(path).write_text(dumps(model, config, state))


def load_model(path, config: RunConfig | None = None):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(data, config)
