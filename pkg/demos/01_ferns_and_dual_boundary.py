"""Ferns, the dual boundary and the hard band.

Trains the online selector-fern ensemble on warped views of one object
from a synthetic frame, then shows how the dual boundary splits window
scores into Positive, Negative and Hard regions as theta narrows.

Run:  python demos/01_ferns_and_dual_boundary.py
"""

import numpy as np

from gdmdetect.config import RunConfig
from gdmdetect.gdm import DualBoundary, initialize, partition_scores
from gdmdetect.scan import seed_scale_set, scan_scores, window_grid
from gdmdetect.synthscene import SceneConfig, generate_sequence

frames, gt = generate_sequence(SceneConfig(n_frames=5))
config = RunConfig()
model, samples = initialize(frames[0], gt[0], config)
n_pos = sum(s.label > 0 for s in samples)
print(f"initial set from {len(gt[0])} seed boxes: {n_pos} positive and {len(samples) - n_pos} negative samples")

# Score every window of a later frame with the ferns alone.
frame = model.fern_view(frames[4])
scores = []
for w, h in seed_scale_set(model.seeds, config.n_scales, config.scale_ratio):
    grid = window_grid(frame.width, frame.height, w, h, config.stride_frac)
    if grid is not None:
        scores.append(scan_scores(model.osf, frame, grid).ravel())
scores = np.concatenate(scores)
print(f"{len(scores)} windows, fern scores from {scores.min():.3f} to {scores.max():.3f}")

# The band shrinks around beta = 0.5; only Hard windows would reach the SVM.
print("\n theta   positive  negative      hard")
for theta in (1.0, 0.8, 0.6, 0.4, 0.3, 0.1):
    regions = partition_scores(scores, DualBoundary(0.5, theta))
    counts = [(regions == code).sum() for code in (1, -1, 0)]
    print(f" {theta:4.1f}  {counts[0]:9d} {counts[1]:9d} {counts[2]:9d}")
