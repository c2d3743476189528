"""The whole loop on a small synthetic scene.

Initialise from the seed boxes in frame 0, let the learner narrow the
hard band over the following frames, then detect on held-out frames and
score the detections against ground truth.

Run:  python demos/03_learn_detect_evaluate.py
"""

import time

from gdmdetect.config import RunConfig
from gdmdetect.detect import detect_frame, seed_scale_set
from gdmdetect.evaluate import evaluate
from gdmdetect.gdm import Learner, initialize
from gdmdetect.synthscene import SceneConfig, generate_sequence

scene = SceneConfig(width=240, height=180, n_frames=80, object_size=(28, 42), rng_seed=1)
frames, gt = generate_sequence(scene)
config = RunConfig().override(warps_per_seed=200, n_scales=5)

model, samples = initialize(frames[0], gt[0], config)
learner = Learner(model, samples, config)


def report(_learner, row):
    print(f"  pass {row['t']}: {row['n_hard']} hard windows (+{row['n_pos_pseudo']}/-{row['n_neg_pseudo']}), "
          f"zeta {row['zeta']:+.3f} -> theta {row['theta']:.3f}")


print("learning on frames 1..59")
state = learner.run(frames[1:60], report)
print(f"stopped after {state.frames_seen} frames, converged: {state.converged}")

scales = seed_scale_set(model.seeds, config.n_scales, config.scale_ratio)
detections = {}
start = time.perf_counter()
for frame in frames[60:]:
    dets, _ = detect_frame(model, frame, scales, config.stride_frac, config.nms_iou)
    detections[frame.index] = [(d.box, d.score) for d in dets]
elapsed = time.perf_counter() - start
held_out = [f.index for f in frames[60:]]
metrics = evaluate(detections, gt, 0.5, held_out)
print(f"detection on {len(held_out)} frames took {elapsed / len(held_out):.2f}s per frame")
print(metrics.summary())
