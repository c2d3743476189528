"""Frame loading, patch resampling, affine warps and the seed training set."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from gdmdetect.imaging import (
    NEGATIVE,
    POSITIVE,
    AffineParams,
    BoundingBox,
    Frame,
    box_iou,
    extract_patch,
    extract_patches,
    generate_initial_samples,
    load_frame,
    rgb_to_gray,
    smooth_frame,
    warp_affine,
)


def bilinear_oracle(pixels, box, target):
    """Independent float64 evaluation of the pixel-centre bilinear rule."""
    h, w = pixels.shape
    x, y, bw, bh = box
    out = np.zeros((target, target))
    for r in range(target):
        for c in range(target):
            sy = min(max(y + (r + 0.5) * bh / target - 0.5, 0), h - 1)
            sx = min(max(x + (c + 0.5) * bw / target - 0.5, 0), w - 1)
            y0, x0 = int(math.floor(sy)), int(math.floor(sx))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = sy - y0, sx - x0
            top = pixels[y0, x0] * (1 - fx) + pixels[y0, x1] * fx
            bottom = pixels[y1, x0] * (1 - fx) + pixels[y1, x1] * fx
            out[r, c] = math.floor(top * (1 - fy) + bottom * fy + 0.5)
    return out.astype(np.uint8)


class TestLoadFrame:
    def test_pgm_identity(self, tmp_path):
        path = tmp_path / "f.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        frame = load_frame(path, 3)
        assert (frame.width, frame.height, frame.index) == (2, 2, 3)
        assert frame.pixels.ravel().tolist() == [0, 255, 128, 64]

    def test_white_png(self, tmp_path):
        path = tmp_path / "white.png"
        Image.fromarray(np.full((10, 10), 255, np.uint8)).save(path)
        assert (load_frame(path).pixels == 255).all()

    def test_rgb_luma(self, tmp_path):
        path = tmp_path / "red.png"
        Image.fromarray(np.array([[[255, 0, 0]]], np.uint8)).save(path)
        assert load_frame(path).pixels[0, 0] == 76
        assert rgb_to_gray(np.array([0, 255, 0])) == 150  # 149.685
        assert rgb_to_gray(np.array([0, 0, 255])) == 29  # 29.07

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_frame(tmp_path / "nope.png")

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"not an image at all")
        with pytest.raises(ValueError):
            load_frame(path)

    def test_sixteen_bit_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.fromarray(np.full((4, 4), 1000, np.uint16)).save(path)
        with pytest.raises(ValueError):
            load_frame(path)

    def test_frame_rejects_empty(self):
        with pytest.raises(ValueError):
            Frame(np.zeros((0, 5), np.uint8))


class TestExtractPatch:
    def test_identity_copy(self):
        rng = np.random.default_rng(1)
        frame = Frame(rng.integers(0, 256, (32, 32), dtype=np.uint8))
        patch = extract_patch(frame, BoundingBox(0, 0, 32, 32), 32)
        np.testing.assert_array_equal(patch, frame.pixels)

    @pytest.mark.parametrize("target", [4, 32, 64])
    def test_constant_region(self, target):
        frame = Frame(np.full((40, 50), 93, np.uint8))
        assert (extract_patch(frame, BoundingBox(3.5, 2.25, 17, 30), target) == 93).all()

    def test_checkerboard_matches_oracle(self):
        pixels = np.array([[0, 255], [255, 0]], np.uint8)
        patch = extract_patch(Frame(pixels), BoundingBox(0, 0, 2, 2), 4)
        np.testing.assert_array_equal(patch, bilinear_oracle(pixels.astype(float), (0, 0, 2, 2), 4))
        # centre samples sit a quarter pixel from each source centre
        assert sorted(patch[1:3, 1:3].ravel().tolist()) == [96, 96, 159, 159]
        # mirror symmetry of the checkerboard carries over exactly
        np.testing.assert_array_equal(patch.astype(int) + patch[:, ::-1], 255)

    def test_random_boxes_match_oracle(self):
        rng = np.random.default_rng(7)
        pixels = rng.integers(0, 256, (30, 40)).astype(np.uint8)
        frame = Frame(pixels)
        for _ in range(20):
            w, h = rng.uniform(3, 25), rng.uniform(3, 20)
            box = (rng.uniform(0, 40 - w), rng.uniform(0, 30 - h), w, h)
            got = extract_patch(frame, BoundingBox(*box), 9)
            want = bilinear_oracle(pixels.astype(float), box, 9)
            assert np.abs(got.astype(int) - want).max() <= 1  # float32 vs float64 at .5 ties
            assert (got == want).mean() > 0.95

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        frame = Frame(rng.integers(0, 256, (32, 32), dtype=np.uint8))
        once = extract_patch(frame, BoundingBox(0, 0, 32, 32))
        twice = extract_patch(Frame(once), BoundingBox(0, 0, 32, 32))
        np.testing.assert_array_equal(once, twice)

    def test_box_clipped_to_frame(self):
        frame = Frame(np.arange(100, dtype=np.uint8).reshape(10, 10))
        np.testing.assert_array_equal(
            extract_patch(frame, BoundingBox(-5, -5, 15, 15), 10), extract_patch(frame, BoundingBox(0, 0, 10, 10), 10)
        )

    def test_outside_frame(self):
        with pytest.raises(ValueError):
            extract_patch(Frame(np.zeros((10, 10), np.uint8)), BoundingBox(20, 20, 5, 5))

    def test_batch_equals_single(self):
        rng = np.random.default_rng(3)
        frame = Frame(rng.integers(0, 256, (48, 64), dtype=np.uint8))
        boxes = [BoundingBox(1.5, 2, 20, 30), BoundingBox(10, 4.25, 33, 40), BoundingBox(0, 0, 64, 48)]
        batch = extract_patches(frame, boxes, 32)
        for box, patch in zip(boxes, batch):
            np.testing.assert_array_equal(patch, extract_patch(frame, box, 32))

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        x=st.floats(-10, 30),
        y=st.floats(-10, 30),
        w=st.floats(1, 40),
        h=st.floats(1, 40),
        target=st.sampled_from([8, 32, 64]),
    )
    def test_output_in_range(self, seed, x, y, w, h, target):
        frame = Frame(np.random.default_rng(seed).integers(0, 256, (32, 32), dtype=np.uint8))
        box = BoundingBox(x, y, w, h)
        if box.clip(32, 32) is None:
            return
        patch = extract_patch(frame, box, target)
        assert patch.shape == (target, target) and patch.dtype == np.uint8
        assert patch.min() >= frame.pixels.min() and patch.max() <= frame.pixels.max()


class TestWarpAffine:
    def test_identity_equals_extract(self):
        rng = np.random.default_rng(4)
        frame = Frame(rng.integers(0, 256, (60, 80), dtype=np.uint8))
        for box in (BoundingBox(5, 7, 30, 40), BoundingBox(0.5, 3.25, 17.5, 22)):
            for target in (32, 64):
                np.testing.assert_array_equal(
                    warp_affine(frame, box, AffineParams.identity(), target), extract_patch(frame, box, target)
                )

    def test_half_turn_on_symmetric_patch(self):
        rng = np.random.default_rng(5)
        quarter = rng.integers(0, 256, (8, 8))
        top = np.hstack([quarter, quarter[::-1, ::-1]])
        sym = np.vstack([top, top[::-1, ::-1]]).astype(np.uint8)  # invariant under 180 degree rotation
        np.testing.assert_array_equal(sym, sym[::-1, ::-1])
        frame = Frame(sym)
        box = BoundingBox(0, 0, 16, 16)
        rotated = warp_affine(frame, box, AffineParams(rotation=math.pi), 16)
        np.testing.assert_array_equal(rotated, extract_patch(frame, box, 16))

    def test_scaled_constant(self):
        frame = Frame(np.full((50, 50), 201, np.uint8))
        patch = warp_affine(frame, BoundingBox(10, 10, 20, 20), AffineParams(scale=1.1), 32)
        assert (patch == 201).all()

    def test_degenerate(self):
        frame = Frame(np.zeros((20, 20), np.uint8))
        with pytest.raises(ValueError):
            warp_affine(frame, BoundingBox(0, 0, 10, 10), AffineParams(scale=1e-4))

    def test_random_params_in_range(self):
        rng = np.random.default_rng(6)
        box = BoundingBox(0, 0, 40, 20)
        for _ in range(200):
            p = AffineParams.random(rng, box)
            assert 0.9 <= p.scale <= 1.1 and -0.1 <= p.rotation <= 0.1 and -0.05 <= p.shear <= 0.05
            assert abs(p.dx) <= 0.05 * box.w and abs(p.dy) <= 0.05 * box.h


class TestInitialSamples:
    @pytest.fixture
    def frame(self):
        return Frame(np.random.default_rng(8).integers(0, 256, (120, 160), dtype=np.uint8))

    def test_three_seeds(self, frame):
        seeds = [BoundingBox(5, 5, 20, 30), BoundingBox(60, 40, 20, 30), BoundingBox(120, 80, 20, 30)]
        samples = generate_initial_samples(frame, seeds, warps_per_seed=50)
        labels = [s.label for s in samples]
        assert labels.count(POSITIVE) == 153
        assert labels.count(NEGATIVE) == 306

    def test_bare_seed(self, frame):
        samples = generate_initial_samples(frame, [BoundingBox(10, 10, 20, 20)], warps_per_seed=0)
        assert [s.label for s in samples] == [POSITIVE, NEGATIVE, NEGATIVE]
        np.testing.assert_array_equal(samples[0].patch, extract_patch(frame, BoundingBox(10, 10, 20, 20)))

    def test_deterministic(self, frame):
        seeds = [BoundingBox(30, 30, 24, 36)]
        a = generate_initial_samples(frame, seeds, 10, rng_seed=3)
        b = generate_initial_samples(frame, seeds, 10, rng_seed=3)
        c = generate_initial_samples(frame, seeds, 10, rng_seed=4)
        assert all(x.patch.tobytes() == y.patch.tobytes() and x.label == y.label for x, y in zip(a, b))
        assert all(x.hog_patch.tobytes() == y.hog_patch.tobytes() for x, y in zip(a, b))
        assert any(x.patch.tobytes() != y.patch.tobytes() for x, y in zip(a, c))

    def test_negatives_avoid_seeds(self, frame):
        seeds = [BoundingBox(20, 20, 30, 40), BoundingBox(90, 50, 30, 40)]
        samples = generate_initial_samples(frame, seeds, 20, rng_seed=11)
        negatives = [s for s in samples if s.label == NEGATIVE]
        assert len(negatives) == 2 * 42
        for s in negatives:
            assert all(box_iou(s.box, seed) < 0.2 for seed in seeds)
            assert s.box.clip(frame.width, frame.height) == s.box

    def test_patch_shapes(self, frame):
        samples = generate_initial_samples(frame, [BoundingBox(30, 30, 24, 36)], 3)
        assert all(s.patch.shape == (32, 32) and s.hog_patch.shape == (64, 64) for s in samples)

    def test_fern_view_used_for_fern_patches(self, frame):
        seeds = [BoundingBox(30, 30, 24, 36)]
        smooth = smooth_frame(frame, 1.5)
        samples = generate_initial_samples(frame, seeds, 2, fern_frame=smooth)
        plain = generate_initial_samples(frame, seeds, 2)
        np.testing.assert_array_equal(samples[0].patch, extract_patch(smooth, seeds[0]))
        for a, b in zip(samples, plain):
            np.testing.assert_array_equal(a.hog_patch, b.hog_patch)

    def test_no_room_for_negatives(self):
        frame = Frame(np.zeros((20, 20), np.uint8))
        with pytest.raises(ValueError):
            generate_initial_samples(frame, [BoundingBox(0, 0, 20, 20)], 0)

    def test_no_seeds(self, frame):
        with pytest.raises(ValueError):
            generate_initial_samples(frame, [], 5)


class TestSmoothing:
    def test_zero_sigma_is_identity(self):
        frame = Frame(np.random.default_rng(0).integers(0, 256, (10, 12), dtype=np.uint8))
        assert smooth_frame(frame, 0) is frame

    def test_constant_unchanged(self):
        frame = Frame(np.full((15, 15), 77, np.uint8), 4)
        out = smooth_frame(frame, 2.0)
        assert out.index == 4 and (out.pixels == 77).all()


class TestBoxIou:
    def test_examples(self):
        assert box_iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
        assert box_iou((0, 0, 10, 10), (20, 0, 10, 10)) == 0.0
        assert box_iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3)
