"""Fern codes, posterior histograms, selectors and the OSF ensemble."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdmdetect.fern import (
    Fern,
    FernPosterior,
    OsfClassifier,
    Selector,
    bhattacharyya,
    confidence_table,
    fern_code,
    fern_codes,
    osf_score,
    osf_train_online,
    sample_lbf,
    select_best,
    update_posterior,
    weak_confidence,
)
from gdmdetect.imaging import NEGATIVE, POSITIVE, Sample


def posterior_from_probs(p_pos, p_neg, scale=1000, epsilon=0.01):
    return FernPosterior(
        np.round(np.asarray(p_pos) * scale).astype(np.int64),
        np.round(np.asarray(p_neg) * scale).astype(np.int64),
        epsilon,
    )


class TestSampleLbf:
    def test_six_bits(self):
        fern = sample_lbf(32, 6, np.random.default_rng(0))
        assert fern.bits == 6 and fern.pairs.shape == (6, 4)
        assert fern.pairs.min() >= 0 and fern.pairs.max() < 32

    def test_deterministic(self):
        a = sample_lbf(32, 6, np.random.default_rng(9))
        b = sample_lbf(32, 6, np.random.default_rng(9))
        np.testing.assert_array_equal(a.pairs, b.pairs)

    def test_pairs_distinct_points(self):
        for seed in range(50):
            fern = sample_lbf(32, 1 + seed % 16, np.random.default_rng(seed))
            a, b = fern.pairs[:, :2], fern.pairs[:, 2:]
            assert (a != b).any(axis=1).all()
            assert len({tuple(p) for p in fern.pairs}) == fern.bits

    def test_too_many_bits(self):
        with pytest.raises(ValueError):
            sample_lbf(32, 17, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sample_lbf(32, 0, np.random.default_rng(0))


class TestFernCode:
    def test_constant_patch(self):
        fern = sample_lbf(32, 6, np.random.default_rng(1))
        assert fern_code(np.full((32, 32), 50, np.uint8), fern) == 0

    def test_bit_order(self):
        patch = np.zeros((32, 32), np.uint8)
        patch[0, 0] = 10
        fern = Fern(np.array([[0, 0, 0, 1], [0, 1, 0, 0]]))  # first pair true, second false
        assert fern_code(patch, fern) == 1

    def test_all_ones(self):
        rng = np.random.default_rng(2)
        pairs = np.array([[r, 0, r, 1] for r in range(6)])
        patch = rng.integers(0, 256, (32, 32)).astype(np.uint8)
        patch[:6, 0] = 200
        patch[:6, 1] = 100
        assert fern_code(patch, Fern(pairs)) == 63

    def test_batch_agrees(self):
        rng = np.random.default_rng(3)
        ferns = [sample_lbf(32, 6, rng) for _ in range(4)]
        patches = rng.integers(0, 256, (20, 32, 32)).astype(np.uint8)
        codes = fern_codes(patches, np.stack([f.pairs for f in ferns]))
        for i, patch in enumerate(patches):
            assert codes[i].tolist() == [fern_code(patch, f) for f in ferns]
        assert codes.min() >= 0 and codes.max() < 64


class TestPosterior:
    def test_single_update(self):
        post = update_posterior(FernPosterior.empty(6), 5, POSITIVE)
        assert post.pos_counts[5] == 1 and post.pos_counts.sum() == 1 and post.neg_counts.sum() == 0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            update_posterior(FernPosterior.empty(3), 8, POSITIVE)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 15), st.sampled_from([POSITIVE, NEGATIVE])), max_size=60))
    def test_incremental_equals_recount(self, updates):
        post = FernPosterior.empty(4)
        for code, label in updates:
            before_pos, before_neg = post.pos_counts.copy(), post.neg_counts.copy()
            update_posterior(post, code, label)
            changed = (post.pos_counts != before_pos) | (post.neg_counts != before_neg)
            assert np.flatnonzero(changed).tolist() == [code]
        pos = np.bincount([c for c, l in updates if l == POSITIVE], minlength=16)
        neg = np.bincount([c for c, l in updates if l == NEGATIVE], minlength=16)
        np.testing.assert_array_equal(post.pos_counts, pos)
        np.testing.assert_array_equal(post.neg_counts, neg)


class TestWeakConfidence:
    def test_unseen_code(self):
        assert weak_confidence(FernPosterior.empty(6), 17) == 0.5
        post = update_posterior(FernPosterior.empty(6), 3, POSITIVE)
        update_posterior(post, 4, NEGATIVE)
        assert weak_confidence(post, 17) == 0.5

    def test_formula(self):
        post = posterior_from_probs([0.3, 0.7, 0.0, 0.0], [0.1, 0.0, 0.9, 0.0])
        assert weak_confidence(post, 0) == pytest.approx(0.31 / 0.42, abs=1e-12)
        assert weak_confidence(post, 0) == pytest.approx(0.7381, abs=1e-4)

    def test_symmetric(self):
        post = posterior_from_probs([0.25, 0.75], [0.25, 0.75])
        np.testing.assert_allclose(confidence_table(post), 0.5, atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=8, max_size=8), st.lists(st.integers(0, 20), min_size=8, max_size=8))
    def test_bounded(self, pos, neg):
        table = confidence_table(FernPosterior(np.array(pos), np.array(neg)))
        assert ((table > 0) & (table < 1)).all()


class TestBhattacharyya:
    def test_identical(self):
        post = posterior_from_probs([0.1, 0.2, 0.7], [0.1, 0.2, 0.7])
        assert bhattacharyya(post) == pytest.approx(2.0)

    def test_disjoint(self):
        assert bhattacharyya(posterior_from_probs([0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5])) == 0.0

    def test_hand_sum(self):
        assert bhattacharyya(posterior_from_probs([0.25] * 4, [1, 0, 0, 0])) == pytest.approx(1.0)

    def test_empty_class(self):
        assert bhattacharyya(posterior_from_probs([0.5, 0.5], [0, 0])) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 30), min_size=16, max_size=16), st.lists(st.integers(0, 30), min_size=16, max_size=16))
    def test_range(self, pos, neg):
        assert 0.0 <= bhattacharyya(FernPosterior(np.array(pos), np.array(neg))) <= 2.0 + 1e-12


def selector_with_values(values):
    """A selector whose candidates have the given Bhattacharyya coefficients.

    Two bins; P+ = (1, 0) and P- = (1 - q, q) gives B = 2 sqrt(1 - q).
    """
    posts = []
    for b in values:
        q = 1 - (b / 2) ** 2
        neg = np.array([round((1 - q) * 10**6), round(q * 10**6)])
        posts.append(FernPosterior(np.array([1, 0]), neg))
    ferns = [Fern(np.array([[0, 0, 0, 1]])) for _ in values]
    return Selector(ferns, posts)


class TestSelectBest:
    def test_argmin(self):
        assert select_best(selector_with_values([1.2, 0.4])) == 1

    def test_tie_lowest_index(self):
        sel = selector_with_values([0.7, 0.7, 0.7])
        assert select_best(sel) == 0 and sel.chosen == 0

    def test_duplicate_non_minimal(self):
        values = [1.1, 0.3, 1.5]
        assert select_best(selector_with_values(values)) == select_best(selector_with_values(values + [1.5]))


class TestOsf:
    def test_untrained(self):
        osf = OsfClassifier(rng_seed=1)
        patches = np.random.default_rng(0).integers(0, 256, (10, 32, 32)).astype(np.uint8)
        assert (osf.scores(patches) == 0.5).all()
        assert osf_score(osf, patches[0]) == 0.5
        assert osf.decide(patches[0]) == -1

    def test_hand_average(self):
        osf = OsfClassifier(n_selectors=2, n_candidates=1, bits=1)
        osf.pairs[:, 0, 0] = [0, 0, 0, 1]  # both ferns compare pixel (0,0) with (0,1)
        osf._tables = np.array([[0.8, 0.8], [0.6, 0.6]])
        assert osf.score(np.zeros((32, 32), np.uint8)) == pytest.approx(0.7)

    def test_score_bounded_by_max_confidence(self):
        rng = np.random.default_rng(4)
        osf = OsfClassifier(rng_seed=2)
        patch = rng.integers(0, 256, (32, 32)).astype(np.uint8)
        osf.train(np.repeat(patch[None], 30, axis=0), [POSITIVE] * 30)
        score = osf.score(patch)
        assert 0.5 < score <= osf.active_tables().max() < 1.0

    def test_training_raises_own_score(self):
        rng = np.random.default_rng(5)
        osf = OsfClassifier(rng_seed=3)
        negatives = rng.integers(0, 256, (20, 32, 32)).astype(np.uint8)
        osf.train(negatives, [NEGATIVE] * 20)
        patch = rng.integers(0, 256, (32, 32)).astype(np.uint8)
        before = osf.score(patch)
        osf_train_online(osf, [Sample(patch, POSITIVE)])
        assert osf.score(patch) > before

    def test_single_positive_from_untrained(self):
        patch = np.random.default_rng(6).integers(0, 256, (32, 32)).astype(np.uint8)
        osf = OsfClassifier(rng_seed=4)
        osf.train(patch[None], [POSITIVE])
        assert osf.score(patch) > 0.5

    def test_balanced_identical(self):
        patch = np.random.default_rng(7).integers(0, 256, (32, 32)).astype(np.uint8)
        osf = OsfClassifier(rng_seed=5)
        osf.train(np.stack([patch, patch]), [POSITIVE, NEGATIVE])
        assert osf.score(patch) == pytest.approx(0.5, abs=1e-15)

    def test_order_invariant(self):
        rng = np.random.default_rng(8)
        patches = rng.integers(0, 256, (40, 32, 32)).astype(np.uint8)
        labels = rng.choice([POSITIVE, NEGATIVE], 40)
        a, b = OsfClassifier(rng_seed=6), OsfClassifier(rng_seed=6)
        a.train(patches, labels)
        order = rng.permutation(40)
        for i in order:
            b.train(patches[i : i + 1], labels[i : i + 1])
        np.testing.assert_array_equal(a.pos_counts, b.pos_counts)
        np.testing.assert_array_equal(a.neg_counts, b.neg_counts)
        np.testing.assert_array_equal(a.chosen, b.chosen)

    def test_train_matches_per_fern_updates(self):
        rng = np.random.default_rng(9)
        osf = OsfClassifier(n_selectors=3, n_candidates=4, bits=5, rng_seed=7)
        patches = rng.integers(0, 256, (25, 32, 32)).astype(np.uint8)
        labels = rng.choice([POSITIVE, NEGATIVE], 25)
        osf.train(patches, labels)
        for n, sel in enumerate(osf.selectors):
            for fern, post in zip(sel.ferns, sel.posteriors):
                ref = FernPosterior.empty(5)
                for patch, label in zip(patches, labels):
                    update_posterior(ref, fern_code(patch, fern), label)
                np.testing.assert_array_equal(post.pos_counts, ref.pos_counts)
                np.testing.assert_array_equal(post.neg_counts, ref.neg_counts)
            assert osf.chosen[n] == select_best(sel)

    def test_empty_training_is_noop(self):
        osf = OsfClassifier()
        osf_train_online(osf, [])
        assert osf.pos_counts.sum() == 0

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            OsfClassifier(th_fern=1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_score_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        osf = OsfClassifier(n_selectors=4, n_candidates=3, bits=4, rng_seed=seed % 100)
        patches = rng.integers(0, 256, (12, 32, 32)).astype(np.uint8)
        osf.train(patches[:8], rng.choice([POSITIVE, NEGATIVE], 8))
        scores = osf.scores(patches)
        assert ((scores >= 0) & (scores <= 1)).all()
