"""Random ferns over two-pixel comparisons, and the online selector ensemble.

A fern is ``s`` ordered pixel pairs; bit j of its code is set when the
first pixel of pair j is strictly brighter than the second.  Each fern keeps
integer per-class code histograms.  A selector holds M candidate ferns and
exposes the one whose class histograms overlap least (smallest
Bhattacharyya coefficient); the strong score averages the selectors' active
ferns.

``OsfClassifier`` stores every count table in one (N, M, 2**s) array so
training and scoring stay vectorised; ``selectors`` hands out views onto it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import FERN_PATCH, POSITIVE

MAX_BITS = 16


@dataclass
class Fern:
    pairs: np.ndarray  # (s, 4) int: row_a, col_a, row_b, col_b

    @property
    def bits(self) -> int:
        return len(self.pairs)


@dataclass
class FernPosterior:
    pos_counts: np.ndarray
    neg_counts: np.ndarray
    epsilon: float = 0.01

    @classmethod
    def empty(cls, bits: int, epsilon: float = 0.01) -> "FernPosterior":
        n = 1 << bits
        return cls(np.zeros(n, np.int64), np.zeros(n, np.int64), epsilon)

    def probabilities(self) -> tuple[np.ndarray, np.ndarray]:
        """Class-conditional code distributions; an empty class is all zeros."""
        return _normalise(self.pos_counts), _normalise(self.neg_counts)


@dataclass
class Selector:
    ferns: list[Fern]
    posteriors: list[FernPosterior]
    chosen: int = 0


def _normalise(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1, keepdims=True)
    return np.divide(counts, total, out=np.zeros_like(counts), where=total > 0)


def sample_lbf(patch_size: int, bits: int, rng: np.random.Generator) -> Fern:
    """Draw ``bits`` distinct pixel pairs (a != b) uniformly over the patch."""
    if bits < 1:
        raise ValueError("a fern needs at least one bit")
    if bits > MAX_BITS:
        raise ValueError(f"at most {MAX_BITS} bits per fern (code table is 2**bits)")
    n_pix = patch_size * patch_size
    if bits > n_pix * (n_pix - 1):
        raise ValueError("patch too small for that many distinct pairs")
    seen: set[tuple[int, int]] = set()
    pairs = []
    while len(pairs) < bits:
        a, b = (int(v) for v in rng.integers(0, n_pix, size=2))
        if a == b or (a, b) in seen:
            continue
        seen.add((a, b))
        pairs.append((a // patch_size, a % patch_size, b // patch_size, b % patch_size))
    return Fern(np.array(pairs, dtype=np.intp))


def fern_code(patch: np.ndarray, fern: Fern) -> int:
    p = np.asarray(patch)
    bits = p[fern.pairs[:, 0], fern.pairs[:, 1]] > p[fern.pairs[:, 2], fern.pairs[:, 3]]
    return int(np.dot(bits, 1 << np.arange(fern.bits)))


def fern_codes(patches: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Codes for a batch of patches under many ferns at once.

    ``patches`` is (n, H, W); ``pairs`` is (..., s, 4).  Returns (n, ...) ints.
    """
    patches = np.asarray(patches)
    a = patches[:, pairs[..., 0], pairs[..., 1]]
    b = patches[:, pairs[..., 2], pairs[..., 3]]
    weights = 1 << np.arange(pairs.shape[-2])
    return ((a > b) * weights).sum(axis=-1)


def update_posterior(post: FernPosterior, code: int, label: int) -> FernPosterior:
    if not 0 <= code < len(post.pos_counts):
        raise ValueError(f"code {code} out of range for {len(post.pos_counts)} bins")
    if label == POSITIVE:
        post.pos_counts[code] += 1
    else:
        post.neg_counts[code] += 1
    return post


def confidence_table(post: FernPosterior) -> np.ndarray:
    """Weak confidence for every code, with symmetric epsilon smoothing."""
    p_pos, p_neg = post.probabilities()
    return (p_pos + post.epsilon) / (p_pos + p_neg + 2 * post.epsilon)


def weak_confidence(post: FernPosterior, code) -> float | np.ndarray:
    return confidence_table(post)[code]


def bhattacharyya(post: FernPosterior) -> float:
    p_pos, p_neg = post.probabilities()
    return float(2.0 * np.sqrt(p_pos * p_neg).sum())


def select_best(sel: Selector) -> int:
    # np.argmin returns the first minimum, which is the tie rule we want
    values = [bhattacharyya(p) for p in sel.posteriors]
    sel.chosen = int(np.argmin(values))
    return sel.chosen


class OsfClassifier:
    """Online selector-fern ensemble.

    Parameters
    ----------
    n_selectors : int
        Number of selectors averaged into the strong score (N).
    n_candidates : int
        Candidate ferns per selector (M).
    bits : int
        Pixel comparisons per fern (s).
    epsilon : float
        Smoothing in the weak confidence.
    th_fern : float
        Threshold for the binary decision; the raw score is what the dual
        boundary partitions.
    """

    def __init__(
        self,
        n_selectors: int = 10,
        n_candidates: int = 10,
        bits: int = 6,
        epsilon: float = 0.01,
        th_fern: float = 0.5,
        rng_seed: int = 0,
        patch_size: int = FERN_PATCH,
    ):
        if n_selectors < 1 or n_candidates < 1:
            raise ValueError("need at least one selector and one candidate")
        if not 0.0 < th_fern < 1.0:
            raise ValueError("th_fern must lie in (0, 1)")
        self.n_selectors = n_selectors
        self.n_candidates = n_candidates
        self.bits = bits
        self.epsilon = epsilon
        self.th_fern = th_fern
        self.rng_seed = rng_seed
        self.patch_size = patch_size

        rng = np.random.default_rng(rng_seed)
        self.pairs = np.stack(
            [
                np.stack([sample_lbf(patch_size, bits, rng).pairs for _ in range(n_candidates)])
                for _ in range(n_selectors)
            ]
        )  # (N, M, s, 4)
        shape = (n_selectors, n_candidates, 1 << bits)
        self.pos_counts = np.zeros(shape, np.int64)
        self.neg_counts = np.zeros(shape, np.int64)
        self.chosen = np.zeros(n_selectors, np.intp)
        self._tables = None

    @property
    def selectors(self) -> list[Selector]:
        """Per-selector objects whose count arrays are views into this model."""
        out = []
        for n in range(self.n_selectors):
            ferns = [Fern(self.pairs[n, m]) for m in range(self.n_candidates)]
            posts = [
                FernPosterior(self.pos_counts[n, m], self.neg_counts[n, m], self.epsilon)
                for m in range(self.n_candidates)
            ]
            out.append(Selector(ferns, posts, int(self.chosen[n])))
        return out

    def bhattacharyya_values(self) -> np.ndarray:
        p_pos, p_neg = _normalise(self.pos_counts), _normalise(self.neg_counts)
        return 2.0 * np.sqrt(p_pos * p_neg).sum(axis=-1)

    def reselect(self) -> None:
        self.chosen = np.argmin(self.bhattacharyya_values(), axis=1)
        self._tables = None

    def active_pairs(self) -> np.ndarray:
        """(N, s, 4) pixel pairs of the chosen fern in every selector."""
        return self.pairs[np.arange(self.n_selectors), self.chosen]

    def active_tables(self) -> np.ndarray:
        """(N, 2**s) weak confidence lookup for the chosen ferns."""
        if self._tables is None:
            idx = np.arange(self.n_selectors), self.chosen
            p_pos = _normalise(self.pos_counts[idx])
            p_neg = _normalise(self.neg_counts[idx])
            eps = self.epsilon
            self._tables = (p_pos + eps) / (p_pos + p_neg + 2 * eps)
        return self._tables

    def scores(self, patches: np.ndarray) -> np.ndarray:
        patches = np.asarray(patches)
        if patches.ndim == 2:
            patches = patches[None]
        codes = fern_codes(patches, self.active_pairs())  # (n, N)
        tables = self.active_tables()
        return tables[np.arange(self.n_selectors), codes].mean(axis=1)

    def score(self, patch: np.ndarray) -> float:
        return float(self.scores(patch)[0])

    def decide(self, patch: np.ndarray) -> int:
        """Binary decision, sign(score - th_fern); a tie counts as negative."""
        return 1 if self.score(patch) > self.th_fern else -1

    def train(self, patches: np.ndarray, labels) -> None:
        """Add every patch to every candidate histogram, then reselect."""
        patches = np.asarray(patches)
        labels = np.asarray(labels)
        if len(patches) == 0:
            return
        codes = fern_codes(patches, self.pairs)  # (n, N, M)
        n_bins = 1 << self.bits
        flat = (np.arange(self.n_selectors * self.n_candidates) * n_bins).reshape(
            self.n_selectors, self.n_candidates
        )
        size = self.pos_counts.size
        for counts, mask in ((self.pos_counts, labels == POSITIVE), (self.neg_counts, labels != POSITIVE)):
            if mask.any():
                idx = (codes[mask] + flat).ravel()
                counts += np.bincount(idx, minlength=size).reshape(counts.shape)
        self.reselect()

    def train_samples(self, samples) -> None:
        if not samples:
            return
        self.train(np.stack([s.patch for s in samples]), [s.label for s in samples])


def osf_score(osf: OsfClassifier, patch: np.ndarray) -> float:
    return osf.score(patch)


def osf_train_online(osf: OsfClassifier, samples) -> OsfClassifier:
    osf.train_samples(samples)
    return osf
