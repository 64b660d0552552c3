"""Plan-quality metrics: lexical overlap, embedding alignment, visual
coherence via description perplexity, and inter-annotator agreement.

All lexical metrics share one normalization (lowercase, split on
non-alphanumeric runs) and are implemented natively so they can be checked
against independent brute-force oracles.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .backends.base import Embedder, TokenScorer, VisionInterpreter
from .errors import (EmptyAfterTokenization, FewerThanTwoImages, UnevenRatings,
                     ValidationError)
from .plan_model import ImageStore, PlanBundle
from .prompting import render_template
from .textutil import ngrams, tokenize


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int) -> float:
    """Clipped n-gram overlap F1 (equal precision/recall weight)."""
    cand = ngrams(tokenize(candidate), n)
    ref = ngrams(tokenize(reference), n)
    if not cand or not ref:
        raise EmptyAfterTokenization(f"no {n}-grams after tokenization")
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    match = sum((cand_counts & ref_counts).values())
    return _f1(match / len(cand), match / len(ref))


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Two-row dynamic program.
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: str, reference: str) -> float:
    """Longest-common-subsequence F1 over token sequences."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise EmptyAfterTokenization("no tokens after tokenization")
    lcs = _lcs_length(cand, ref)
    return _f1(lcs / len(cand), lcs / len(ref))


def bertscore_f1(candidate: str, reference: str, embedder: Embedder) -> float:
    """Greedy max-cosine token matching in both directions, F1 of the means.

    No idf weighting and no baseline rescaling; range [-1, 1].
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise EmptyAfterTokenization("no tokens after tokenization")
    cache: dict[str, np.ndarray] = {}

    def vec(token: str) -> np.ndarray:
        if token not in cache:
            cache[token] = embedder.embed(token)
        return cache[token]

    cand_m = np.stack([vec(t) for t in cand])
    ref_m = np.stack([vec(t) for t in ref])
    sims = cand_m @ ref_m.T
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    return _f1(precision, recall) if precision + recall > 0 else 0.0


def clip_score(step_text: str, image_bytes: bytes, embedder: Embedder,
               rectified: bool = True) -> float:
    """100 x max(0, cosine) between the text and image embeddings."""
    if not step_text.strip():
        raise ValidationError("step text must be non-empty")
    cos = float(np.dot(embedder.embed(step_text), embedder.embed(image_bytes)))
    return 100.0 * (max(0.0, cos) if rectified else cos)


def plan_clip_score(bundle: PlanBundle, store: ImageStore, embedder: Embedder,
                    rectified: bool = True) -> float:
    """Mean step-level alignment over the whole plan."""
    scores = [clip_score(s.final_text, store.get(s.image.digest), embedder, rectified)
              for s in bundle.steps if s.image is not None]
    if not scores:
        raise ValidationError("bundle has no imaged steps")
    return float(np.mean(scores))


def describe_bundle_images(bundle: PlanBundle, store: ImageStore,
                           vision: VisionInterpreter,
                           template_dir=None) -> list[str]:
    """A fixed-prompt description per imaged step (background, objects, action)."""
    prompt = render_template("describe", {"goal": bundle.goal.goal_text},
                             template_dir)
    return [vision.interpret_image(store.get(s.image.digest), prompt, stage="describe")
            for s in bundle.steps if s.image is not None]


def visual_coherence_ppl(bundle: PlanBundle, store: ImageStore,
                         vision: VisionInterpreter, scorer: TokenScorer,
                         template_dir=None,
                         descriptions: list[str] | None = None) -> float:
    """Mean perplexity of each image description given its predecessor.

    For every step k >= 2, the description of image k is scored against the
    context "description of image k-1, then 'action: <step text>'", so lower
    values mean consecutive images plausibly continue one another. Passing
    `descriptions` skips the vision calls (used by tests and re-scoring).
    """
    imaged = [s for s in bundle.steps if s.image is not None]
    if len(imaged) < 2:
        raise FewerThanTwoImages(
            f"need >= 2 imaged steps, found {len(imaged)}")
    if descriptions is None:
        descriptions = describe_bundle_images(bundle, store, vision, template_dir)
    if len(descriptions) != len(imaged):
        raise ValidationError("one description per imaged step required")
    ppls = []
    for k in range(1, len(imaged)):
        context = f"{descriptions[k - 1]}\naction: {imaged[k].final_text}"
        logprobs = scorer.score_tokens(context, descriptions[k])
        ppls.append(math.exp(-sum(logprobs) / len(logprobs)))
    return float(np.mean(ppls))


# --- agreement ---

def fleiss_kappa(counts: list[list[int]]) -> float:
    """Fleiss kappa over an item x category count matrix.

    Every item must carry the same number of ratings r >= 2. Unanimous
    ratings give 1.0, including the degenerate single-category case.
    """
    if not counts:
        raise UnevenRatings("no items")
    matrix = np.asarray(counts, dtype=float)
    if matrix.ndim != 2:
        raise UnevenRatings("counts must be an item x category matrix")
    row_sums = matrix.sum(axis=1)
    r = row_sums[0]
    if r < 2 or not np.all(row_sums == r):
        raise UnevenRatings("every item needs the same rater count r >= 2")
    n_items = matrix.shape[0]
    p_i = (np.square(matrix).sum(axis=1) - r) / (r * (r - 1))
    p_bar = float(p_i.mean())
    p_j = matrix.sum(axis=0) / (n_items * r)
    p_e = float(np.square(p_j).sum())
    if math.isclose(p_e, 1.0):
        return 1.0 if math.isclose(p_bar, 1.0) else 0.0
    return (p_bar - p_e) / (1 - p_e)


def cohen_kappa(ratings_a: list[str], ratings_b: list[str]) -> float:
    """Pairwise chance-corrected agreement between two raters."""
    if len(ratings_a) != len(ratings_b) or not ratings_a:
        raise UnevenRatings("need two equal-length non-empty rating lists")
    n = len(ratings_a)
    observed = sum(a == b for a, b in zip(ratings_a, ratings_b)) / n
    counts_a = Counter(ratings_a)
    counts_b = Counter(ratings_b)
    expected = sum(counts_a[c] * counts_b.get(c, 0) for c in counts_a) / (n * n)
    if math.isclose(expected, 1.0):
        return 1.0 if math.isclose(observed, 1.0) else 0.0
    return (observed - expected) / (1 - expected)
