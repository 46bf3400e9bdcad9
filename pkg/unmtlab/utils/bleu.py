# unmtlab/utils/bleu.py
#
# Corpus BLEU-4 with multi-bleu semantics (clipped counts, no smoothing, single
# reference) and paired bootstrap resampling over per-sentence statistics.

import logging
import math
from collections import Counter
from typing import Tuple

import msgspec
import numpy as np
import pandas as pd

from unmtlab.errors import SpecValidationError
from unmtlab.helpers import derive_rng

NGRAM_ORDER = 4

STAT_COLUMNS = (
    [f"correct_{n}_grams" for n in range(1, NGRAM_ORDER + 1)]
    + [f"total_{n}_grams" for n in range(1, NGRAM_ORDER + 1)]
    + ['translation_length', 'reference_length']
)


class BleuReport(msgspec.Struct, frozen=True):
    precisions: Tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    score: float


class SignificanceResult(msgspec.Struct, frozen=True):
    system_a: str
    system_b: str
    samples: int
    bleu_a: float
    bleu_b: float
    win_fraction: float
    p_value: float
    significant_at_01: bool


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_stats(hypothesis, reference):
    """Clipped n-gram matches, n-gram totals and both lengths for one sentence."""
    correct, total = [], []
    for n in range(1, NGRAM_ORDER + 1):
        hyp_counts = _ngram_counts(hypothesis, n)
        ref_counts = _ngram_counts(reference, n)
        correct.append(sum(min(count, ref_counts[ng]) for ng, count in hyp_counts.items()))
        total.append(max(0, len(hypothesis) - n + 1))
    return correct + total + [len(hypothesis), len(reference)]


def sufficient_stats(hypotheses, references):
    if len(hypotheses) != len(references):
        raise SpecValidationError(
            'hypotheses', f"{len(hypotheses)} hypotheses but {len(references)} references"
        )
    rows = [sentence_stats(list(h), list(r)) for h, r in zip(hypotheses, references)]
    return pd.DataFrame(rows, columns=STAT_COLUMNS, dtype=np.int64)


def report_from_stats(stats):
    """BleuReport from summed sufficient statistics (a length-10 vector)."""
    stats = np.asarray(stats, dtype=np.int64)
    correct = stats[:NGRAM_ORDER]
    total = stats[NGRAM_ORDER:2 * NGRAM_ORDER]
    c, r = int(stats[-2]), int(stats[-1])
    precisions = tuple(float(k) / t if t > 0 else 0.0 for k, t in zip(correct, total))
    if c == 0:
        brevity_penalty = 0.0
    else:
        brevity_penalty = min(1.0, math.exp(1.0 - r / c))
    if min(precisions) == 0.0:
        score = 0.0
    else:
        score = 100.0 * brevity_penalty * math.exp(sum(math.log(p) for p in precisions) / NGRAM_ORDER)
    return BleuReport(precisions=precisions, brevity_penalty=brevity_penalty, hyp_len=c, ref_len=r, score=score)


def bleu(hypotheses, references):
    """Corpus-level BLEU-4 over token sequences; one reference per hypothesis."""
    if len(hypotheses) != len(references):
        raise SpecValidationError(
            'hypotheses', f"{len(hypotheses)} hypotheses but {len(references)} references"
        )
    if not references:
        raise SpecValidationError('references', "at least one reference is required")
    stats = sufficient_stats(hypotheses, references)
    return report_from_stats(stats.sum(axis=0).to_numpy())


def _scores_from_stats(stats):
    """Vectorised BLEU score for each row of summed statistics."""
    stats = stats.astype(np.float64)
    correct = stats[:, :NGRAM_ORDER]
    total = stats[:, NGRAM_ORDER:2 * NGRAM_ORDER]
    c, r = stats[:, -2], stats[:, -1]
    with np.errstate(divide='ignore', invalid='ignore'):
        precisions = np.where(total > 0, correct / np.maximum(total, 1), 0.0)
        log_mean = np.log(np.where(precisions > 0, precisions, 1.0)).mean(axis=1)
        bp = np.where(c > 0, np.minimum(1.0, np.exp(1.0 - r / np.maximum(c, 1))), 0.0)
    scores = 100.0 * bp * np.exp(log_mean)
    return np.where(precisions.min(axis=1) > 0, scores, 0.0)


def paired_bootstrap(hyp_a, hyp_b, refs, samples=1000, seed=0, system_a='a', system_b='b'):
    """
    Paired bootstrap resampling of test indices.

    The p-value is the fraction of resamples where system b scores at least as
    well as system a, so a small p-value means a is significantly better.
    """
    if not (len(hyp_a) == len(hyp_b) == len(refs)):
        raise SpecValidationError(
            'hyp_b', f"lengths differ: {len(hyp_a)} / {len(hyp_b)} / {len(refs)}"
        )
    if samples < 1000:
        raise SpecValidationError('samples', f"need at least 1000 bootstrap samples, got {samples}")
    if not refs:
        raise SpecValidationError('refs', "at least one reference is required")

    stats_a = sufficient_stats(hyp_a, refs).to_numpy()
    stats_b = sufficient_stats(hyp_b, refs).to_numpy()
    n = len(refs)

    rng = derive_rng(seed, 'paired_bootstrap')
    indices = rng.integers(0, n, size=(samples, n))
    weights = np.zeros((samples, n), dtype=np.int64)
    np.add.at(weights, (np.repeat(np.arange(samples), n), indices.ravel()), 1)

    scores_a = _scores_from_stats(weights @ stats_a)
    scores_b = _scores_from_stats(weights @ stats_b)
    win_fraction = float(np.mean(scores_a > scores_b))
    p_value = float(np.mean(scores_b >= scores_a))

    result = SignificanceResult(
        system_a=system_a,
        system_b=system_b,
        samples=samples,
        bleu_a=report_from_stats(stats_a.sum(axis=0)).score,
        bleu_b=report_from_stats(stats_b.sum(axis=0)).score,
        win_fraction=win_fraction,
        p_value=p_value,
        significant_at_01=p_value < 0.01,
    )
    logging.debug(f"🔍 Bootstrap {system_a} vs {system_b}: p={p_value:.4f} over {samples} samples")
    return result
