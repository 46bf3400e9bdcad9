# unmtlab/utils/noise.py

import numpy as np

from unmtlab.errors import SpecValidationError
from unmtlab.utils.corpus import UNK


def word_dropout(tokens, p_drop, rng):
    """Drop each token independently; one token always survives."""
    if p_drop == 0 or not tokens:
        return list(tokens)
    keep = rng.random(len(tokens)) >= p_drop
    kept = [tok for tok, k in zip(tokens, keep) if k]
    if not kept:
        kept = [tokens[int(rng.integers(len(tokens)))]]
    return kept


def word_shuffle(tokens, shuffle_k, rng):
    """
    Local reordering: sort by index + uniform(0, k+1).

    No token moves more than k positions.
    """
    if shuffle_k == 0 or len(tokens) < 2:
        return list(tokens)
    scores = np.arange(len(tokens)) + rng.uniform(0, shuffle_k + 1, size=len(tokens))
    permutation = np.argsort(scores, kind='stable')
    return [tokens[i] for i in permutation]


def word_blank(tokens, p_blank, rng, blank=UNK):
    if p_blank == 0:
        return list(tokens)
    keep = rng.random(len(tokens)) >= p_blank
    return [tok if k else blank for tok, k in zip(tokens, keep)]


def apply_noise(sentence, spec, rng, blank=UNK):
    """
    Corrupt a sentence for the denoising auto-encoder.

    Drops come first, so the shuffle bound is measured against post-drop
    positions; blanking replaces surviving tokens with UNK.
    """
    if not sentence:
        raise SpecValidationError('sentence', "cannot add noise to an empty sentence")
    tokens = word_dropout(list(sentence), spec.p_drop, rng)
    tokens = word_shuffle(tokens, spec.shuffle_k, rng)
    tokens = word_blank(tokens, spec.p_blank, rng, blank=blank)
    return tuple(tokens)


def noise_batch(sentences, spec, rng, blank=UNK):
    return [apply_noise(s, spec, rng, blank=blank) for s in sentences]
