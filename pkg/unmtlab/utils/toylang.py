# unmtlab/utils/toylang.py
#
# Synthetic bilingual world: two languages related by a bijective lexicon and a
# local reordering rule, so every sentence has an exact reference translation.

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

from unmtlab.errors import CapacityError, OutOfVocabularyError
from unmtlab.helpers import derive_rng, read_json, write_json
from unmtlab.models import ANCHOR_SLOT, CONTENT_SLOTS, Direction, Lang, LanguagePairSpec
from unmtlab.utils.corpus import MonoCorpus, Origin, ParallelCorpus

# Disjoint alphabets keep the two content vocabularies apart.
ALPHABETS = {
    Lang.L1: ('bdgkpt', 'aiu'),
    Lang.L2: ('fhlmnrsvz', 'eoy'),
}

# Share of the content vocabulary per part of speech (noun, verb, adjective, adverb).
SLOT_SHARES = {'N': 0.35, 'V': 0.25, 'A': 0.2, 'D': 0.2}

DUPLICATION_CAP = 0.05


@dataclass(frozen=True)
class LanguagePair:
    spec: LanguagePairSpec
    lexicon: Dict[str, str]
    anchors: Tuple[str, ...]
    categories: Dict[str, Tuple[str, ...]]
    inverse: Dict[str, str] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'inverse', {v: k for k, v in self.lexicon.items()})

    def vocabulary(self, lang):
        words = self.lexicon.keys() if Lang(lang) is Lang.L1 else self.lexicon.values()
        return set(words) | set(self.anchors)

    def reorder(self, tokens):
        return reorder(tokens, self.spec.reorder_window)

    def manifest(self):
        return {
            'spec': self.spec.model_dump(mode='json'),
            'lexicon': dict(sorted(self.lexicon.items())),
            'anchors': list(self.anchors),
            'categories': {slot: list(words) for slot, words in sorted(self.categories.items())},
        }

    def save(self, path):
        return write_json(path, self.manifest())

    @classmethod
    def load(cls, path):
        data = read_json(path)
        return cls(
            spec=LanguagePairSpec.model_validate(data['spec']),
            lexicon=dict(data['lexicon']),
            anchors=tuple(data['anchors']),
            categories={slot: tuple(words) for slot, words in data['categories'].items()},
        )


def reorder(tokens, window):
    """
    Reverse consecutive blocks of window+1 tokens.

    The rule is its own inverse and moves no token more than `window` places.
    """
    tokens = list(tokens)
    if window <= 0:
        return tokens
    size = window + 1
    out = []
    for start in range(0, len(tokens), size):
        out.extend(reversed(tokens[start:start + size]))
    return out


def _word_forms(lang, count, rng):
    consonants, vowels = ALPHABETS[lang]
    syllables = [c + v for c in consonants for v in vowels]
    forms = []
    n_syllables = 2
    while len(forms) < count:
        forms.extend(''.join(p) for p in itertools.product(syllables, repeat=n_syllables))
        n_syllables += 1
    chosen = rng.choice(len(forms), size=count, replace=False)
    return [forms[i] for i in chosen]


def _slot_sizes(total):
    sizes = {slot: max(1, int(total * SLOT_SHARES[slot])) for slot in CONTENT_SLOTS}
    # hand the rounding remainder to nouns
    sizes['N'] += total - sum(sizes.values())
    return sizes


def generate_language_pair(spec):
    """Deterministically build a LanguagePair from a validated LanguagePairSpec."""
    if not isinstance(spec, LanguagePairSpec):
        spec = LanguagePairSpec.model_validate(spec)
    rng = derive_rng(spec.seed, 'language_pair')

    l1_words = _word_forms(Lang.L1, spec.content_vocab_size, rng)
    l2_words = _word_forms(Lang.L2, spec.content_vocab_size, rng)
    lexicon = dict(zip(l1_words, (l2_words[i] for i in rng.permutation(len(l2_words)))))

    categories, start = {}, 0
    for slot, size in _slot_sizes(spec.content_vocab_size).items():
        categories[slot] = tuple(sorted(l1_words[start:start + size]))
        start += size

    anchors = tuple(str(i) for i in range(spec.anchor_vocab_size))
    pair = LanguagePair(spec=spec, lexicon=lexicon, anchors=anchors, categories=categories)
    logging.info(
        f"✅ Generated language pair: {len(lexicon)} content words, {len(anchors)} anchors, "
        f"reorder window {spec.reorder_window}"
    )
    return pair


def oracle_translate(pair, sentence, direction):
    """Exact translation: word-for-word lexicon image composed with the reorder rule."""
    direction = Direction(direction)
    if direction is Direction.L1_TO_L2:
        table = pair.lexicon
    else:
        table = pair.inverse
    anchors = set(pair.anchors)
    mapped = []
    for token in sentence:
        if token in anchors:
            mapped.append(token)
        elif token in table:
            mapped.append(table[token])
        else:
            raise OutOfVocabularyError(token, direction.value)
    return tuple(pair.reorder(mapped))


def sample_sentence(pair, rng):
    """Draw one L1 sentence from the grammar templates."""
    template = pair.spec.grammar_templates[int(rng.integers(len(pair.spec.grammar_templates)))]
    tokens = []
    for slot in template.split():
        words = pair.anchors if slot == ANCHOR_SLOT else pair.categories[slot]
        tokens.append(words[int(rng.integers(len(words)))])
    return tuple(tokens)


def grammar_capacity(pair):
    """Number of distinct L1 sentences the grammar can produce."""
    total = 0
    for template in set(pair.spec.grammar_templates):
        sizes = [len(pair.anchors) if slot == ANCHOR_SLOT else len(pair.categories[slot]) for slot in template.split()]
        total += math.prod(sizes)
    return total


def _fill_pool(pair, n, rng, taken, duplication_cap, label):
    allowed_duplicates = int(math.floor(duplication_cap * n))
    pool, seen, duplicates = [], set(), 0
    attempts, max_attempts = 0, 50 * n + 10000
    while len(pool) < n:
        attempts += 1
        if attempts > max_attempts:
            logging.error(f"❌ Could only draw {len(pool)} of {n} sentences for the {label} pool")
            raise CapacityError(
                f"grammar cannot supply {n} {label} sentences "
                f"(got {len(pool)} within {max_attempts} draws, duplication cap {duplication_cap:.0%})"
            )
        sentence = sample_sentence(pair, rng)
        if sentence in taken:
            continue
        if sentence in seen:
            if duplicates >= allowed_duplicates:
                continue
            duplicates += 1
        seen.add(sentence)
        pool.append(sentence)
    taken.update(seen)
    if duplicates:
        logging.debug(f"🔍 {label} pool holds {duplicates} duplicate sentences")
    return pool


def generate_corpora(pair, n_x, n_y, n_test, seed, duplication_cap=DUPLICATION_CAP):
    """
    Draw the unbalanced training corpora and a reference test set.

    X (L1) and Y (L2) come from disjoint pools of underlying sentences, and the
    test pairs come from a third pool disjoint from both.
    """
    for name, value in (('n_x', n_x), ('n_y', n_y), ('n_test', n_test)):
        if value < 1:
            raise CapacityError(f"{name} must be at least 1, got {value}")

    required = sum(n - int(math.floor(duplication_cap * n)) for n in (n_x, n_y, n_test))
    capacity = grammar_capacity(pair)
    if required > capacity:
        logging.error(f"❌ Requested {required} distinct sentences, grammar capacity is {capacity}")
        raise CapacityError(f"requested {required} distinct sentences but the grammar only has {capacity}")

    rng = derive_rng(seed, 'corpora')
    taken = set()
    x_pool = _fill_pool(pair, n_x, rng, taken, duplication_cap, 'X')
    y_pool = _fill_pool(pair, n_y, rng, taken, duplication_cap, 'Y')
    test_pool = _fill_pool(pair, n_test, rng, taken, duplication_cap, 'test')

    X = MonoCorpus(Lang.L1, x_pool, Origin.NATURAL)
    Y = MonoCorpus(Lang.L2, [oracle_translate(pair, s, Direction.L1_TO_L2) for s in y_pool], Origin.NATURAL)
    test = ParallelCorpus(
        Lang.L1, Lang.L2,
        test_pool,
        [oracle_translate(pair, s, Direction.L1_TO_L2) for s in test_pool],
        Origin.REFERENCE,
    )
    logging.info(f"✅ Generated corpora |X|={len(X)} |Y|={len(Y)} test={len(test)} (ratio {len(X) / len(Y):.1f}:1)")
    return X, Y, test


def split_parallel(corpus, n_first):
    """Split a parallel corpus into its first n_first pairs and the rest."""
    n_first = min(n_first, len(corpus))
    return corpus.select(range(n_first)), corpus.select(range(n_first, len(corpus)))


class OracleTranslator:
    """Ground-truth translator over vocabulary ids, with the same translate() contract as a snapshot."""

    model_id = 'oracle'

    def __init__(self, pair, vocab):
        self.pair = pair
        self.vocab = vocab

    def translate(self, sentences, target_lang, max_len=None):
        direction = Direction.towards(target_lang)
        out = []
        for sentence in sentences:
            tokens = self.vocab.decode(sentence)
            out.append(self.vocab.encode(oracle_translate(self.pair, tokens, direction)))
        return out
