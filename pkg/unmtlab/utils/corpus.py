# unmtlab/utils/corpus.py
#
# Shared vocabulary, monolingual/parallel corpora, cleaning, epsilon-subsampling
# and token-budget batching.

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from unmtlab.errors import BatchBudgetError, SpecValidationError
from unmtlab.helpers import derive_rng, derive_seed, read_lines, write_lines
from unmtlab.models import Lang

SPECIALS = ('<pad>', '<s>', '</s>', '<unk>', Lang.L1.tag, Lang.L2.tag)
PAD, BOS, EOS, UNK = 0, 1, 2, 3
LANG_IDS = {Lang.L1: 4, Lang.L2: 5}


class Origin(str, Enum):
    NATURAL = 'natural'
    SYNTHETIC = 'synthetic'
    REFERENCE = 'reference'
    MIXED = 'mixed'


def lang_tag_id(lang):
    return LANG_IDS[Lang(lang)]


# ----------------------------
# Vocabulary
# ----------------------------
@dataclass(frozen=True)
class Vocab:
    """Token <-> id bijection shared by both languages; ids 0..5 are reserved."""
    itos: Tuple[str, ...]
    stoi: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.itos[:len(SPECIALS)]) != SPECIALS:
            raise SpecValidationError('itos', f"reserved tokens must open the vocabulary as {SPECIALS}")
        stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(stoi) != len(self.itos):
            raise SpecValidationError('itos', "duplicate tokens")
        object.__setattr__(self, 'stoi', stoi)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def encode(self, tokens):
        return tuple(self.stoi.get(tok, UNK) for tok in tokens)

    def decode(self, ids, strip_special=True):
        if strip_special:
            return tuple(self.itos[i] for i in ids if i >= len(SPECIALS) or i == UNK)
        return tuple(self.itos[i] for i in ids)

    def save(self, path):
        return write_lines(path, [(tok,) for tok in self.itos])

    @classmethod
    def load(cls, path):
        return cls(tuple(line[0] for line in read_lines(path)))


def build_vocab(corpora):
    """
    Build the shared vocabulary over raw token corpora.

    Tokens are ordered by descending frequency with ties broken lexicographically,
    so the result does not depend on corpus or sentence order.
    """
    if not corpora:
        raise SpecValidationError('corpora', "at least one corpus is required")
    counts = Counter()
    for corpus in corpora:
        for sentence in corpus:
            counts.update(sentence)
    for special in SPECIALS:
        counts.pop(special, None)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    vocab = Vocab(SPECIALS + tuple(tok for tok, _ in ordered))
    logging.info(f"✅ Built shared vocabulary: {len(vocab)} tokens ({len(SPECIALS)} reserved)")
    return vocab


# ----------------------------
# Corpora
# ----------------------------
@dataclass(frozen=True)
class MonoCorpus:
    """Monolingual sentences, either raw tokens or vocabulary ids."""
    lang: Lang
    sentences: Tuple[tuple, ...]
    origin: Origin = Origin.NATURAL

    def __post_init__(self):
        object.__setattr__(self, 'lang', Lang(self.lang))
        object.__setattr__(self, 'origin', Origin(self.origin))
        object.__setattr__(self, 'sentences', tuple(tuple(s) for s in self.sentences))
        for i, sentence in enumerate(self.sentences):
            if not sentence:
                raise SpecValidationError('sentences', f"sentence {i} is empty")

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, index):
        return self.sentences[index]

    def concat(self, other):
        if other.lang != self.lang:
            raise SpecValidationError('lang', f"cannot pool {self.lang.value} with {other.lang.value}")
        origin = self.origin if self.origin == other.origin else Origin.MIXED
        return MonoCorpus(self.lang, self.sentences + other.sentences, origin)

    def select(self, indices):
        return MonoCorpus(self.lang, tuple(self.sentences[i] for i in indices), self.origin)


@dataclass(frozen=True)
class ParallelCorpus:
    src_lang: Lang
    tgt_lang: Lang
    sources: Tuple[tuple, ...]
    targets: Tuple[tuple, ...]
    origin: Origin = Origin.REFERENCE

    def __post_init__(self):
        object.__setattr__(self, 'src_lang', Lang(self.src_lang))
        object.__setattr__(self, 'tgt_lang', Lang(self.tgt_lang))
        object.__setattr__(self, 'origin', Origin(self.origin))
        object.__setattr__(self, 'sources', tuple(tuple(s) for s in self.sources))
        object.__setattr__(self, 'targets', tuple(tuple(t) for t in self.targets))
        if len(self.sources) != len(self.targets):
            raise SpecValidationError(
                'targets', f"{len(self.sources)} sources but {len(self.targets)} targets"
            )
        for i, (src, tgt) in enumerate(zip(self.sources, self.targets)):
            if not src or not tgt:
                raise SpecValidationError('sources', f"pair {i} has an empty side")

    def __len__(self):
        return len(self.sources)

    def reversed(self):
        return ParallelCorpus(self.tgt_lang, self.src_lang, self.targets, self.sources, self.origin)

    def select(self, indices):
        return ParallelCorpus(
            self.src_lang, self.tgt_lang,
            tuple(self.sources[i] for i in indices),
            tuple(self.targets[i] for i in indices),
            self.origin,
        )


def encode_corpus(corpus, vocab):
    if isinstance(corpus, ParallelCorpus):
        return ParallelCorpus(
            corpus.src_lang, corpus.tgt_lang,
            tuple(vocab.encode(s) for s in corpus.sources),
            tuple(vocab.encode(t) for t in corpus.targets),
            corpus.origin,
        )
    return MonoCorpus(corpus.lang, tuple(vocab.encode(s) for s in corpus.sentences), corpus.origin)


def decode_corpus(corpus, vocab):
    if isinstance(corpus, ParallelCorpus):
        return ParallelCorpus(
            corpus.src_lang, corpus.tgt_lang,
            tuple(vocab.decode(s) for s in corpus.sources),
            tuple(vocab.decode(t) for t in corpus.targets),
            corpus.origin,
        )
    return MonoCorpus(corpus.lang, tuple(vocab.decode(s) for s in corpus.sentences), corpus.origin)


def clean(corpus, max_len=50):
    """Drop sentences longer than max_len tokens, keeping order."""
    kept = tuple(s for s in corpus.sentences if len(s) <= max_len)
    dropped = len(corpus) - len(kept)
    if dropped:
        logging.info(f"🔍 Cleaning removed {dropped} of {len(corpus)} {corpus.lang.value} sentences over {max_len} tokens")
    return MonoCorpus(corpus.lang, kept, corpus.origin)


def subsample_size(n, ratio):
    """round(ratio * n), half-up, never below one sentence."""
    if not 0.0 < ratio <= 1.0:
        raise SpecValidationError('ratio', f"must lie in (0, 1], got {ratio}")
    return max(1, int(math.floor(ratio * n + 0.5)))


def subsample_indices(n, ratio, seed):
    size = subsample_size(n, ratio)
    rng = derive_rng(seed, 'subsample')
    return tuple(sorted(int(i) for i in rng.choice(n, size=size, replace=False)))


def subsample(corpus, ratio, seed):
    """Uniform sample without replacement of round(ratio*|corpus|) sentences, in corpus order."""
    return corpus.select(subsample_indices(len(corpus), ratio, seed))


# ----------------------------
# Batching
# ----------------------------
@dataclass(frozen=True)
class Batch:
    indices: Tuple[int, ...]
    sources: Tuple[tuple, ...]
    src_lang: Lang
    targets: Optional[Tuple[tuple, ...]] = None
    tgt_lang: Optional[Lang] = None
    origin: Origin = Origin.NATURAL

    def __len__(self):
        return len(self.indices)

    @property
    def padded_tokens(self):
        return len(self) * max(_item_length(self, i) for i in range(len(self)))


def _item_length(batch, i):
    if batch.targets is None:
        return len(batch.sources[i])
    return max(len(batch.sources[i]), len(batch.targets[i]))


def _lengths(corpus):
    if isinstance(corpus, ParallelCorpus):
        return [max(len(s), len(t)) for s, t in zip(corpus.sources, corpus.targets)]
    return [len(s) for s in corpus.sentences]


def _make_batch(corpus, indices):
    indices = tuple(indices)
    if isinstance(corpus, ParallelCorpus):
        return Batch(
            indices=indices,
            sources=tuple(corpus.sources[i] for i in indices),
            src_lang=corpus.src_lang,
            targets=tuple(corpus.targets[i] for i in indices),
            tgt_lang=corpus.tgt_lang,
            origin=corpus.origin,
        )
    return Batch(
        indices=indices,
        sources=tuple(corpus.sentences[i] for i in indices),
        src_lang=corpus.lang,
        origin=corpus.origin,
    )


def batch_iter(corpus, batch_size_tokens, seed):
    """
    One epoch of token-budget batches over a seed-shuffled order.

    A batch's padded size (sentences x longest sentence) never exceeds
    batch_size_tokens, and every sentence appears exactly once.
    """
    lengths = _lengths(corpus)
    for i, length in enumerate(lengths):
        if length > batch_size_tokens:
            raise BatchBudgetError(i, length, batch_size_tokens)
    order = derive_rng(seed, 'batch_iter').permutation(len(lengths))
    return _batches(corpus, lengths, order, batch_size_tokens)


def _batches(corpus, lengths, order, budget):
    current, longest = [], 0
    for index in order:
        index = int(index)
        longest_if_added = max(longest, lengths[index])
        if current and (len(current) + 1) * longest_if_added > budget:
            yield _make_batch(corpus, current)
            current, longest_if_added = [], lengths[index]
        current.append(index)
        longest = longest_if_added
    if current:
        yield _make_batch(corpus, current)


class BatchStream:
    """
    Endless batch stream over a corpus; each pass reshuffles with a fresh epoch seed.

    The smaller corpus of an unbalanced pair recycles many times while the larger
    one streams, so epoch rollovers are counted and logged.
    """

    def __init__(self, corpus, batch_size_tokens, seed, name):
        self.corpus = corpus
        self.batch_size_tokens = batch_size_tokens
        self.seed = seed
        self.name = name
        self.epoch = 0
        self.sentences_seen = 0
        self._iter = batch_iter(corpus, batch_size_tokens, self._epoch_seed())

    def _epoch_seed(self):
        return derive_seed(self.seed, self.name, self.epoch)

    def __iter__(self):
        return self

    def __next__(self):
        try:
            batch = next(self._iter)
        except StopIteration:
            self.epoch += 1
            logging.debug(f"🔄 {self.name}: finished pass {self.epoch} over {len(self.corpus)} sentences")
            self._iter = batch_iter(self.corpus, self.batch_size_tokens, self._epoch_seed())
            batch = next(self._iter)
        self.sentences_seen += len(batch)
        return batch

    @property
    def passes(self):
        """Fractional number of passes consumed so far."""
        return self.sentences_seen / max(1, len(self.corpus))
