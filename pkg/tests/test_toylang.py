# tests/test_toylang.py

from collections import Counter

import pytest
from pydantic import ValidationError

from unmtlab.errors import CapacityError, OutOfVocabularyError
from unmtlab.models import Direction, Lang, LanguagePairSpec
from unmtlab.utils.corpus import Origin
from unmtlab.utils.toylang import (
    LanguagePair,
    OracleTranslator,
    generate_corpora,
    generate_language_pair,
    grammar_capacity,
    oracle_translate,
    reorder,
    sample_sentence,
    split_parallel,
)
from unmtlab.helpers import derive_rng


def test_language_pair_is_deterministic(pair_spec):
    first = generate_language_pair(pair_spec)
    second = generate_language_pair(pair_spec)
    assert first.lexicon == second.lexicon
    assert first.categories == second.categories


def test_lexicon_is_a_bijection_between_disjoint_vocabularies(pair, pair_spec):
    assert len(pair.lexicon) == pair_spec.content_vocab_size
    assert len(set(pair.lexicon.values())) == len(pair.lexicon)
    assert not set(pair.lexicon) & set(pair.lexicon.values())
    assert len(pair.anchors) == pair_spec.anchor_vocab_size


def test_different_seed_gives_different_lexicon(pair_spec):
    other = generate_language_pair(pair_spec.model_copy(update={'seed': pair_spec.seed + 1}))
    assert other.lexicon != generate_language_pair(pair_spec).lexicon


@pytest.mark.parametrize('window', [0, 1, 2, 3])
def test_reorder_is_an_involution_with_bounded_displacement(window):
    for length in range(0, 11):
        tokens = list(range(length))
        moved = reorder(tokens, window)
        assert reorder(moved, window) == tokens
        assert sorted(moved) == tokens
        assert all(abs(moved.index(t) - t) <= window for t in tokens)


def test_oracle_round_trip_restores_sentence(pair):
    rng = derive_rng(3, 'test')
    for _ in range(50):
        sentence = sample_sentence(pair, rng)
        there = oracle_translate(pair, sentence, Direction.L1_TO_L2)
        back = oracle_translate(pair, there, Direction.L2_TO_L1)
        assert back == sentence


def test_oracle_preserves_anchors_and_length(pair):
    rng = derive_rng(4, 'test')
    anchors = set(pair.anchors)
    for _ in range(20):
        sentence = sample_sentence(pair, rng)
        translated = oracle_translate(pair, sentence, Direction.L1_TO_L2)
        assert len(translated) == len(sentence)
        assert Counter(t for t in translated if t in anchors) == Counter(t for t in sentence if t in anchors)
        assert all(t in pair.vocabulary(Lang.L2) for t in translated)


def test_oracle_rejects_out_of_vocabulary_token(pair):
    with pytest.raises(OutOfVocabularyError) as excinfo:
        oracle_translate(pair, ('qqq',), Direction.L1_TO_L2)
    assert excinfo.value.token == 'qqq'
    assert isinstance(excinfo.value, KeyError)

    l2_word = next(iter(pair.lexicon.values()))
    with pytest.raises(OutOfVocabularyError):
        oracle_translate(pair, (l2_word,), Direction.L1_TO_L2)


def test_generate_corpora_sizes_and_disjoint_pools(pair, token_corpora):
    X, Y, test = token_corpora
    assert (len(X), len(Y), len(test)) == (120, 40, 20)
    assert X.lang is Lang.L1 and Y.lang is Lang.L2
    assert test.origin is Origin.REFERENCE

    y_underlying = {oracle_translate(pair, s, Direction.L2_TO_L1) for s in Y}
    assert not set(X) & y_underlying
    assert not set(X) & set(test.sources)
    assert not y_underlying & set(test.sources)


def test_test_targets_are_oracle_translations(pair, token_corpora):
    _, _, test = token_corpora
    for src, tgt in zip(test.sources, test.targets):
        assert oracle_translate(pair, src, Direction.L1_TO_L2) == tgt


def test_duplicates_stay_under_cap(token_corpora):
    X, _, _ = token_corpora
    duplicates = len(X) - len(set(X))
    assert duplicates <= int(0.05 * len(X))


def test_generate_corpora_is_seed_deterministic(pair):
    first = generate_corpora(pair, 30, 10, 5, seed=9)
    second = generate_corpora(pair, 30, 10, 5, seed=9)
    assert first[0].sentences == second[0].sentences
    assert first[2].targets == second[2].targets


def test_capacity_error_when_grammar_is_too_small():
    spec = LanguagePairSpec(content_vocab_size=10, anchor_vocab_size=1, grammar_templates=['N #'])
    pair = generate_language_pair(spec)
    assert grammar_capacity(pair) == len(pair.categories['N'])
    with pytest.raises(CapacityError):
        generate_corpora(pair, 100, 10, 10, seed=0)


def test_capacity_error_for_non_positive_size(pair):
    with pytest.raises(CapacityError):
        generate_corpora(pair, 0, 10, 10, seed=0)


def test_spec_validation_names_the_field():
    with pytest.raises(ValidationError, match='content_vocab_size'):
        LanguagePairSpec(content_vocab_size=5)
    with pytest.raises(ValidationError, match='anchor slot'):
        LanguagePairSpec(grammar_templates=['N V N'])
    with pytest.raises(ValidationError, match='unknown slots'):
        LanguagePairSpec(grammar_templates=['N X #'])


def test_pair_manifest_round_trip(pair, tmp_path):
    path = pair.save(tmp_path / 'pair.json')
    loaded = LanguagePair.load(path)
    assert loaded.lexicon == pair.lexicon
    assert loaded.anchors == pair.anchors
    assert loaded.categories == pair.categories
    assert loaded.spec == pair.spec


def test_oracle_translator_matches_oracle(pair, vocab, token_corpora):
    _, _, test = token_corpora
    oracle = OracleTranslator(pair, vocab)
    ids = [vocab.encode(s) for s in test.sources]
    translated = oracle.translate(ids, Lang.L2)
    assert [vocab.decode(t) for t in translated] == list(test.targets)
    assert oracle.model_id == 'oracle'


def test_split_parallel(token_corpora):
    _, _, test = token_corpora
    first, rest = split_parallel(test, 15)
    assert len(first) == 15 and len(rest) == 5
    assert first.sources + rest.sources == test.sources
