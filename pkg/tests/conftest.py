# tests/conftest.py

import os

os.environ.setdefault('UNMTLAB_ENV', 'testing')

import pytest  # noqa: E402

from unmtlab.models import Lang, LanguagePairSpec, ModelDims, UnmtConfig  # noqa: E402
from unmtlab.seq2seq import init_model  # noqa: E402
from unmtlab.utils.corpus import build_vocab, encode_corpus  # noqa: E402
from unmtlab.utils.toylang import generate_corpora, generate_language_pair  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="run slow training tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def pair_spec():
    return LanguagePairSpec(content_vocab_size=20, anchor_vocab_size=3, seed=7)


@pytest.fixture(scope='session')
def pair(pair_spec):
    return generate_language_pair(pair_spec)


@pytest.fixture(scope='session')
def token_corpora(pair):
    """Raw-token X (120 L1), Y (40 L2) and a 20-pair reference test set."""
    return generate_corpora(pair, 120, 40, 20, seed=1)


@pytest.fixture(scope='session')
def vocab(pair):
    # every word of both languages, so oracle translations never hit <unk>
    words = sorted(pair.vocabulary(Lang.L1) | pair.vocabulary(Lang.L2))
    return build_vocab([[tuple(words)]])


@pytest.fixture(scope='session')
def corpora(token_corpora, vocab):
    X, Y, test = token_corpora
    return encode_corpus(X, vocab), encode_corpus(Y, vocab), encode_corpus(test, vocab)


@pytest.fixture(scope='session')
def tiny_dims(vocab):
    return ModelDims(vocab_size=len(vocab), embed_dim=6, hidden_dim=5, max_decode_len=8)


@pytest.fixture(scope='session')
def tiny_model(tiny_dims):
    return init_model(tiny_dims, seed=0)


@pytest.fixture
def tiny_unmt():
    return UnmtConfig(
        warmstart_steps=2,
        bt_steps=2,
        batch_size_tokens=60,
        eval_every=2,
        embed_dim=6,
        hidden_dim=5,
        max_decode_len=8,
        seed=0,
    )
