# tests/test_selftrain.py

import os

import msgspec
import numpy as np
import pytest

from unmtlab.errors import SpecValidationError
from unmtlab.helpers import read_json, read_lines
from unmtlab.models import Direction, Lang, SelfTrainConfig, Strategy, UnmtConfig
from unmtlab.selftrain import (
    PT_TERMS,
    STRATEGY_RUNNERS,
    SyntheticManifest,
    _check_synthetic,
    dump_synthetic_record,
    generate_synthetic_mono,
    generate_synthetic_parallel,
    run_strategy,
    train_st_pt,
    train_st_ut,
)
from unmtlab.seq2seq import init_model
from unmtlab.unmt import evaluate, model_dims, train_supervised
from unmtlab.utils.corpus import Origin, ParallelCorpus, batch_iter, encode_corpus
from unmtlab.utils.toylang import OracleTranslator, generate_corpora, oracle_translate


@pytest.fixture
def st_cfg():
    return SelfTrainConfig(strategy='ST_PT', epsilon=0.1, max_epochs=2, steps_per_epoch=2, seed=3)


@pytest.fixture
def oracle(pair, vocab):
    return OracleTranslator(pair, vocab)


def _collect(snapshots):
    def on_epoch(epoch, model):
        snapshots.append((epoch, model.model_id))
    return on_epoch


@pytest.mark.parametrize('epsilon, expected', [(0.1, 12), (0.5, 60), (1.0, 120)])
def test_synthetic_mono_size(tiny_model, corpora, epsilon, expected):
    X, _, _ = corpora
    record = generate_synthetic_mono(tiny_model, X, epsilon, seed=0)
    assert len(record.forward) == expected
    assert record.kind == 'mono'
    assert record.backward is None
    assert record.mono.lang is Lang.L2
    assert record.mono.origin is Origin.SYNTHETIC
    assert record.generator_id == tiny_model.model_id


def test_synthetic_mono_rejects_l2_corpus(tiny_model, corpora):
    _, Y, _ = corpora
    with pytest.raises(SpecValidationError):
        generate_synthetic_mono(tiny_model, Y, 0.1, seed=0)


def test_synthetic_parallel_from_oracle(oracle, corpora):
    X, Y, _ = corpora
    record = generate_synthetic_parallel(oracle, X, Y, 0.1, seed=5)
    assert record.kind == 'parallel'
    assert record.generator_id == 'oracle'
    assert list(record.forward.targets) == oracle.translate(record.forward.sources, Lang.L2)
    assert record.forward.sources == tuple(X[i] for i in record.source_indices)
    assert record.backward.sources == Y.sentences
    assert record.backward.src_lang is Lang.L2
    assert record.backward.origin is Origin.SYNTHETIC
    assert list(record.backward.targets) == oracle.translate(Y.sentences, Lang.L1)


def test_synthetic_mono_from_oracle_matches_references(oracle, pair, vocab, token_corpora, corpora):
    X, _, _ = corpora
    raw_x = token_corpora[0]
    record = generate_synthetic_mono(oracle, X, 0.5, seed=2)
    expected = [vocab.encode(oracle_translate(pair, raw_x[i], Direction.L1_TO_L2)) for i in record.source_indices]
    assert [tuple(t) for t in record.forward.targets] == [tuple(e) for e in expected]
    assert record.generator_id == 'oracle'


def test_synthetic_subset_depends_on_seed(tiny_model, corpora):
    X, _, _ = corpora
    a = generate_synthetic_mono(tiny_model, X, 0.1, seed=1)
    b = generate_synthetic_mono(tiny_model, X, 0.1, seed=1)
    c = generate_synthetic_mono(tiny_model, X, 0.1, seed=2)
    assert a.source_indices == b.source_indices
    assert a.source_indices != c.source_indices


def test_dump_synthetic_record(oracle, corpora, vocab, tmp_path):
    X, Y, _ = corpora
    record = generate_synthetic_parallel(oracle, X, Y, 0.1, seed=0, epoch=1)
    paths = dump_synthetic_record(record, vocab, tmp_path / 'epoch1')
    names = sorted(os.path.basename(p) for p in paths)
    assert names == ['backward.l1', 'backward.l2', 'forward.l1', 'forward.l2', 'manifest.json']
    assert len(read_lines(tmp_path / 'epoch1' / 'forward.l2')) == 12
    manifest = read_json(tmp_path / 'epoch1' / 'manifest.json', SyntheticManifest)
    assert manifest == record.manifest()
    assert manifest.backward_pairs == len(Y)


def test_check_synthetic_rejects_natural_batch(corpora):
    _, _, test = corpora
    batch = next(iter(batch_iter(test, 60, 0)))
    with pytest.raises(SpecValidationError):
        _check_synthetic(batch, 'xsub_to_ysyn')


def test_st_ut_generator_is_previous_model(tiny_model, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    snapshots = []
    records = []
    model, history = train_st_ut(
        tiny_model, X, Y, test, st_cfg, unmt=tiny_unmt,
        on_epoch=_collect(snapshots), on_record=records.append, show_progress=False,
    )
    assert [epoch for epoch, _ in snapshots] == [0, 1, 2]
    assert [r.generator_id for r in records] == [mid for _, mid in snapshots[:2]]
    assert snapshots[-1][1] == model.model_id
    assert all(r.kind == 'mono' for r in records)
    assert [e.epoch for e in history.epochs] == [0, 1, 2]
    assert history.epochs[1].synthetic_pairs == 12
    assert 'bt_loss_xy' in history.epochs[1].losses


def test_st_pt_runs_four_synthetic_terms(tiny_model, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    snapshots = []
    records = []
    model, history = train_st_pt(
        tiny_model, X, Y, test, st_cfg, unmt=tiny_unmt,
        on_epoch=_collect(snapshots), on_record=records.append, show_progress=False,
    )
    steps = st_cfg.steps_per_epoch * st_cfg.max_epochs
    assert history.term_counts == {term: steps for term, _, _ in PT_TERMS}
    assert [r.generator_id for r in records] == [mid for _, mid in snapshots[:2]]
    assert model.step == tiny_model.step + 4 * steps
    assert history.epochs[1].synthetic_pairs == 12 + len(Y)
    assert set(history.epochs[1].losses) == {term for term, _, _ in PT_TERMS}


def test_st_pt_first_generator(tiny_model, oracle, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    records = []
    train_st_pt(
        tiny_model, X, Y, test, st_cfg, unmt=tiny_unmt,
        first_generator=oracle, on_record=records.append, show_progress=False,
    )
    assert records[0].generator_id == 'oracle'
    assert records[1].generator_id not in ('oracle', tiny_model.model_id)


def test_st_pt_reinit_restarts_each_epoch(tiny_model, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    cfg = st_cfg.model_copy(update={'warm_start': 'reinit', 'max_epochs': 1})
    model, _ = train_st_pt(tiny_model, X, Y, test, cfg, unmt=tiny_unmt, show_progress=False)
    # a fresh model has step 0, so only this epoch's updates count
    assert model.step == 4 * cfg.steps_per_epoch


def test_st_ut_reinit_warm_starts(tiny_model, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    cfg = st_cfg.model_copy(update={'warm_start': 'reinit', 'max_epochs': 1})
    model, history = train_st_ut(tiny_model, X, Y, test, cfg, unmt=tiny_unmt, show_progress=False)
    assert model.step == tiny_unmt.warmstart_steps + 4 * cfg.steps_per_epoch
    assert history.term_counts['dae_l1'] == tiny_unmt.warmstart_steps // 2 + cfg.steps_per_epoch


def test_keep_baseline_reports_m0_every_epoch(tiny_model, corpora, st_cfg):
    X, Y, test = corpora
    model, history = run_strategy(Strategy.BASELINE, tiny_model, X, Y, test, st_cfg)
    assert model is tiny_model
    assert [e.epoch for e in history.epochs] == [0, 1, 2]
    assert {e.model_id for e in history.epochs} == {tiny_model.model_id}
    assert history.term_counts == {}


@pytest.mark.parametrize('strategy', [Strategy.BASELINE_EXTRA_STEPS, Strategy.ST_UT, Strategy.ST_PT])
def test_budget_parity(strategy, tiny_model, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    _, history = run_strategy(strategy, tiny_model, X, Y, None, st_cfg, unmt=tiny_unmt, show_progress=False)
    assert sum(history.term_counts.values()) == 4 * st_cfg.max_epochs * st_cfg.steps_per_epoch
    assert history.epochs[-1].bleu_xy is None


def test_every_strategy_has_a_runner():
    assert set(STRATEGY_RUNNERS) == set(Strategy)


def test_history_serialises(tiny_model, corpora, tiny_unmt, st_cfg):
    X, Y, test = corpora
    _, history = train_st_pt(tiny_model, X, Y, test, st_cfg, unmt=tiny_unmt, show_progress=False)
    decoded = msgspec.json.decode(msgspec.json.encode(history), type=type(history))
    assert decoded == history


@pytest.mark.slow
def test_st_pt_from_oracle_reaches_supervised_ceiling(pair, vocab, oracle):
    """One ST-PT epoch on oracle pairs lands within 5 BLEU of training on the true pairs."""
    st_scores, supervised_scores = [], []
    for seed in (1, 2, 3):
        X, Y, test = (encode_corpus(c, vocab) for c in generate_corpora(pair, 400, 100, 50, seed=seed))
        unmt = UnmtConfig(batch_size_tokens=200, embed_dim=24, hidden_dim=32, max_decode_len=10, seed=seed)
        dims = model_dims(unmt, len(vocab))

        cfg = SelfTrainConfig(epsilon=1.0, max_epochs=1, steps_per_epoch=1000, seed=seed)
        model, _ = train_st_pt(
            init_model(dims, seed), X, Y, None, cfg, unmt=unmt, first_generator=oracle, show_progress=False,
        )
        st_scores.append(evaluate(model, test))

        true_pairs = ParallelCorpus(
            Lang.L1, Lang.L2,
            X.sentences + tuple(oracle.translate(Y.sentences, Lang.L1)),
            tuple(oracle.translate(X.sentences, Lang.L2)) + Y.sentences,
            Origin.REFERENCE,
        )
        ceiling, _ = train_supervised(init_model(dims, seed), true_pairs, 2000, unmt, seed=seed)
        supervised_scores.append(evaluate(ceiling, test))

    for direction in (Direction.L1_TO_L2, Direction.L2_TO_L1):
        st_mean = np.mean([s[direction].score for s in st_scores])
        supervised_mean = np.mean([s[direction].score for s in supervised_scores])
        assert abs(st_mean - supervised_mean) <= 5.0, (direction, st_mean, supervised_mean)
