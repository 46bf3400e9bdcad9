# unmtlab/selftrain.py
#
# Self-training on top of a trained UNMT model. ST-UT regenerates synthetic L2
# sentences from a subset of the large L1 corpus and pools them into the L2
# back-translation stream. ST-PT regenerates synthetic parallel corpora and
# trains a purely supervised model on them in both directions.

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import msgspec
import numpy as np
from tqdm import tqdm

from unmtlab.errors import SpecValidationError
from unmtlab.helpers import derive_seed, ensure_dir, progress_enabled, write_json, write_lines
from unmtlab.models import Direction, Lang, Strategy, UnmtConfig
from unmtlab.seq2seq import init_model, init_opt
from unmtlab.unmt import UnmtTrainer, evaluate, supervised_update
from unmtlab.utils.corpus import BatchStream, MonoCorpus, Origin, ParallelCorpus, subsample_indices


# ----------------------------
# Records and history
# ----------------------------
class SyntheticManifest(msgspec.Struct, frozen=True):
    kind: str
    epoch: int
    generator_id: str
    epsilon: float
    seed: int
    origin: str
    forward_pairs: int
    backward_pairs: int = 0


@dataclass(frozen=True)
class SyntheticRecord:
    """
    Synthetic data produced by one generator at the start of an epoch.

    `forward` pairs the L1 subset with its generated L2 side. `backward` pairs
    all of Y with generated L1 and exists only for parallel records.
    """
    epoch: int
    generator_id: str
    epsilon: float
    seed: int
    source_indices: Tuple[int, ...]
    forward: ParallelCorpus
    backward: Optional[ParallelCorpus] = None

    @property
    def kind(self):
        return 'mono' if self.backward is None else 'parallel'

    @property
    def mono(self):
        return MonoCorpus(self.forward.tgt_lang, self.forward.targets, Origin.SYNTHETIC)

    def manifest(self):
        return SyntheticManifest(
            kind=self.kind,
            epoch=self.epoch,
            generator_id=self.generator_id,
            epsilon=self.epsilon,
            seed=self.seed,
            origin=self.forward.origin.value,
            forward_pairs=len(self.forward),
            backward_pairs=0 if self.backward is None else len(self.backward),
        )


class EpochEntry(msgspec.Struct, frozen=True):
    epoch: int
    model_id: str
    generator_id: Optional[str] = None
    synthetic_pairs: int = 0
    losses: Dict[str, float] = msgspec.field(default_factory=dict)
    bleu_xy: Optional[float] = None
    bleu_yx: Optional[float] = None


class SelfTrainHistory(msgspec.Struct):
    strategy: str
    epochs: List[EpochEntry] = msgspec.field(default_factory=list)
    term_counts: Dict[str, int] = msgspec.field(default_factory=dict)
    records: List[SyntheticManifest] = msgspec.field(default_factory=list)

    def count(self, term, n=1):
        self.term_counts[term] = self.term_counts.get(term, 0) + n


def _dev_scores(model, dev):
    if dev is None or not len(dev):
        return None, None
    scores = evaluate(model, dev)
    return scores[Direction.L1_TO_L2].score, scores[Direction.L2_TO_L1].score


def _epoch_entry(epoch, model, dev, record=None, losses=None):
    bleu_xy, bleu_yx = _dev_scores(model, dev)
    pairs = 0
    if record is not None:
        pairs = len(record.forward) + (0 if record.backward is None else len(record.backward))
    return EpochEntry(
        epoch=epoch,
        model_id=model.model_id,
        generator_id=None if record is None else record.generator_id,
        synthetic_pairs=pairs,
        losses=dict(losses or {}),
        bleu_xy=bleu_xy,
        bleu_yx=bleu_yx,
    )


def _generator_id(generator):
    return getattr(generator, 'model_id', type(generator).__name__)


# ----------------------------
# Synthetic data
# ----------------------------
def _check_sources(X, Y=None):
    if X.lang is not Lang.L1:
        raise SpecValidationError('X', f"expected an L1 corpus, got {X.lang.value}")
    if not len(X):
        raise SpecValidationError('X', "monolingual corpus is empty")
    if Y is not None and Y.lang is not Lang.L2:
        raise SpecValidationError('Y', f"expected an L2 corpus, got {Y.lang.value}")


def generate_synthetic_mono(model, X, epsilon, seed, epoch=0):
    """Translate a round(epsilon*|X|) subset of X into L2."""
    _check_sources(X)
    indices = subsample_indices(len(X), epsilon, seed)
    subset = X.select(indices)
    generated = model.translate(subset.sentences, Lang.L2)
    record = SyntheticRecord(
        epoch=epoch,
        generator_id=_generator_id(model),
        epsilon=epsilon,
        seed=seed,
        source_indices=indices,
        forward=ParallelCorpus(Lang.L1, Lang.L2, subset.sentences, generated, Origin.SYNTHETIC),
    )
    logging.info(f"🔄 Epoch {epoch}: {len(generated)} synthetic L2 sentences from model {record.generator_id}")
    return record


def generate_synthetic_parallel(model, X, Y, epsilon, seed, epoch=0):
    """
    Synthetic pairs (X^sub, Y_M^sub) from an epsilon subset of X plus
    (Y, X_M) over the whole of Y.
    """
    _check_sources(X, Y)
    if not len(Y):
        raise SpecValidationError('Y', "monolingual corpus is empty")
    indices = subsample_indices(len(X), epsilon, seed)
    subset = X.select(indices)
    y_hat = model.translate(subset.sentences, Lang.L2)
    x_hat = model.translate(Y.sentences, Lang.L1)
    record = SyntheticRecord(
        epoch=epoch,
        generator_id=_generator_id(model),
        epsilon=epsilon,
        seed=seed,
        source_indices=indices,
        forward=ParallelCorpus(Lang.L1, Lang.L2, subset.sentences, y_hat, Origin.SYNTHETIC),
        backward=ParallelCorpus(Lang.L2, Lang.L1, Y.sentences, x_hat, Origin.SYNTHETIC),
    )
    logging.info(
        f"🔄 Epoch {epoch}: {len(record.forward)} + {len(record.backward)} synthetic pairs "
        f"from model {record.generator_id}"
    )
    return record


def dump_synthetic_record(record, vocab, directory):
    """Write the record's parallel text files and a manifest for auditing."""
    directory = ensure_dir(directory)
    corpora = {'forward': record.forward}
    if record.backward is not None:
        corpora['backward'] = record.backward
    paths = []
    for name, corpus in corpora.items():
        for lang, side in ((corpus.src_lang, corpus.sources), (corpus.tgt_lang, corpus.targets)):
            path = os.path.join(directory, f"{name}.{lang.value}")
            write_lines(path, [vocab.decode(s) for s in side])
            paths.append(path)
    manifest = os.path.join(directory, 'manifest.json')
    write_json(manifest, record.manifest())
    logging.debug(f"✅ Dumped synthetic record for epoch {record.epoch} to {directory}")
    return paths + [manifest]


# ----------------------------
# Strategies
# ----------------------------
def _restart(base, epoch, cfg):
    return init_model(base.dims, derive_seed(cfg.seed, 'reinit', epoch))


def _mean_losses(losses):
    return {term: float(np.mean(values)) for term, values in losses.items() if values}


def _window_losses(window):
    return {
        key: value for key, value in msgspec.structs.asdict(window).items()
        if '_loss_' in key and value is not None
    }


def train_st_ut(base, X, Y, dev, cfg, unmt=None, on_epoch=None, on_record=None, show_progress=None):
    """
    ST-UT: each epoch translates a fresh epsilon subset of X with the previous
    epoch's model and pools the result into the L2 back-translation stream.
    """
    unmt = unmt or UnmtConfig()
    _check_sources(X, Y)
    history = SelfTrainHistory(strategy=Strategy.ST_UT.value)
    history.epochs.append(_epoch_entry(0, base, dev))
    if on_epoch:
        on_epoch(0, base)

    model, opt = base, init_opt(base, unmt.optimizer)
    for epoch in range(1, cfg.max_epochs + 1):
        record = generate_synthetic_mono(model, X, cfg.epsilon, derive_seed(cfg.seed, 'synthetic', epoch), epoch)
        history.records.append(record.manifest())
        if on_record:
            on_record(record)
        pool = Y.concat(record.mono)

        if cfg.warm_start == 'reinit':
            model = _restart(base, epoch, cfg)
            opt = init_opt(model, unmt.optimizer)
        trainer = UnmtTrainer(
            unmt, X, Y, model, opt=opt,
            seed=derive_seed(cfg.seed, 'st_ut', epoch),
            y_bt_corpus=pool,
            show_progress=show_progress,
        )
        if cfg.warm_start == 'reinit':
            trainer.warmstart(unmt.warmstart_steps, desc=f"ST-UT epoch {epoch} warm-start")
        trainer.joint(cfg.steps_per_epoch, desc=f"ST-UT epoch {epoch}")
        window = trainer.record()
        model, opt = trainer.model, trainer.opt
        for term, n in trainer.history.term_counts.items():
            history.count(term, n)

        entry = _epoch_entry(epoch, model, dev, record, _window_losses(window))
        history.epochs.append(entry)
        logging.info(f"✅ ST-UT epoch {epoch}: model {entry.model_id} dev BLEU {entry.bleu_xy}/{entry.bleu_yx}")
        if on_epoch:
            on_epoch(epoch, model)
    return model, history


# The four supervised terms over synthetic parallel data: (term, corpus, reversed?).
PT_TERMS = (
    ('xsub_to_ysyn', 'forward', False),
    ('ysyn_to_xsub', 'forward', True),
    ('y_to_xsyn', 'backward', False),
    ('xsyn_to_y', 'backward', True),
)


def _check_synthetic(batch, term):
    if batch.origin is not Origin.SYNTHETIC:
        raise SpecValidationError('origin', f"{term} batch has origin {batch.origin.value}; only synthetic pairs may train the PNMT model")


def train_st_pt(base, X, Y, dev, cfg, unmt=None, first_generator=None, on_epoch=None, on_record=None, show_progress=None):
    """
    ST-PT: each epoch regenerates synthetic parallel corpora with the previous
    epoch's model and runs purely supervised steps over the four terms.

    The first epoch's generator is `base` unless `first_generator` is given.
    """
    unmt = unmt or UnmtConfig()
    _check_sources(X, Y)
    history = SelfTrainHistory(strategy=Strategy.ST_PT.value)
    history.epochs.append(_epoch_entry(0, base, dev))
    if on_epoch:
        on_epoch(0, base)

    clip_norm = unmt.optimizer.clip_norm
    model, opt = base, init_opt(base, unmt.optimizer)
    for epoch in range(1, cfg.max_epochs + 1):
        generator = first_generator if (epoch == 1 and first_generator is not None) else model
        record = generate_synthetic_parallel(
            generator, X, Y, cfg.epsilon, derive_seed(cfg.seed, 'synthetic', epoch), epoch
        )
        history.records.append(record.manifest())
        if on_record:
            on_record(record)

        if cfg.warm_start == 'reinit':
            model = _restart(base, epoch, cfg)
            opt = init_opt(model, unmt.optimizer)

        stream_seed = derive_seed(cfg.seed, 'st_pt', epoch)
        streams = {}
        for term, name, flip in PT_TERMS:
            corpus = getattr(record, name)
            streams[term] = BatchStream(corpus.reversed() if flip else corpus, unmt.batch_size_tokens, stream_seed, term)

        losses = {term: [] for term, _, _ in PT_TERMS}
        for _ in tqdm(range(cfg.steps_per_epoch), desc=f"ST-PT epoch {epoch}", disable=not progress_enabled(show_progress)):
            for term, stream in streams.items():
                batch = next(stream)
                _check_synthetic(batch, term)
                model, opt, loss = supervised_update(model, opt, batch.sources, batch.targets, batch.tgt_lang, clip_norm)
                losses[term].append(loss)
                history.count(term)

        entry = _epoch_entry(epoch, model, dev, record, _mean_losses(losses))
        history.epochs.append(entry)
        logging.info(f"✅ ST-PT epoch {epoch}: model {entry.model_id} dev BLEU {entry.bleu_xy}/{entry.bleu_yx}")
        if on_epoch:
            on_epoch(epoch, model)
    return model, history


def train_baseline_extra(base, X, Y, dev, cfg, unmt=None, on_epoch=None, on_record=None, show_progress=None):
    """Plain UNMT continued for the same step budget as one self-training run."""
    unmt = unmt or UnmtConfig()
    history = SelfTrainHistory(strategy=Strategy.BASELINE_EXTRA_STEPS.value)
    history.epochs.append(_epoch_entry(0, base, dev))
    if on_epoch:
        on_epoch(0, base)

    trainer = UnmtTrainer(unmt, X, Y, base, seed=derive_seed(cfg.seed, 'extra_steps'), show_progress=show_progress)
    for epoch in range(1, cfg.max_epochs + 1):
        trainer.joint(cfg.steps_per_epoch, desc=f"extra steps epoch {epoch}")
        window = trainer.record()
        entry = _epoch_entry(epoch, trainer.model, dev, losses=_window_losses(window))
        history.epochs.append(entry)
        if on_epoch:
            on_epoch(epoch, trainer.model)
    for term, n in trainer.history.term_counts.items():
        history.count(term, n)
    return trainer.model, history


def keep_baseline(base, X, Y, dev, cfg, unmt=None, on_epoch=None, on_record=None, show_progress=None):
    """No further training; every epoch reports M0 so all strategies share one row shape."""
    history = SelfTrainHistory(strategy=Strategy.BASELINE.value)
    entry = _epoch_entry(0, base, dev)
    for epoch in range(cfg.max_epochs + 1):
        history.epochs.append(msgspec.structs.replace(entry, epoch=epoch))
        if on_epoch:
            on_epoch(epoch, base)
    return base, history


STRATEGY_RUNNERS = {
    Strategy.BASELINE: keep_baseline,
    Strategy.BASELINE_EXTRA_STEPS: train_baseline_extra,
    Strategy.ST_UT: train_st_ut,
    Strategy.ST_PT: train_st_pt,
}


def run_strategy(strategy, base, X, Y, dev, cfg, unmt=None, on_epoch=None, on_record=None, show_progress=None):
    """Dispatch one strategy; callbacks receive (epoch, snapshot) and each SyntheticRecord."""
    runner = STRATEGY_RUNNERS[Strategy(strategy)]
    return runner(base, X, Y, dev, cfg, unmt=unmt, on_epoch=on_epoch, on_record=on_record, show_progress=show_progress)
