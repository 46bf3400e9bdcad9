# unmtlab/unmt.py
#
# Baseline unsupervised trainer: a denoising auto-encoder warm-start followed by
# joint steps of denoising plus online back-translation in both directions.

import logging
from typing import Dict, List, Optional

import msgspec
import numpy as np
import pandas as pd
from tqdm import tqdm

from unmtlab.errors import SpecValidationError
from unmtlab.helpers import derive_rng, progress_enabled
from unmtlab.models import Direction, Lang, ModelDims
from unmtlab.seq2seq import adam_step, clip_gradients, forward_loss, init_model, init_opt, wrap
from unmtlab.utils.bleu import bleu
from unmtlab.utils.corpus import BatchStream
from unmtlab.utils.noise import noise_batch

HISTORY_COLUMNS = ['step', 'dae_loss_x', 'dae_loss_y', 'bt_loss_xy', 'bt_loss_yx', 'bleu_xy', 'bleu_yx']


class HistoryEntry(msgspec.Struct, frozen=True):
    step: int
    dae_loss_x: Optional[float] = None
    dae_loss_y: Optional[float] = None
    bt_loss_xy: Optional[float] = None
    bt_loss_yx: Optional[float] = None
    bleu_xy: Optional[float] = None
    bleu_yx: Optional[float] = None


class TrainHistory(msgspec.Struct):
    entries: List[HistoryEntry] = msgspec.field(default_factory=list)
    term_counts: Dict[str, int] = msgspec.field(default_factory=dict)

    def append(self, entry):
        if self.entries and entry.step <= self.entries[-1].step:
            raise SpecValidationError('step', f"history steps must increase, got {entry.step} after {self.entries[-1].step}")
        self.entries.append(entry)

    def count(self, term, n=1):
        self.term_counts[term] = self.term_counts.get(term, 0) + n

    def to_frame(self):
        return pd.DataFrame([msgspec.structs.asdict(e) for e in self.entries], columns=HISTORY_COLUMNS)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.4f')
        return path


# ----------------------------
# Single steps
# ----------------------------
def supervised_update(model, opt, sources, targets, target_lang, clip_norm=None):
    """One optimizer step maximising log P(targets | sources) toward target_lang."""
    loss, grads = forward_loss(model, sources, [wrap(t) for t in targets], target_lang)
    opt, model = adam_step(opt, model, clip_gradients(grads, clip_norm))
    return model, opt, loss


def dae_step(model, opt, batch, noise, rng, clip_norm=None):
    """Reconstruct each sentence of a monolingual batch from its noised copy."""
    if batch.targets is not None:
        raise SpecValidationError('batch', "denoising needs a monolingual batch")
    noisy = noise_batch(batch.sources, noise, rng)
    return supervised_update(model, opt, noisy, batch.sources, batch.src_lang, clip_norm)


def backtranslation_step(model, opt, batch_x, batch_y, clip_norm=None, max_len=None, generator=None):
    """
    Online back-translation for both directions.

    Pseudo-sources come from the parameters as they were before this step (or
    from `generator` when given); no gradient flows through generation.
    """
    if batch_x.src_lang is not Lang.L1 or batch_y.src_lang is not Lang.L2:
        raise SpecValidationError('batch_x', "expected an L1 batch and an L2 batch")
    generator = generator or model
    y_hat = generator.translate(batch_x.sources, Lang.L2, max_len)
    x_hat = generator.translate(batch_y.sources, Lang.L1, max_len)
    model, opt, loss_xy = supervised_update(model, opt, y_hat, batch_x.sources, Lang.L1, clip_norm)
    model, opt, loss_yx = supervised_update(model, opt, x_hat, batch_y.sources, Lang.L2, clip_norm)
    return model, opt, (loss_xy, loss_yx)


# ----------------------------
# Evaluation
# ----------------------------
def translate_both(model, parallel):
    """Hypotheses for both directions of an L1->L2 reference corpus."""
    hyp_xy = model.translate(parallel.sources, parallel.tgt_lang)
    hyp_yx = model.translate(parallel.targets, parallel.src_lang)
    return hyp_xy, hyp_yx


def evaluate(model, parallel):
    hyp_xy, hyp_yx = translate_both(model, parallel)
    return {
        Direction.L1_TO_L2: bleu(hyp_xy, parallel.targets),
        Direction.L2_TO_L1: bleu(hyp_yx, parallel.sources),
    }


# ----------------------------
# Trainer
# ----------------------------
def _mean(values):
    return float(np.mean(values)) if values else None


class UnmtTrainer:
    """
    Owns one model, its optimizer state and the four monolingual batch streams.

    `y_bt_corpus` replaces the pool the L2 back-translation batches are drawn
    from; denoising always uses the natural corpora.
    """

    def __init__(self, config, X, Y, model, opt=None, seed=None, y_bt_corpus=None, show_progress=None):
        self.config = config
        self.model = model
        self.opt = opt or init_opt(model, config.optimizer)
        seed = config.seed if seed is None else seed
        budget = config.batch_size_tokens
        self.streams = {
            'dae_x': BatchStream(X, budget, seed, 'dae_x'),
            'dae_y': BatchStream(Y, budget, seed, 'dae_y'),
            'bt_x': BatchStream(X, budget, seed, 'bt_x'),
            'bt_y': BatchStream(Y if y_bt_corpus is None else y_bt_corpus, budget, seed, 'bt_y'),
        }
        self.rng = derive_rng(seed, 'noise')
        self.history = TrainHistory()
        self.steps_done = 0
        self.show_progress = progress_enabled(show_progress)
        self._losses = {name: [] for name in HISTORY_COLUMNS[1:5]}

    @property
    def clip_norm(self):
        return self.config.optimizer.clip_norm

    def _dae(self, stream, loss_key, term):
        self.model, self.opt, loss = dae_step(
            self.model, self.opt, next(self.streams[stream]), self.config.noise, self.rng, self.clip_norm
        )
        self._losses[loss_key].append(loss)
        self.history.count(term)

    def warmstart(self, steps, dev=None, desc='DAE warm-start'):
        """DAE-only steps, alternating languages."""
        for i in tqdm(range(steps), desc=desc, disable=not self.show_progress):
            if i % 2 == 0:
                self._dae('dae_x', 'dae_loss_x', 'dae_l1')
            else:
                self._dae('dae_y', 'dae_loss_y', 'dae_l2')
            self._advance(dev)

    def joint(self, steps, dev=None, desc='DAE + back-translation'):
        """Each joint step: DAE on X, DAE on Y, then back-translation of an X and a Y batch."""
        for _ in tqdm(range(steps), desc=desc, disable=not self.show_progress):
            self._dae('dae_x', 'dae_loss_x', 'dae_l1')
            self._dae('dae_y', 'dae_loss_y', 'dae_l2')
            self.model, self.opt, (loss_xy, loss_yx) = backtranslation_step(
                self.model, self.opt,
                next(self.streams['bt_x']), next(self.streams['bt_y']),
                clip_norm=self.clip_norm,
            )
            self._losses['bt_loss_xy'].append(loss_xy)
            self._losses['bt_loss_yx'].append(loss_yx)
            self.history.count('bt_xy')
            self.history.count('bt_yx')
            self._advance(dev)

    def _advance(self, dev):
        self.steps_done += 1
        if dev is not None and self.steps_done % self.config.eval_every == 0:
            self.record(dev)

    def record(self, dev=None):
        """Close the current logging window with mean losses and dev BLEU."""
        if self.history.entries and self.history.entries[-1].step == self.steps_done:
            return self.history.entries[-1]
        bleu_xy = bleu_yx = None
        if dev is not None and len(dev):
            scores = evaluate(self.model, dev)
            bleu_xy = scores[Direction.L1_TO_L2].score
            bleu_yx = scores[Direction.L2_TO_L1].score
        entry = HistoryEntry(
            step=self.steps_done,
            bleu_xy=bleu_xy,
            bleu_yx=bleu_yx,
            **{key: _mean(values) for key, values in self._losses.items()},
        )
        self.history.append(entry)
        self._losses = {name: [] for name in self._losses}
        logging.info(
            f"🔍 step {entry.step}: dae {_fmt(entry.dae_loss_x)}/{_fmt(entry.dae_loss_y)} "
            f"bt {_fmt(entry.bt_loss_xy)}/{_fmt(entry.bt_loss_yx)} "
            f"dev BLEU {_fmt(bleu_xy)}/{_fmt(bleu_yx)}"
        )
        return entry

    def log_stream_usage(self):
        usage = ', '.join(f"{name} {stream.passes:.2f} passes" for name, stream in self.streams.items())
        logging.info(f"🔄 Corpus usage: {usage}")


def _fmt(value):
    return '-' if value is None else f"{value:.3f}"


def model_dims(config, vocab_size):
    return ModelDims(
        vocab_size=vocab_size,
        embed_dim=config.embed_dim,
        hidden_dim=config.hidden_dim,
        max_decode_len=config.max_decode_len,
    )


def train_unmt(config, X, Y, dev, vocab, show_progress=None):
    """
    Train the baseline model M0 from monolingual corpora only.

    Runs `warmstart_steps` DAE steps, then `bt_steps` joint steps; returns the
    final snapshot and the training history.
    """
    if len(X) == 0:
        raise SpecValidationError('X', "monolingual corpus is empty")
    if len(Y) == 0:
        raise SpecValidationError('Y', "monolingual corpus is empty")

    model = init_model(model_dims(config, len(vocab)), config.seed)
    trainer = UnmtTrainer(config, X, Y, model, show_progress=show_progress)
    logging.info(
        f"✅ Training UNMT on |X|={len(X)} |Y|={len(Y)}: "
        f"{config.warmstart_steps} warm-start + {config.bt_steps} joint steps"
    )
    trainer.warmstart(config.warmstart_steps, dev)
    trainer.joint(config.bt_steps, dev)
    trainer.record(dev)
    trainer.log_stream_usage()
    return trainer.model, trainer.history


def train_supervised(model, parallel, steps, config, seed=0, show_progress=None):
    """
    Supervised training on parallel pairs, both directions per step.

    Used for the fully supervised ceiling and overfitting checks.
    """
    opt = init_opt(model, config.optimizer)
    stream = BatchStream(parallel, config.batch_size_tokens, seed, 'supervised')
    rev_lang, fwd_lang = parallel.src_lang, parallel.tgt_lang
    losses = []
    for _ in tqdm(range(steps), desc='supervised', disable=not progress_enabled(show_progress)):
        batch = next(stream)
        model, opt, loss_fwd = supervised_update(model, opt, batch.sources, batch.targets, fwd_lang, config.optimizer.clip_norm)
        model, opt, loss_rev = supervised_update(model, opt, batch.targets, batch.sources, rev_lang, config.optimizer.clip_norm)
        losses.append((loss_fwd, loss_rev))
    return model, losses
