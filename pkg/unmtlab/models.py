# unmtlab/models.py
#
# Configuration and spec models. Every model validates its own fields, so a bad
# value fails with a pydantic ValidationError that names the offending field.

from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Decoding must be able to emit the longest sentence plus room for EOS.
DECODE_MARGIN = 2

ANCHOR_SLOT = '#'
CONTENT_SLOTS = ('N', 'V', 'A', 'D')

DEFAULT_TEMPLATES = [
    'A N V N #',
    'N V A N #',
    '# A N V D',
    'A N V A N #',
    'N D V N # #',
    '# N V N D',
]


class Lang(str, Enum):
    L1 = 'l1'
    L2 = 'l2'

    @property
    def tag(self):
        return f"<{self.value}>"

    @property
    def other(self):
        return Lang.L2 if self is Lang.L1 else Lang.L1


class Direction(str, Enum):
    L1_TO_L2 = 'L1->L2'
    L2_TO_L1 = 'L2->L1'

    @property
    def source(self):
        return Lang.L1 if self is Direction.L1_TO_L2 else Lang.L2

    @property
    def target(self):
        return self.source.other

    @classmethod
    def towards(cls, target):
        return cls.L1_TO_L2 if Lang(target) is Lang.L2 else cls.L2_TO_L1


class Strategy(str, Enum):
    BASELINE = 'baseline'
    BASELINE_EXTRA_STEPS = 'baseline_extra_steps'
    ST_UT = 'ST_UT'
    ST_PT = 'ST_PT'


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


# ----------------------------
# Synthetic language pair
# ----------------------------
class LanguagePairSpec(_Frozen):
    content_vocab_size: int = Field(60, ge=10)
    anchor_vocab_size: int = Field(8, ge=1)
    reorder_window: int = Field(2, ge=0)
    grammar_templates: List[str] = Field(default_factory=lambda: list(DEFAULT_TEMPLATES), min_length=1)
    max_sentence_len: int = Field(12, ge=1, le=50)
    seed: int = 7

    @field_validator('grammar_templates')
    @classmethod
    def _check_templates(cls, templates):
        allowed = set(CONTENT_SLOTS) | {ANCHOR_SLOT}
        for template in templates:
            slots = template.split()
            if not slots:
                raise ValueError("empty grammar template")
            unknown = set(slots) - allowed
            if unknown:
                raise ValueError(f"template {template!r} uses unknown slots {sorted(unknown)}")
            if ANCHOR_SLOT not in slots:
                raise ValueError(f"template {template!r} has no anchor slot '{ANCHOR_SLOT}'")
        return templates

    @property
    def longest_sentence(self):
        """Reordering keeps length, so no sentence is longer than the longest template."""
        return max(len(t.split()) for t in self.grammar_templates)

    @model_validator(mode='after')
    def _templates_fit(self):
        longest = self.longest_sentence
        if longest > self.max_sentence_len:
            raise ValueError(
                f"grammar_templates: a template has {longest} slots, "
                f"over max_sentence_len={self.max_sentence_len}"
            )
        return self


# ----------------------------
# Noise, model and optimizer
# ----------------------------
class NoiseSpec(_Frozen):
    p_drop: float = Field(0.1, ge=0.0, le=1.0)
    p_blank: float = Field(0.1, ge=0.0, le=1.0)
    shuffle_k: int = Field(3, ge=0)

    @model_validator(mode='after')
    def _total_probability(self):
        if self.p_drop + self.p_blank > 1.0:
            raise ValueError(f"p_drop + p_blank must be <= 1, got {self.p_drop + self.p_blank}")
        return self


class ModelDims(_Frozen):
    vocab_size: int = Field(ge=7)
    embed_dim: int = Field(32, ge=1)
    hidden_dim: int = Field(64, ge=1)
    max_decode_len: int = Field(16, ge=1)


class OptimizerSettings(_Frozen):
    lr: float = Field(3e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.98, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    clip_norm: Optional[float] = Field(5.0, gt=0.0)


class UnmtConfig(_Frozen):
    warmstart_steps: int = Field(500, ge=0)
    bt_steps: int = Field(3000, ge=0)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    batch_size_tokens: int = Field(500, ge=1)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    eval_every: int = Field(500, gt=0)
    embed_dim: int = Field(32, ge=1)
    hidden_dim: int = Field(64, ge=1)
    max_decode_len: int = Field(16, ge=1)
    seed: int = 0


class SelfTrainConfig(_Frozen):
    strategy: Literal['ST_UT', 'ST_PT'] = 'ST_PT'
    epsilon: float = Field(0.10, gt=0.0, le=1.0)
    max_epochs: int = Field(2, ge=1)
    steps_per_epoch: int = Field(1500, ge=1)
    warm_start: Literal['continue', 'reinit'] = 'continue'
    seed: int = 0


# ----------------------------
# Experiments
# ----------------------------
class ExperimentConfig(_Frozen):
    pair: LanguagePairSpec = Field(default_factory=LanguagePairSpec)
    n_x: int = Field(20000, ge=1)
    n_y: int = Field(1000, ge=1)
    n_test: int = Field(500, ge=1)
    n_dev: int = Field(200, ge=1)
    max_len: int = Field(50, ge=1)
    unmt: UnmtConfig = Field(default_factory=UnmtConfig)
    selftrain: SelfTrainConfig = Field(default_factory=SelfTrainConfig)
    strategies: List[Strategy] = Field(
        default_factory=lambda: [Strategy.BASELINE, Strategy.BASELINE_EXTRA_STEPS, Strategy.ST_UT, Strategy.ST_PT],
        min_length=1,
    )
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3], min_length=1)
    bootstrap_samples: int = Field(1000, ge=1000)
    out_dir: Optional[str] = None
    workers: int = Field(1, ge=1)

    @field_validator('strategies')
    @classmethod
    def _unique_strategies(cls, strategies):
        if len(set(strategies)) != len(strategies):
            raise ValueError("strategies must not repeat")
        return strategies

    @model_validator(mode='after')
    def _decoder_fits_sentences(self):
        needed = self.pair.longest_sentence + DECODE_MARGIN
        if self.unmt.max_decode_len < needed:
            raise ValueError(
                f"unmt.max_decode_len: {self.unmt.max_decode_len} would truncate translations; "
                f"the longest sentence has {self.pair.longest_sentence} tokens, so at least {needed} is needed"
            )
        return self
