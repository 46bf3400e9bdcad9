# unmtlab/harness.py
#
# Experiment runner. Every seed generates its own corpora and trains one
# baseline model; every strategy arm of that seed branches from the same
# snapshot. Seeds (and grid cells) are independent and may run in worker
# processes.

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import msgspec
import numpy as np
import pandas as pd

from unmtlab.config import config_class
from unmtlab.helpers import ensure_dir, write_json
from unmtlab.models import Direction, Strategy
from unmtlab.selftrain import SelfTrainHistory, run_strategy
from unmtlab.unmt import evaluate, translate_both, train_unmt
from unmtlab.utils.bleu import SignificanceResult, paired_bootstrap
from unmtlab.utils.corpus import build_vocab, clean, encode_corpus
from unmtlab.utils.toylang import generate_corpora, generate_language_pair, split_parallel

DEFAULT_RATIOS = [0.01, 0.05, 0.10, 0.30, 0.50, 1.00]
DEFAULT_GRID = [(20000, 20000), (10000, 10000), (20000, 1000), (1000, 20000), (1000, 1000)]

REPORT_COLUMNS = ['arm', 'strategy', 'epsilon', 'seed', 'direction', 'epoch', 'bleu', 'status']
GRID_COLUMNS = ['n_x', 'n_y', 'ratio', 'direction', 'seeds', 'bleu_mean', 'bleu_std']
SWEEP_COLUMNS = ['arm', 'strategy', 'epsilon', 'epoch', 'direction', 'seeds', 'bleu_mean', 'bleu_std']

DIRECTIONS = (Direction.L1_TO_L2, Direction.L2_TO_L1)


# ----------------------------
# Report types
# ----------------------------
class EpochScore(msgspec.Struct, frozen=True):
    epoch: int
    bleu_xy: Optional[float] = None
    bleu_yx: Optional[float] = None


class CellResult(msgspec.Struct):
    arm: str
    strategy: str
    seed: int
    epsilon: float
    epochs: int
    status: str = 'ok'
    bleu_xy: Optional[float] = None
    bleu_yx: Optional[float] = None
    scores: List[EpochScore] = msgspec.field(default_factory=list)
    history: Optional[SelfTrainHistory] = None
    base_model_id: Optional[str] = None
    model_id: Optional[str] = None
    optimizer_steps: int = 0
    wall_time: float = 0.0
    error: Optional[str] = None


class ArmSummary(msgspec.Struct, frozen=True):
    arm: str
    strategy: str
    seeds_ok: int
    mean_xy: Optional[float] = None
    std_xy: Optional[float] = None
    mean_yx: Optional[float] = None
    std_yx: Optional[float] = None


class SignificanceEntry(msgspec.Struct, frozen=True):
    arm: str
    direction: str
    result: SignificanceResult


class ExperimentReport(msgspec.Struct):
    config: Dict[str, Any]
    cells: List[CellResult] = msgspec.field(default_factory=list)
    summaries: List[ArmSummary] = msgspec.field(default_factory=list)
    significance: List[SignificanceEntry] = msgspec.field(default_factory=list)

    @property
    def ok(self):
        return all(cell.status == 'ok' for cell in self.cells)

    def to_frame(self):
        rows = []
        for cell in self.cells:
            by_epoch = {s.epoch: s for s in cell.scores}
            for direction in DIRECTIONS:
                for epoch in range(cell.epochs + 1):
                    score = by_epoch.get(epoch)
                    value = None
                    if score is not None:
                        value = score.bleu_xy if direction is Direction.L1_TO_L2 else score.bleu_yx
                    rows.append({
                        'arm': cell.arm,
                        'strategy': cell.strategy,
                        'epsilon': cell.epsilon,
                        'seed': cell.seed,
                        'direction': direction.value,
                        'epoch': epoch,
                        'bleu': value,
                        'status': cell.status,
                    })
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)


class GridCell(msgspec.Struct, frozen=True):
    n_x: int
    n_y: int
    seed: int
    status: str = 'ok'
    bleu_xy: Optional[float] = None
    bleu_yx: Optional[float] = None
    error: Optional[str] = None


class TableRow(msgspec.Struct, frozen=True):
    direction: str
    seeds: int
    bleu_mean: Optional[float]
    bleu_std: Optional[float]
    n_x: Optional[int] = None
    n_y: Optional[int] = None
    ratio: Optional[float] = None
    arm: Optional[str] = None
    strategy: Optional[str] = None
    epsilon: Optional[float] = None
    epoch: Optional[int] = None


class ResultTable(msgspec.Struct):
    kind: str
    columns: List[str]
    rows: List[TableRow] = msgspec.field(default_factory=list)
    errors: List[str] = msgspec.field(default_factory=list)

    @property
    def ok(self):
        return not self.errors

    def to_frame(self):
        return pd.DataFrame([msgspec.structs.asdict(r) for r in self.rows], columns=self.columns)


# ----------------------------
# Data preparation
# ----------------------------
@dataclass(frozen=True)
class DataBundle:
    pair: Any
    vocab: Any
    X: Any
    Y: Any
    dev: Any
    test: Any


def prepare_data(cfg, seed, n_x=None, n_y=None):
    """Corpora for one seed: cleaned, encoded with a vocabulary built over X and Y."""
    pair = generate_language_pair(cfg.pair)
    X, Y, held_out = generate_corpora(
        pair,
        cfg.n_x if n_x is None else n_x,
        cfg.n_y if n_y is None else n_y,
        cfg.n_test + cfg.n_dev,
        seed,
    )
    test, dev = split_parallel(held_out, cfg.n_test)
    X, Y = clean(X, cfg.max_len), clean(Y, cfg.max_len)
    vocab = build_vocab([X, Y])
    return DataBundle(
        pair=pair,
        vocab=vocab,
        X=encode_corpus(X, vocab),
        Y=encode_corpus(Y, vocab),
        dev=encode_corpus(dev, vocab),
        test=encode_corpus(test, vocab),
    )


def seeded(cfg, seed):
    """UNMT and self-training configs of one experiment seed."""
    return (
        cfg.unmt.model_copy(update={'seed': seed}),
        cfg.selftrain.model_copy(update={'seed': seed}),
    )


# ----------------------------
# Arms and seed cells
# ----------------------------
@dataclass(frozen=True)
class Arm:
    label: str
    strategy: Strategy
    epsilon: float
    epochs: int


def strategy_arms(cfg):
    return [
        Arm(s.value, s, cfg.selftrain.epsilon, cfg.selftrain.max_epochs)
        for s in cfg.strategies
    ]


@dataclass
class SeedOutcome:
    seed: int
    cells: List[CellResult]
    # arm label -> (hyp L1->L2, hyp L2->L1) on the test set, plus the M0 hypotheses under 'M0'
    hypotheses: Dict[str, Tuple[list, list]]
    references: Tuple[list, list]


def _optimizer_steps(history):
    return int(sum(history.term_counts.values()))


def _run_arm(arm, base, data, unmt, selftrain, show_progress):
    cell = CellResult(
        arm=arm.label, strategy=arm.strategy.value, seed=selftrain.seed,
        epsilon=arm.epsilon, epochs=arm.epochs, base_model_id=base.model_id,
    )
    cache = {}

    def score_epoch(epoch, model):
        if model.model_id not in cache:
            scores = {d: r.score for d, r in evaluate(model, data.test).items()}
            cache[model.model_id] = scores
        scores = cache[model.model_id]
        cell.scores.append(EpochScore(epoch, scores[Direction.L1_TO_L2], scores[Direction.L2_TO_L1]))

    started = time.perf_counter()
    hypotheses = None
    try:
        cfg = selftrain.model_copy(update={'epsilon': arm.epsilon, 'max_epochs': arm.epochs})
        model, history = run_strategy(
            arm.strategy, base, data.X, data.Y, data.dev, cfg,
            unmt=unmt, on_epoch=score_epoch, show_progress=show_progress,
        )
        hypotheses = translate_both(model, data.test)
        cell.history = history
        cell.model_id = model.model_id
        cell.optimizer_steps = _optimizer_steps(history)
        cell.bleu_xy = cell.scores[-1].bleu_xy
        cell.bleu_yx = cell.scores[-1].bleu_yx
        logging.info(
            f"✅ {arm.label} seed {selftrain.seed}: BLEU {cell.bleu_xy:.2f} / {cell.bleu_yx:.2f} "
            f"after {cell.optimizer_steps} optimizer steps"
        )
    except Exception as e:
        logging.exception(f"❌ Cell {arm.label} seed {selftrain.seed} failed: {e}")
        cell.status = 'error'
        cell.error = f"{type(e).__name__}: {e}"
    cell.wall_time = time.perf_counter() - started
    return cell, hypotheses


def run_seed(cfg, seed, arms, show_progress=False):
    """Train M0 for one seed and run every arm from it."""
    unmt, selftrain = seeded(cfg, seed)
    hypotheses = {}
    references = ([], [])
    try:
        data = prepare_data(cfg, seed)
        base, unmt_history = train_unmt(unmt, data.X, data.Y, data.dev, data.vocab, show_progress=show_progress)
        references = (list(data.test.targets), list(data.test.sources))
        hypotheses['M0'] = translate_both(base, data.test)
        if cfg.out_dir:
            seed_dir = ensure_dir(os.path.join(cfg.out_dir, f"seed_{seed}"))
            base.save(os.path.join(seed_dir, 'm0.npz'))
            unmt_history.to_csv(os.path.join(seed_dir, 'unmt_history.csv'))
    except Exception as e:
        logging.exception(f"❌ Baseline training for seed {seed} failed: {e}")
        cells = [
            CellResult(
                arm=arm.label, strategy=arm.strategy.value, seed=seed, epsilon=arm.epsilon,
                epochs=arm.epochs, status='error', error=f"{type(e).__name__}: {e}",
            )
            for arm in arms
        ]
        return SeedOutcome(seed=seed, cells=cells, hypotheses={}, references=references)

    cells = []
    for arm in arms:
        cell, hyps = _run_arm(arm, base, data, unmt, selftrain, show_progress)
        cells.append(cell)
        if hyps is not None:
            hypotheses[arm.label] = hyps
    return SeedOutcome(seed=seed, cells=cells, hypotheses=hypotheses, references=references)


def _run_seed_job(job):
    cfg, seed, arms, show_progress = job
    return run_seed(cfg, seed, arms, show_progress)


def parallel_map(fn, jobs, workers):
    """Run jobs in order, in worker processes when workers > 1."""
    workers = min(workers, len(jobs))
    if workers <= 1:
        return [fn(job) for job in jobs]
    logging.info(f"🔄 Running {len(jobs)} cells on {workers} worker processes")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, jobs))


def _workers(cfg, workers):
    return cfg.workers if workers is None else workers


def _run_seeds(cfg, arms, workers, show_progress):
    workers = _workers(cfg, workers)
    show = show_progress if workers <= 1 else False
    jobs = [(cfg, seed, arms, show) for seed in cfg.seeds]
    return parallel_map(_run_seed_job, jobs, workers)


# ----------------------------
# Aggregation
# ----------------------------
def _mean_std(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std


def summarise(cells, arms):
    summaries = []
    for arm in arms:
        ok = [c for c in cells if c.arm == arm.label and c.status == 'ok']
        mean_xy, std_xy = _mean_std([c.bleu_xy for c in ok])
        mean_yx, std_yx = _mean_std([c.bleu_yx for c in ok])
        summaries.append(ArmSummary(
            arm=arm.label, strategy=arm.strategy.value, seeds_ok=len(ok),
            mean_xy=mean_xy, std_xy=std_xy, mean_yx=mean_yx, std_yx=std_yx,
        ))
    return summaries


def significance_vs_baseline(outcomes, arms, samples, seed=0):
    """
    Paired bootstrap of each arm against the shared baseline M0, pooling the
    test sets of every seed where both systems produced output.
    """
    entries = []
    for arm in arms:
        if arm.strategy is Strategy.BASELINE:
            continue
        for d, direction in enumerate(DIRECTIONS):
            hyp_a, hyp_b, refs = [], [], []
            for outcome in outcomes:
                if arm.label not in outcome.hypotheses or 'M0' not in outcome.hypotheses:
                    continue
                hyp_a.extend(outcome.hypotheses[arm.label][d])
                hyp_b.extend(outcome.hypotheses['M0'][d])
                refs.extend(outcome.references[d])
            if not refs:
                logging.warning(f"⚠️ No successful seeds to test {arm.label} {direction.value} against the baseline")
                continue
            result = paired_bootstrap(
                hyp_a, hyp_b, refs, samples=samples, seed=seed,
                system_a=arm.label, system_b=Strategy.BASELINE.value,
            )
            entries.append(SignificanceEntry(arm=arm.label, direction=direction.value, result=result))
    return entries


def _assemble(cfg, arms, outcomes):
    cells = [cell for outcome in outcomes for cell in outcome.cells]
    report = ExperimentReport(
        config=cfg.model_dump(mode='json'),
        cells=cells,
        summaries=summarise(cells, arms),
        significance=significance_vs_baseline(outcomes, arms, cfg.bootstrap_samples),
    )
    failed = [c for c in cells if c.status != 'ok']
    if failed:
        logging.error(f"❌ {len(failed)} of {len(cells)} cells failed")
    return report


# ----------------------------
# Public runners
# ----------------------------
def run_experiment(cfg, workers=None, show_progress=None):
    """All configured strategies for every seed, aggregated and significance-tested."""
    arms = strategy_arms(cfg)
    logging.info(f"🔍 Experiment: {len(arms)} strategies x {len(cfg.seeds)} seeds, |X|={cfg.n_x} |Y|={cfg.n_y}")
    outcomes = _run_seeds(cfg, arms, workers, show_progress)
    return _assemble(cfg, arms, outcomes)


def _grid_job(job):
    cfg, n_x, n_y, seed, show_progress = job
    unmt, _ = seeded(cfg, seed)
    try:
        data = prepare_data(cfg, seed, n_x=n_x, n_y=n_y)
        model, _ = train_unmt(unmt, data.X, data.Y, data.dev, data.vocab, show_progress=show_progress)
        scores = evaluate(model, data.test)
        return GridCell(
            n_x=n_x, n_y=n_y, seed=seed,
            bleu_xy=scores[Direction.L1_TO_L2].score,
            bleu_yx=scores[Direction.L2_TO_L1].score,
        )
    except Exception as e:
        logging.exception(f"❌ Grid cell {n_x}/{n_y} seed {seed} failed: {e}")
        return GridCell(n_x=n_x, n_y=n_y, seed=seed, status='error', error=f"{type(e).__name__}: {e}")


def run_datasize_grid(cfg, grid=None, workers=None, show_progress=None):
    """One baseline run per (|X|, |Y|) cell and seed; one row per cell and direction."""
    grid = DEFAULT_GRID if grid is None else [tuple(cell) for cell in grid]
    if not grid:
        raise ValueError("grid must contain at least one (n_x, n_y) cell")
    workers = _workers(cfg, workers)
    show = show_progress if workers <= 1 else False
    jobs = [(cfg, n_x, n_y, seed, show) for n_x, n_y in grid for seed in cfg.seeds]
    cells = parallel_map(_grid_job, jobs, workers)

    table = ResultTable(kind='datasize_grid', columns=GRID_COLUMNS)
    for n_x, n_y in grid:
        ok = [c for c in cells if (c.n_x, c.n_y) == (n_x, n_y) and c.status == 'ok']
        for direction in DIRECTIONS:
            values = [c.bleu_xy if direction is Direction.L1_TO_L2 else c.bleu_yx for c in ok]
            mean, std = _mean_std(values)
            table.rows.append(TableRow(
                n_x=n_x, n_y=n_y, ratio=n_x / n_y, direction=direction.value,
                seeds=len(ok), bleu_mean=mean, bleu_std=std,
            ))
    table.errors.extend(f"{c.n_x}/{c.n_y} seed {c.seed}: {c.error}" for c in cells if c.status != 'ok')
    return table


def _sweep_rows(table, report, arms, epochs):
    for arm in arms:
        ok = [c for c in report.cells if c.arm == arm.label and c.status == 'ok']
        for epoch in epochs:
            for direction in DIRECTIONS:
                values = []
                for cell in ok:
                    score = next((s for s in cell.scores if s.epoch == epoch), None)
                    if score is not None:
                        values.append(score.bleu_xy if direction is Direction.L1_TO_L2 else score.bleu_yx)
                mean, std = _mean_std(values)
                table.rows.append(TableRow(
                    arm=arm.label, strategy=arm.strategy.value, epsilon=arm.epsilon, epoch=epoch,
                    direction=direction.value, seeds=len(values), bleu_mean=mean, bleu_std=std,
                ))
    table.errors.extend(f"{c.arm} seed {c.seed}: {c.error}" for c in report.cells if c.status != 'ok')
    return table


def sweep_ratio(cfg, ratios=None, workers=None, show_progress=None):
    """
    One-epoch ST-UT and ST-PT runs per quantity ratio, next to the
    equal-budget baseline; one row per arm and direction.
    """
    ratios = DEFAULT_RATIOS if ratios is None else list(ratios)
    if not ratios:
        raise ValueError("ratios must not be empty")
    for r in ratios:
        if not 0.0 < r <= 1.0:
            raise ValueError(f"ratio {r} outside (0, 1]")
    arms = [Arm(Strategy.BASELINE_EXTRA_STEPS.value, Strategy.BASELINE_EXTRA_STEPS, cfg.selftrain.epsilon, 1)]
    for r in ratios:
        for strategy in (Strategy.ST_UT, Strategy.ST_PT):
            arms.append(Arm(f"{strategy.value}@{r:g}", strategy, r, 1))
    outcomes = _run_seeds(cfg, arms, workers, show_progress)
    report = _assemble(cfg, arms, outcomes)
    return _sweep_rows(ResultTable(kind='sweep_ratio', columns=SWEEP_COLUMNS), report, arms, [1]), report


def sweep_epochs(cfg, max_epochs=None, workers=None, show_progress=None):
    """BLEU after every epoch 0..max_epochs for the extra-steps baseline and both ST strategies."""
    max_epochs = cfg.selftrain.max_epochs if max_epochs is None else max_epochs
    if max_epochs < 1:
        raise ValueError(f"max_epochs must be at least 1, got {max_epochs}")
    arms = [
        Arm(s.value, s, cfg.selftrain.epsilon, max_epochs)
        for s in (Strategy.BASELINE_EXTRA_STEPS, Strategy.ST_UT, Strategy.ST_PT)
    ]
    outcomes = _run_seeds(cfg, arms, workers, show_progress)
    report = _assemble(cfg, arms, outcomes)
    table = ResultTable(kind='sweep_epochs', columns=SWEEP_COLUMNS)
    return _sweep_rows(table, report, arms, range(max_epochs + 1)), report


# ----------------------------
# Output
# ----------------------------
def emit_report(report, out_dir, formats=('csv', 'json'), name='report'):
    """Write report.csv (one row per arm, seed, direction and epoch) and/or report.json."""
    out_dir = ensure_dir(out_dir)
    paths = []
    try:
        if 'csv' in formats:
            path = os.path.join(out_dir, f"{name}.csv")
            report.to_frame().to_csv(path, index=False, float_format='%.4f')
            paths.append(path)
        if 'json' in formats:
            paths.append(write_json(os.path.join(out_dir, f"{name}.json"), report))
    except OSError as e:
        logging.error(f"❌ Could not write {name} to {out_dir}: {e}")
        raise
    for path in paths:
        logging.info(f"✅ Wrote {path}")
    return paths


def load_report(path):
    with open(path, 'rb') as f:
        return msgspec.json.decode(f.read(), type=ExperimentReport)


def output_dir(cfg, name):
    return cfg.out_dir or os.path.join(config_class.OUTPUT_ROOT, name)
