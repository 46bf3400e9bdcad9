# unmtlab/commands/training.py

import logging
import os

import click
import msgspec

from unmtlab.commands.data import write_bundle
from unmtlab.decorators import config_required, logged_command
from unmtlab.harness import output_dir, prepare_data, seeded
from unmtlab.helpers import ensure_dir, write_json
from unmtlab.models import Direction, Strategy
from unmtlab.selftrain import dump_synthetic_record, run_strategy
from unmtlab.unmt import evaluate, train_unmt


@click.command('train')
@click.option('--seed', 'seed', type=int, required=True, help="Seed for corpora, initialisation and batching.")
@click.option('--strategy', type=click.Choice([s.value for s in Strategy]), default=None,
              help="Strategy applied after baseline training; defaults to the config's selftrain.strategy.")
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option('--dump-synthetic/--no-dump-synthetic', default=False, help="Write every synthetic record.")
@config_required
@logged_command
def train(cfg, seed, strategy, out, dump_synthetic):
    """Train the baseline model for one seed, then one strategy from it."""
    strategy = strategy or cfg.selftrain.strategy
    directory = ensure_dir(out or os.path.join(output_dir(cfg, 'train'), f"{strategy}_seed_{seed}"))
    unmt, selftrain = seeded(cfg, seed)
    data = prepare_data(cfg, seed)
    write_bundle(data, os.path.join(directory, 'data'))

    base, unmt_history = train_unmt(unmt, data.X, data.Y, data.dev, data.vocab)
    base.save(os.path.join(directory, 'm0.npz'))
    unmt_history.to_csv(os.path.join(directory, 'unmt_history.csv'))

    on_record = None
    if dump_synthetic:
        def on_record(record):
            dump_synthetic_record(record, data.vocab, os.path.join(directory, f"synthetic_epoch_{record.epoch}"))

    model, history = run_strategy(strategy, base, data.X, data.Y, data.dev, selftrain, unmt=unmt, on_record=on_record)
    model.save(os.path.join(directory, 'model.npz'))
    write_json(os.path.join(directory, 'selftrain_history.json'), history)

    scores = evaluate(model, data.test)
    summary = {
        'strategy': strategy,
        'seed': seed,
        'base_model_id': base.model_id,
        'model_id': model.model_id,
        'bleu': {d.value: msgspec.structs.asdict(scores[d]) for d in (Direction.L1_TO_L2, Direction.L2_TO_L1)},
    }
    write_json(os.path.join(directory, 'test_bleu.json'), summary)
    logging.info(
        f"✅ {strategy} seed {seed}: test BLEU {scores[Direction.L1_TO_L2].score:.2f} (L1->L2) "
        f"{scores[Direction.L2_TO_L1].score:.2f} (L2->L1)"
    )
    click.echo(msgspec.json.encode(summary).decode('utf-8'))
