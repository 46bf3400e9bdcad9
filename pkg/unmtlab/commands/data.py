# unmtlab/commands/data.py

import logging
import os

import click

from unmtlab.decorators import config_required, logged_command
from unmtlab.harness import output_dir, prepare_data
from unmtlab.helpers import ensure_dir, write_lines
from unmtlab.utils.corpus import decode_corpus


def write_bundle(data, directory):
    """Pair manifest, vocabulary and the six corpus files of one seed."""
    directory = ensure_dir(directory)
    paths = [
        data.pair.save(os.path.join(directory, 'pair.json')),
        data.vocab.save(os.path.join(directory, 'vocab.txt')),
    ]
    X, Y = decode_corpus(data.X, data.vocab), decode_corpus(data.Y, data.vocab)
    paths.append(write_lines(os.path.join(directory, f"train.{X.lang.value}"), X.sentences))
    paths.append(write_lines(os.path.join(directory, f"train.{Y.lang.value}"), Y.sentences))
    for name, corpus in (('test', data.test), ('dev', data.dev)):
        corpus = decode_corpus(corpus, data.vocab)
        paths.append(write_lines(os.path.join(directory, f"{name}.{corpus.src_lang.value}"), corpus.sources))
        paths.append(write_lines(os.path.join(directory, f"{name}.{corpus.tgt_lang.value}"), corpus.targets))
    return paths


@click.command('gen')
@click.option('--seed', 'seed', type=int, required=True, help="Corpus seed.")
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option('--n-x', 'n_x', type=int, default=None, help="Size of the L1 corpus X.")
@click.option('--n-y', 'n_y', type=int, default=None, help="Size of the L2 corpus Y.")
@config_required
@logged_command
def gen(cfg, seed, out):
    """Generate the language pair, vocabulary and corpora for one seed."""
    data = prepare_data(cfg, seed)
    directory = out or os.path.join(output_dir(cfg, 'data'), f"seed_{seed}")
    paths = write_bundle(data, directory)
    logging.info(f"✅ Wrote {len(paths)} files to {directory}")
    click.echo(directory)
