# unmtlab/commands/scoring.py

import click
import msgspec

from unmtlab.decorators import logged_command
from unmtlab.helpers import read_lines
from unmtlab.utils.bleu import bleu, paired_bootstrap

FILE = click.Path(exists=True, dir_okay=False)


@click.command('bleu')
@click.argument('hypotheses', type=FILE)
@click.argument('references', type=FILE)
@logged_command
def bleu_cmd(hypotheses, references):
    """Corpus BLEU-4 of a hypothesis file against a reference file."""
    report = bleu(read_lines(hypotheses), read_lines(references))
    click.echo(msgspec.json.encode(report).decode('utf-8'))


@click.command('signif')
@click.argument('hyp_a', type=FILE)
@click.argument('hyp_b', type=FILE)
@click.argument('references', type=FILE)
@click.option('--samples', type=int, default=1000, show_default=True, help="Bootstrap resamples.")
@click.option('--seed', type=int, default=0, show_default=True, help="Resampling seed.")
@logged_command
def signif(hyp_a, hyp_b, references, samples, seed):
    """Paired bootstrap test: is system A better than system B?"""
    result = paired_bootstrap(
        read_lines(hyp_a), read_lines(hyp_b), read_lines(references),
        samples=samples, seed=seed, system_a=hyp_a, system_b=hyp_b,
    )
    click.echo(msgspec.json.encode(result).decode('utf-8'))
