# unmtlab/commands/experiments.py

import logging
import os

import click

from unmtlab.checks import epoch_checks, grid_checks, log_checks, ratio_checks, strategy_checks
from unmtlab.decorators import config_required, logged_command
from unmtlab.harness import (
    emit_report,
    output_dir,
    run_datasize_grid,
    run_experiment,
    sweep_epochs,
    sweep_ratio,
)
from unmtlab.helpers import ensure_dir, write_json
from unmtlab.models import Strategy


def _common(fn):
    fn = click.option('--workers', type=int, default=None, help="Worker processes (default: UNMTLAB_WORKERS).")(fn)
    fn = click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help="Output directory.")(fn)
    fn = click.option('--seed', 'seeds', type=int, multiple=True, help="Seed to run; repeat for several.")(fn)
    return fn


def _emit_table(table, directory, name):
    directory = ensure_dir(directory)
    csv_path = os.path.join(directory, f"{name}.csv")
    table.to_frame().to_csv(csv_path, index=False, float_format='%.4f')
    json_path = write_json(os.path.join(directory, f"{name}.json"), table)
    logging.info(f"✅ Wrote {csv_path} and {json_path}")
    return csv_path, json_path


def _report_checks(acceptance, directory):
    """Log the acceptance checks and write them next to the results; they never change the exit code."""
    log_checks(acceptance)
    write_json(os.path.join(ensure_dir(directory), 'acceptance.json'), acceptance)


def _finish(ok):
    if not ok:
        logging.error("❌ Some cells failed; see the report for details.")
        raise click.exceptions.Exit(1)


def _parse_cell(value):
    try:
        n_x, n_y = value.lower().split('x')
        return int(n_x), int(n_y)
    except ValueError:
        raise click.BadParameter(f"expected NXxNY (e.g. 20000x1000), got {value!r}", param_hint='--cell')


@click.command('experiment')
@_common
@click.option('--strategy', 'strategies', type=click.Choice([s.value for s in Strategy]), multiple=True,
              help="Strategy to run; repeat for several (default: from the config).")
@config_required
@logged_command
def experiment(cfg):
    """Compare strategies on the configured scenario and test significance."""
    report = run_experiment(cfg)
    directory = output_dir(cfg, 'experiment')
    emit_report(report, directory)
    for summary in report.summaries:
        click.echo(f"{summary.arm:>22}  L1->L2 {_fmt(summary.mean_xy, summary.std_xy)}  L2->L1 {_fmt(summary.mean_yx, summary.std_yx)}")
    _report_checks(strategy_checks(report), directory)
    _finish(report.ok)


@click.command('grid')
@_common
@click.option('--cell', 'cells', multiple=True, help="Corpus sizes as NXxNY; repeat for several.")
@config_required
@logged_command
def grid(cfg, cells):
    """Baseline BLEU across corpus-size cells."""
    table = run_datasize_grid(cfg, [_parse_cell(c) for c in cells] or None)
    directory = output_dir(cfg, 'grid')
    _emit_table(table, directory, 'datasize_grid')
    for row in table.rows:
        click.echo(f"{row.n_x:>6} / {row.n_y:<6} {row.direction}  {_fmt(row.bleu_mean, row.bleu_std)}")
    _report_checks(grid_checks(table), directory)
    _finish(table.ok)


@click.command('sweep-ratio')
@_common
@click.option('--ratio', 'ratios', type=float, multiple=True, help="Quantity ratio; repeat for several.")
@config_required
@logged_command
def sweep_ratio_cmd(cfg, ratios):
    """One-epoch self-training BLEU across quantity ratios."""
    table, report = sweep_ratio(cfg, list(ratios) or None)
    directory = output_dir(cfg, 'sweep_ratio')
    _emit_table(table, directory, 'sweep_ratio')
    emit_report(report, directory)
    _report_checks(ratio_checks(table), directory)
    _finish(table.ok)


@click.command('sweep-epochs')
@_common
@click.option('--max-epochs', type=int, default=None, help="Epochs to run (default: from the config).")
@config_required
@logged_command
def sweep_epochs_cmd(cfg, max_epochs):
    """BLEU after every self-training epoch."""
    table, report = sweep_epochs(cfg, max_epochs)
    directory = output_dir(cfg, 'sweep_epochs')
    _emit_table(table, directory, 'sweep_epochs')
    emit_report(report, directory)
    _report_checks(epoch_checks(table), directory)
    _finish(table.ok)


def _fmt(mean, std):
    if mean is None:
        return '   n/a'
    return f"{mean:6.2f} ± {std:.2f}"
