import logging

import click

from unmtlab.config import config_class
from unmtlab.commands.data import gen
from unmtlab.commands.experiments import experiment, grid, sweep_epochs_cmd, sweep_ratio_cmd
from unmtlab.commands.scoring import bleu_cmd, signif
from unmtlab.commands.training import train


def create_app():
    """Create and configure the command-line app."""
    # Configure logging
    logging.basicConfig(level=config_class.LOG_LEVEL, format='%(asctime)s - %(levelname)s - %(message)s')

    @click.group()
    @click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR']), default=None,
                  help="Override UNMTLAB_LOG_LEVEL for this run.")
    def cli(log_level):
        """Unsupervised translation lab: toy languages, UNMT and self-training."""
        if log_level:
            logging.getLogger().setLevel(log_level)

    # Register commands
    for command in (gen, train, experiment, grid, sweep_ratio_cmd, sweep_epochs_cmd, bleu_cmd, signif):
        cli.add_command(command)

    return cli


if __name__ == '__main__':
    create_app()()
