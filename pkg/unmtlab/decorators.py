# unmtlab/decorators.py

import logging
from functools import wraps

import click
from pydantic import ValidationError

from unmtlab.config import config_class
from unmtlab.utils.presets import get_preset, load_config

# Command flags that replace the ExperimentConfig field of the same name.
OVERRIDE_FIELDS = ('seeds', 'strategies', 'out_dir', 'workers', 'n_x', 'n_y')


def config_required(fn):
    """
    Resolve --preset / --config into a validated ExperimentConfig passed as `cfg`.

    Flags named in OVERRIDE_FIELDS are applied on top of the loaded document.
    """
    @click.option('--preset', default=None, help="Preset name (default: UNMTLAB_PRESET).")
    @click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None,
                  help="ExperimentConfig JSON file; takes precedence over --preset.")
    @wraps(fn)
    def wrapper(*args, preset=None, config_path=None, **kwargs):
        overrides = {}
        for name in OVERRIDE_FIELDS:
            if name in kwargs:
                value = kwargs.pop(name)
                if value not in (None, ()):
                    overrides[name] = list(value) if isinstance(value, tuple) else value
        try:
            if config_path:
                cfg = load_config(config_path, overrides)
            else:
                cfg = get_preset(preset or config_class.PRESET, overrides)
        except (KeyError, ValueError, ValidationError) as e:
            raise click.BadParameter(str(e), param_hint='--config/--preset')
        return fn(*args, cfg=cfg, **kwargs)
    return wrapper


def logged_command(fn):
    """Log unexpected failures and exit with status 1."""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit):
            raise
        except Exception as e:
            logging.exception(f"❌ {fn.__name__} failed: {e}")
            raise click.exceptions.Exit(1)
    return wrapper
