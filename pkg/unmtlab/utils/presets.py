import os
import logging
from difflib import get_close_matches  # Used for suggesting preset names

import msgspec
from pydantic import ValidationError

from unmtlab.config import config_class
from unmtlab.models import ExperimentConfig

PRESETS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')


# Load every experiment preset from presets/*.json
def load_presets():
    """
    Load the experiment presets stored next to this module.
    Returns:
        dict: preset name -> raw JSON document, or an empty dict if the folder is missing.
    """
    presets = {}
    logging.info(f"🔍 Looking for presets in: {PRESETS_DIR}")
    try:
        names = sorted(f for f in os.listdir(PRESETS_DIR) if f.endswith('.json'))
    except FileNotFoundError:
        logging.error(f"❌ Presets folder not found at path: {PRESETS_DIR}")
        return presets

    for filename in names:
        path = os.path.join(PRESETS_DIR, filename)
        try:
            with open(path, 'rb') as f:
                presets[filename[:-len('.json')]] = msgspec.json.decode(f.read())
        except msgspec.DecodeError as e:
            logging.error(f"❌ Invalid JSON format in {filename}: {e}")
        except OSError as e:
            logging.error(f"❌ Could not read {filename}: {e}")
    logging.info(f"✅ Loaded {len(presets)} presets: {', '.join(presets)}")
    return presets


# Global variable to store the presets
PRESETS = load_presets()


def reload_presets():
    """
    Reloads the presets from disk, e.g. after editing a preset file.
    """
    global PRESETS
    PRESETS = load_presets()
    logging.info("🔄 Presets reloaded successfully.")


def get_preset(name, overrides=None):
    """
    Validated ExperimentConfig for a preset, with optional top-level overrides.
    Raises:
        KeyError: unknown preset (the message suggests the closest name).
        pydantic.ValidationError: the preset or an override is invalid.
    """
    if name not in PRESETS:
        suggestion = get_close_matches(name, PRESETS.keys(), n=1, cutoff=0.6)
        hint = f"; did you mean '{suggestion[0]}'?" if suggestion else ""
        logging.error(f"❌ No preset named '{name}'{hint}")
        raise KeyError(f"unknown preset '{name}'{hint}")

    document = dict(PRESETS[name])
    document.setdefault('workers', config_class.WORKERS)
    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        logging.error(f"❌ Preset '{name}' is invalid: {e}")
        raise


def load_config(path, overrides=None):
    """ExperimentConfig from a JSON file, with optional top-level overrides."""
    with open(path, 'rb') as f:
        document = msgspec.json.decode(f.read())
    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.model_validate(document)
