import logging
import os
import zlib

import msgspec
import numpy as np

from unmtlab.config import config_class


def derive_rng(seed, *keys):
    """
    Build an independent numpy Generator for (seed, *keys).

    Keys may be ints or strings; the same arguments always give the same stream,
    and different keys give statistically independent streams.
    """
    spawn_key = tuple(k if isinstance(k, int) else zlib.crc32(str(k).encode('utf-8')) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key))


def derive_seed(seed, *keys):
    """A plain int seed derived the same way as derive_rng."""
    return int(derive_rng(seed, *keys).integers(0, 2**31 - 1))


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def write_lines(path, sentences):
    """Write token sequences one per line, space separated."""
    try:
        with open(path, 'w', encoding='utf-8') as f:
            for sentence in sentences:
                f.write(' '.join(str(tok) for tok in sentence))
                f.write('\n')
    except OSError as e:
        logging.error(f"❌ Failed to write {path}: {e}")
        raise
    logging.debug(f"✅ Wrote {len(sentences)} lines to {path}")
    return path


def read_lines(path):
    """Read a line-oriented corpus back into token tuples."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return [tuple(line.split()) for line in f.read().splitlines()]
    except OSError as e:
        logging.error(f"❌ Failed to read {path}: {e}")
        raise


def write_json(path, obj):
    try:
        with open(path, 'wb') as f:
            f.write(msgspec.json.format(msgspec.json.encode(obj), indent=2))
    except OSError as e:
        logging.error(f"❌ Failed to write {path}: {e}")
        raise
    return path


def read_json(path, type=None):
    with open(path, 'rb') as f:
        data = f.read()
    if type is None:
        return msgspec.json.decode(data)
    return msgspec.json.decode(data, type=type)


def progress_enabled(show_progress=None):
    """tqdm bars follow the environment config unless a caller forces them."""
    if show_progress is not None:
        return bool(show_progress)
    return config_class.SHOW_PROGRESS and logging.getLogger().isEnabledFor(logging.INFO)
