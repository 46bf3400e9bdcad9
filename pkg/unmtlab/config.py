import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

VALID_LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def _int_from_env(name, default):
    """Read a positive integer environment variable."""
    raw = os.getenv(name, str(default))
    try:
        value = int(raw)
    except ValueError:
        logging.error(f"❌ {name}={raw!r} is not an integer.")
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        logging.error(f"❌ {name}={value} must be at least 1.")
        raise ValueError(f"{name} must be at least 1, got {value}")
    return value


def _log_level_from_env(default):
    level = os.getenv('UNMTLAB_LOG_LEVEL', default).upper()
    if level not in VALID_LOG_LEVELS:
        logging.error(f"❌ UNMTLAB_LOG_LEVEL={level!r} is not a logging level.")
        raise ValueError(f"UNMTLAB_LOG_LEVEL must be one of {VALID_LOG_LEVELS}, got {level!r}")
    return level


class Config:
    """Base configuration class with default settings."""
    # Root directory for every run output (corpora, snapshots, reports)
    OUTPUT_ROOT = os.getenv('UNMTLAB_OUTPUT_ROOT', os.path.join(os.getcwd(), 'runs'))

    # Independent (seed) cells may run in parallel processes
    WORKERS = _int_from_env('UNMTLAB_WORKERS', 1)

    # Preset loaded by the experiment commands when no --config is given
    PRESET = os.getenv('UNMTLAB_PRESET', 'default')

    LOG_LEVEL = _log_level_from_env('INFO')
    ENV = os.getenv('UNMTLAB_ENV', 'development')
    SHOW_PROGRESS = True


class DevelopmentConfig(Config):
    """Configuration for development environment."""
    ENV = 'development'
    LOG_LEVEL = _log_level_from_env('DEBUG')


class ProductionConfig(Config):
    """Configuration for long unattended runs."""
    ENV = 'production'
    SHOW_PROGRESS = False


class TestingConfig(Config):
    """Configuration for testing environment."""
    ENV = 'testing'
    WORKERS = 1
    PRESET = 'smoke'
    SHOW_PROGRESS = False


# Dictionary to select configuration by environment
configurations = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig
}

# Select the configuration based on environment
current_env = os.getenv('UNMTLAB_ENV', 'development')
config_class = configurations.get(current_env, DevelopmentConfig)

logging.info(f"✅ unmtlab running in {config_class.ENV} mode.")
logging.info(f"🗄️ Using output root: {config_class.OUTPUT_ROOT}")
