# tests/test_config.py

import pytest
from pydantic import ValidationError

from unmtlab import config
from unmtlab.helpers import progress_enabled, write_json
from unmtlab.models import (
    ExperimentConfig,
    LanguagePairSpec,
    NoiseSpec,
    SelfTrainConfig,
    Strategy,
    UnmtConfig,
)
from unmtlab.utils import presets


def test_testing_config_selected():
    assert config.config_class is config.TestingConfig
    assert config.config_class.PRESET == 'smoke'
    assert config.config_class.WORKERS == 1


def test_progress_follows_config():
    assert progress_enabled() is False
    assert progress_enabled(True) is True


def test_int_from_env(monkeypatch):
    monkeypatch.setenv('UNMTLAB_TEST_WORKERS', '4')
    assert config._int_from_env('UNMTLAB_TEST_WORKERS', 1) == 4
    monkeypatch.setenv('UNMTLAB_TEST_WORKERS', 'many')
    with pytest.raises(ValueError):
        config._int_from_env('UNMTLAB_TEST_WORKERS', 1)
    monkeypatch.setenv('UNMTLAB_TEST_WORKERS', '0')
    with pytest.raises(ValueError):
        config._int_from_env('UNMTLAB_TEST_WORKERS', 1)


def test_log_level_from_env(monkeypatch):
    monkeypatch.setenv('UNMTLAB_LOG_LEVEL', 'warning')
    assert config._log_level_from_env('INFO') == 'WARNING'
    monkeypatch.setenv('UNMTLAB_LOG_LEVEL', 'LOUD')
    with pytest.raises(ValueError):
        config._log_level_from_env('INFO')


def test_presets_are_loaded():
    assert {'default', 'balanced', 'smoke'} <= set(presets.PRESETS)
    for name in presets.PRESETS:
        assert isinstance(presets.get_preset(name), ExperimentConfig)


def test_default_preset_matches_unbalanced_scenario():
    cfg = presets.get_preset('default')
    assert (cfg.n_x, cfg.n_y) == (20000, 1000)
    assert cfg.selftrain.epsilon == 0.1
    assert cfg.strategies == list(Strategy)


def test_unknown_preset_suggests_closest():
    with pytest.raises(KeyError, match="did you mean 'smoke'"):
        presets.get_preset('smoek')


def test_preset_overrides():
    cfg = presets.get_preset('smoke', {'seeds': [4, 5], 'n_x': 80, 'out_dir': None})
    assert cfg.seeds == [4, 5]
    assert cfg.n_x == 80
    assert cfg.out_dir is None
    assert cfg.workers == 1


def test_invalid_override_rejected():
    with pytest.raises(ValidationError):
        presets.get_preset('smoke', {'strategies': ['ST_UT', 'ST_UT']})


def test_reload_presets(monkeypatch, tmp_path):
    write_json(tmp_path / 'tiny.json', {'n_x': 50, 'n_y': 10, 'seeds': [9]})
    monkeypatch.setattr(presets, 'PRESETS_DIR', str(tmp_path))
    monkeypatch.setattr(presets, 'PRESETS', presets.PRESETS)
    presets.reload_presets()
    assert set(presets.PRESETS) == {'tiny'}
    assert presets.get_preset('tiny').seeds == [9]


def test_missing_presets_dir(monkeypatch, tmp_path):
    monkeypatch.setattr(presets, 'PRESETS_DIR', str(tmp_path / 'nowhere'))
    assert presets.load_presets() == {}


def test_load_config_file(tmp_path):
    path = write_json(tmp_path / 'cfg.json', {'n_x': 300, 'n_y': 30, 'strategies': ['baseline']})
    cfg = presets.load_config(path, {'seeds': [7]})
    assert cfg.n_x == 300
    assert cfg.strategies == [Strategy.BASELINE]
    assert cfg.seeds == [7]


@pytest.mark.parametrize('kwargs', [
    {'p_drop': 1.5},
    {'p_drop': 0.6, 'p_blank': 0.6},
    {'shuffle_k': -1},
])
def test_noise_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        NoiseSpec(**kwargs)


def test_language_pair_spec_rejects_template_without_anchor():
    with pytest.raises(ValidationError, match='anchor'):
        LanguagePairSpec(grammar_templates=['N V N'])


def test_selftrain_config_bounds():
    with pytest.raises(ValidationError):
        SelfTrainConfig(epsilon=0.0)
    with pytest.raises(ValidationError):
        SelfTrainConfig(max_epochs=0)


def test_experiment_config_rejects_extra_fields():
    with pytest.raises(ValidationError):
        ExperimentConfig(n_x=10, colour='blue')


def test_bootstrap_samples_floor():
    with pytest.raises(ValidationError):
        ExperimentConfig(bootstrap_samples=500)


LONG_TEMPLATE = ' '.join(['N', 'V', 'A', 'N', 'D'] * 3 + ['N', 'V', 'A', 'N', '#'])


def test_decode_limit_must_cover_longest_sentence():
    pair = LanguagePairSpec(grammar_templates=[LONG_TEMPLATE], max_sentence_len=20)
    with pytest.raises(ValidationError, match='max_decode_len'):
        ExperimentConfig(pair=pair, unmt=UnmtConfig(max_decode_len=16))
    with pytest.raises(ValidationError, match='at least 22'):
        ExperimentConfig(pair=pair, unmt=UnmtConfig(max_decode_len=21))
    assert ExperimentConfig(pair=pair, unmt=UnmtConfig(max_decode_len=22)).unmt.max_decode_len == 22


def test_default_pair_fits_default_decode_limit():
    cfg = ExperimentConfig()
    assert cfg.pair.longest_sentence == 6
    assert cfg.unmt.max_decode_len >= cfg.pair.longest_sentence + 2
