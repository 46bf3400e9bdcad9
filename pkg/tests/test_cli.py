# tests/test_cli.py

import os

import msgspec
import pytest
from click.testing import CliRunner

from unmtlab.app import create_app
from unmtlab.helpers import write_lines


@pytest.fixture
def cli():
    return create_app()


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def text_files(tmp_path):
    refs = [('the', 'cat', 'sat', 'on', 'the', 'mat')] * 30
    hyps = [('the', 'cat', 'sat', 'on', 'a', 'mat')] * 30
    return (
        write_lines(tmp_path / 'ref.txt', refs),
        write_lines(tmp_path / 'hyp.txt', hyps),
    )


def test_commands_registered(cli):
    assert {'gen', 'train', 'experiment', 'grid', 'sweep-ratio', 'sweep-epochs', 'bleu', 'signif'} <= set(cli.commands)


def test_bleu_command(cli, runner, text_files):
    ref, _ = text_files
    result = runner.invoke(cli, ['bleu', str(ref), str(ref)])
    assert result.exit_code == 0, result.output
    assert msgspec.json.decode(result.output.strip().splitlines()[-1])['score'] == pytest.approx(100.0)


def test_signif_command(cli, runner, text_files):
    ref, hyp = text_files
    result = runner.invoke(cli, ['signif', str(ref), str(hyp), str(ref), '--samples', '1000'])
    assert result.exit_code == 0, result.output
    payload = msgspec.json.decode(result.output.strip().splitlines()[-1])
    assert payload['significant_at_01'] is True
    assert payload['samples'] == 1000


def test_signif_rejects_few_samples(cli, runner, text_files):
    ref, hyp = text_files
    result = runner.invoke(cli, ['signif', str(ref), str(hyp), str(ref), '--samples', '10'])
    assert result.exit_code == 1


def test_gen_writes_bundle(cli, runner, tmp_path):
    out = tmp_path / 'data'
    result = runner.invoke(cli, ['gen', '--seed', '1', '--out', str(out)])
    assert result.exit_code == 0, result.output
    expected = {'pair.json', 'vocab.txt', 'train.l1', 'train.l2', 'test.l1', 'test.l2', 'dev.l1', 'dev.l2'}
    assert expected <= set(os.listdir(out))
    with open(out / 'train.l1', encoding='utf-8') as f:
        assert len(f.read().splitlines()) == 120


def test_gen_size_override(cli, runner, tmp_path):
    out = tmp_path / 'data'
    result = runner.invoke(cli, ['gen', '--seed', '1', '--out', str(out), '--n-x', '60'])
    assert result.exit_code == 0, result.output
    with open(out / 'train.l1', encoding='utf-8') as f:
        assert len(f.read().splitlines()) == 60


def test_train_with_synthetic_dump(cli, runner, tmp_path):
    out = tmp_path / 'run'
    result = runner.invoke(cli, ['train', '--seed', '1', '--strategy', 'ST_PT', '--out', str(out), '--dump-synthetic'])
    assert result.exit_code == 0, result.output
    summary = msgspec.json.decode(result.output.strip().splitlines()[-1])
    assert summary['strategy'] == 'ST_PT'
    assert summary['base_model_id'] != summary['model_id']
    for name in ('m0.npz', 'model.npz', 'unmt_history.csv', 'selftrain_history.json', 'test_bleu.json'):
        assert os.path.exists(out / name)
    assert os.path.exists(out / 'synthetic_epoch_1' / 'manifest.json')
    assert os.path.exists(out / 'synthetic_epoch_2' / 'backward.l1')


def test_train_strategy_defaults_to_config(cli, runner, tmp_path):
    result = runner.invoke(cli, ['train', '--seed', '1', '--out', str(tmp_path / 'run')])
    assert result.exit_code == 0, result.output
    summary = msgspec.json.decode(result.output.strip().splitlines()[-1])
    assert summary['strategy'] == 'ST_PT'
    assert summary['base_model_id'] != summary['model_id']


def test_experiment_command(cli, runner, tmp_path):
    out = tmp_path / 'exp'
    result = runner.invoke(cli, ['experiment', '--strategy', 'baseline', '--strategy', 'ST_UT', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert os.path.exists(out / 'report.csv')
    assert os.path.exists(out / 'report.json')
    assert os.path.exists(out / 'acceptance.json')
    assert 'ST_UT' in result.output


def test_unknown_preset(cli, runner):
    result = runner.invoke(cli, ['experiment', '--preset', 'nope'])
    assert result.exit_code == 2


def test_grid_bad_cell(cli, runner):
    result = runner.invoke(cli, ['grid', '--cell', '20000by1000'])
    assert result.exit_code == 2
    assert 'NXxNY' in result.output
