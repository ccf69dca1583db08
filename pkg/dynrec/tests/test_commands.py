"""
Tests for the dynrec management commands.
"""
import json
from io import StringIO

import numpy as np
import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from dynrec.matrix_io import read_stacked_dmr1
from dynrec.models import ExperimentRun
from dynrec.panel_io import read_panel


def _call(*args, **kwargs):
    out = StringIO()
    call_command(*args, stdout=out, **kwargs)
    return out.getvalue()


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / 'panel'
    _call('simulate', dims=[12, 10], rank=2, T=4, rho=0.3, sigma_xi=0.1, seed=0, out=str(out))
    return out


def test_simulate_writes_panel_and_truth(simulated):
    """Test simulate writes a readable panel, stacked truth and metadata."""
    panel = read_panel(simulated)
    assert panel.T == 4
    assert panel.batch_sizes == [36] * 4
    assert read_stacked_dmr1(simulated / 'truth.dmr1', 12).shape == (4, 12, 10)
    meta = json.loads((simulated / 'simulation.json').read_text())
    assert meta['dims'] == [12, 10]
    assert meta['rho'] == 0.3
    assert (meta['truth_seed'], meta['sample_seed'], meta['noise_seed'], meta['carry_seed']) == (0, 0, 1, 2)


def test_recover_writes_estimates_and_mse(simulated, tmp_path):
    """Test recover writes estimates, traces and per-t MSE."""
    out = tmp_path / 'recovery'
    output = _call('recover', str(simulated), estimator='dlr', bandwidth=0.5, lam=0.02,
                   truth=str(simulated / 'truth.dmr1'), compare_warm_start=True, out=str(out))
    assert read_stacked_dmr1(out / 'estimates.dmr1', 12).shape == (4, 12, 10)
    traces = pd.read_csv(out / 'traces.csv')
    assert traces.columns.tolist() == ['t', 'iter', 'objective']
    assert sorted(traces['t'].unique()) == [1, 2, 3, 4]
    for _, path in traces.groupby('t'):
        assert path['iter'].tolist() == list(range(len(path)))
        assert len(path) >= 2
    mse = pd.read_csv(out / 'mse_by_t.csv')
    assert mse['t'].tolist() == [1, 2, 3, 4]
    assert (mse['mse'] >= 0).all()
    assert 'Average MSE' in output
    assert 'Total iterations: warm' in output


@pytest.mark.parametrize('estimator', ['static', 'twostep'])
def test_recover_with_plug_in_bandwidth(simulated, tmp_path, estimator):
    """Test the baselines run with the automatic bandwidth."""
    output = _call('recover', str(simulated), estimator=estimator, lam=0.02, max_iters=20,
                   out=str(tmp_path / estimator))
    assert f'{estimator}: h=' in output


def test_recover_missing_panel(tmp_path):
    """Test a missing panel directory is reported as a command error."""
    with pytest.raises(CommandError):
        _call('recover', str(tmp_path / 'nowhere'), lam=0.02)


def test_cv_writes_scores(simulated, tmp_path):
    """Test cv scores the grid plus a refined grid around the optimum."""
    out = tmp_path / 'cv'
    output = _call('cv', str(simulated), grid=[0.001, 0.01, 0.1], folds=2, refine=3, extensions=0,
                   bandwidth=0.5, max_iters=30, out=str(out))
    scores = pd.read_csv(out / 'cv_scores.csv')
    assert scores.columns.tolist() == ['lambda', 'score']
    assert len(scores) in (3, 4)
    assert scores['lambda'].is_unique
    assert scores['lambda'].is_monotonic_increasing
    for lam in (0.001, 0.01, 0.1):
        assert np.isclose(scores['lambda'], lam).any()
    assert 'lambda* =' in output


def test_recover_selects_lambda_by_cv(simulated, tmp_path):
    """Test recover --lambda cv writes the CV scores and solves at the chosen lambda."""
    out = tmp_path / 'cv_recovery'
    output = _call('recover', str(simulated), lam='cv', folds=2, bandwidth=0.5, max_iters=20, out=str(out))
    scores = pd.read_csv(out / 'cv_scores.csv')
    assert scores.columns.tolist() == ['lambda', 'score']
    assert len(scores) >= 8
    assert 'CV lambda* =' in output
    assert read_stacked_dmr1(out / 'estimates.dmr1', 12).shape == (4, 12, 10)


def test_recover_parses_lambda_flag(simulated, tmp_path):
    """Test the --lambda flag takes a number on the command line."""
    output = _call('recover', str(simulated), '--lambda', '0.02', '--bandwidth', '0.5', '--max-iters', '10',
                   out=str(tmp_path / 'flag'))
    assert 'lambda=0.02' in output
    with pytest.raises(CommandError):
        _call('recover', str(simulated), '--lambda', 'lots', out=str(tmp_path / 'bad'))


def test_ingest_writes_train_test_and_ids(tmp_path):
    """Test ingest writes both panels and the id map."""
    csv = tmp_path / 'ratings.csv'
    rows = ['timestamp,row,col,value'] + [f'{i},u{i % 5},i{i % 3},{1 + i % 5}' for i in range(30)]
    csv.write_text('\n'.join(rows) + '\n')
    out = tmp_path / 'ingest'
    _call('ingest', str(csv), T=3, split=0.8, out=str(out))
    train = read_panel(out / 'train')
    test = read_panel(out / 'test')
    assert train.batch_sizes == [8, 8, 8]
    assert test.batch_sizes == [2, 2, 2]
    id_map = pd.read_csv(out / 'id_map.csv')
    assert set(id_map['axis']) == {'row', 'col'}
    assert len(id_map) == 5 + 3


def test_ingest_parse_error(tmp_path):
    """Test a malformed record surfaces its line number."""
    csv = tmp_path / 'bad.csv'
    csv.write_text('timestamp,row,col,value\n1,a,b,2\n2,a,b,oops\n')
    with pytest.raises(CommandError, match='line 3'):
        _call('ingest', str(csv), T=1, out=str(tmp_path / 'out'))


@pytest.mark.django_db
def test_experiment_registers_completed_run(tmp_path):
    """Test experiment runs a config, stores the summary and prints it."""
    config = tmp_path / 'sweep.json'
    config.write_text(json.dumps({
        'scenario': 'rho_tau_sweep', 'dims': [12, 10], 'rank': 2, 'rho_tau_pairs': [[0.2, 4], [0.4, 4]],
        'lam': 0.02, 'bandwidth': 0.5, 'max_iters': 30,
    }))
    out = tmp_path / 'run'
    output = _call('experiment', config=str(config), seeds=[1, 2], out=str(out))
    run = ExperimentRun.objects.get()
    assert run.status == ExperimentRun.STATUS_COMPLETED
    assert run.output_dir == str(out)
    assert run.config['seeds'] == [1, 2]
    assert [row['point'] for row in run.summary] == ['rho=0.2,T=4', 'rho=0.4,T=4', 'slope']
    assert 'log-log slope' in output
    assert (out / 'summary.csv').exists()


@pytest.mark.django_db
def test_experiment_failure_marks_run_failed(tmp_path):
    """Test a failing stage marks the run failed and raises CommandError."""
    with pytest.raises(CommandError, match="stage 'ingest'"):
        _call('experiment', scenario='real_data', data_path=str(tmp_path / 'missing.csv'), lam='0.1',
              out=str(tmp_path / 'run'))
    run = ExperimentRun.objects.get()
    assert run.status == ExperimentRun.STATUS_FAILED
    assert 'ingest' in run.error


@pytest.mark.django_db
def test_experiment_marks_run_failed_on_unexpected_errors(tmp_path, monkeypatch):
    """Test an error outside the library still marks the run failed and propagates."""
    def broken(cfg):
        raise OSError('disk full')

    monkeypatch.setattr('dynrec.management.commands.experiment.run_experiment', broken)
    with pytest.raises(OSError, match='disk full'):
        _call('experiment', scenario='baseline_comparison', rho=0.2, lam='0.1', out=str(tmp_path / 'run'))
    run = ExperimentRun.objects.get()
    assert run.status == ExperimentRun.STATUS_FAILED
    assert run.error == 'disk full'


@pytest.mark.django_db
def test_experiment_rejects_bad_arguments():
    """Test a missing scenario or malformed lambda never registers a run."""
    with pytest.raises(CommandError):
        _call('experiment')
    with pytest.raises(CommandError):
        _call('experiment', scenario='baseline_comparison', rho=0.2, lam='lots')
    assert not ExperimentRun.objects.exists()


def test_slope_averages_replicates(tmp_path):
    """Test slope fits log y against log x after averaging equal x."""
    csv = tmp_path / 'replicates.csv'
    frame = pd.DataFrame({
        'estimator': ['dlr'] * 6 + ['static'] * 2,
        'ratio': [1.0, 1.0, 2.0, 2.0, 4.0, 4.0, 1.0, 2.0],
        'avg_mse': [1.5, 2.5, 1.0, 1.0, 0.25, 0.75, 9.0, 9.0],
    })
    frame.to_csv(csv, index=False)
    result = json.loads(_call('slope', str(csv), estimator='dlr'))
    assert result['points'] == 3
    assert result['slope'] == pytest.approx(-1.0)
    assert result['intercept'] == pytest.approx(np.log(2.0))


def test_slope_errors(tmp_path):
    """Test unknown columns and degenerate data raise CommandError."""
    csv = tmp_path / 'r.csv'
    pd.DataFrame({'ratio': [1.0, 1.0], 'avg_mse': [1.0, 2.0]}).to_csv(csv, index=False)
    with pytest.raises(CommandError):
        _call('slope', str(csv), x='rho')
    with pytest.raises(CommandError):
        _call('slope', str(csv))
