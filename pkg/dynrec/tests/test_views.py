"""
Tests for the JSON views over experiment runs.
"""
import pandas as pd
import pytest

from dynrec.models import ExperimentRun

pytestmark = pytest.mark.django_db


def _run(output_dir, scenario='rho_tau_sweep'):
    return ExperimentRun.start('a' * 64, scenario, {'scenario': scenario}, str(output_dir))


def test_run_list_and_filter(client, tmp_path):
    """Test the run list returns every run and filters by scenario."""
    _run(tmp_path)
    _run(tmp_path, scenario='real_data')
    response = client.get('/runs/')
    assert response.status_code == 200
    assert len(response.json()['runs']) == 2
    filtered = client.get('/runs/', {'scenario': 'real_data'}).json()['runs']
    assert [r['scenario'] for r in filtered] == ['real_data']


def test_run_detail(client, tmp_path):
    """Test the detail view includes config and summary rows."""
    run = _run(tmp_path)
    run.complete([{'point': 'slope', 'estimator': 'dlr', 'slope': -0.9}])
    data = client.get(f'/runs/{run.id}/').json()
    assert data['status'] == 'completed'
    assert data['summary'][0]['slope'] == -0.9
    assert data['finished_at'] is not None
    assert client.get('/runs/9999/').status_code == 404


def test_figure_data(client, tmp_path):
    """Test figure CSVs are served as column arrays with NaN as null."""
    pd.DataFrame({'t': [1, 2], 'mse': [0.5, float('nan')]}).to_csv(tmp_path / 'figure_mse_curves.csv', index=False)
    run = _run(tmp_path)
    data = client.get(f'/runs/{run.id}/figure-data/').json()
    assert data['figures'] == {'mse_curves': {'t': [1, 2], 'mse': [0.5, None]}}


def test_figure_data_missing_outputs(client, tmp_path):
    """Test missing directories and runs without figures give 404."""
    gone = _run(tmp_path / 'gone')
    empty = _run(tmp_path)
    assert client.get(f'/runs/{gone.id}/figure-data/').status_code == 404
    assert client.get(f'/runs/{empty.id}/figure-data/').status_code == 404
    assert client.get('/runs/9999/figure-data/').status_code == 404


def test_views_are_read_only(client, tmp_path):
    """Test POST is refused."""
    assert client.post('/runs/').status_code == 405
