"""
Tests for the harness command line and its persisted results
"""

import json

import pandas as pd
import pytest

from src.solver.she import SolverBlowUpError
from src.solver.export import load_fields
from src.utils.run_utils import file_hash
from src.harness.cli import cli, EXIT_OK, EXIT_CHECK_FAILED, EXIT_SCHEMA, EXIT_BLOWUP
from src.harness.runner import ExperimentRunner
from src.harness.scenario import parse_scenario, PRESET_NAMES
from src.harness.sweeps import RESULT_COLUMNS
from tests.test_harness import scenario_data


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "unit.json"
    path.write_text(json.dumps(scenario_data()))
    return str(path)


def run(command, scenario, out, *extra):
    return cli([command, scenario, '--out', str(out), '--workers', '1', *extra])


class TestPresets:
    """Test the presets command"""

    def test_list(self, capsys):
        """Test listing preset names"""
        assert cli(['presets']) == EXIT_OK

        assert capsys.readouterr().out.split() == list(PRESET_NAMES)

    def test_print(self, capsys):
        """Test that a printed preset is a valid scenario"""
        assert cli(['presets', 'fleming-viot']) == EXIT_OK

        scenario = parse_scenario(capsys.readouterr().out)
        assert scenario.coefficient.name == 'logistic-sqrt'

    def test_write(self, tmp_path):
        """Test writing a preset scenario file"""
        assert cli(['presets', 'ssep', '--dimension', '2', '--out', str(tmp_path)]) == EXIT_OK

        scenario = parse_scenario((tmp_path / 'ssep.json').read_text())
        assert scenario.grid.dimension == 2
        assert scenario.conservative


class TestScenarioErrors:
    """Test exit status 2 for unusable scenarios"""

    def test_unknown_coefficient(self, tmp_path, capsys):
        """Test that the schema pointer reaches stderr"""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(scenario_data(coefficient={'name': 'cubic'})))

        assert run('rates', str(path), tmp_path / 'out') == EXIT_SCHEMA
        assert "/coefficient/name" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        """Test a scenario path that does not exist"""
        assert run('simulate', str(tmp_path / 'none.json'), tmp_path / 'out') == EXIT_SCHEMA

    def test_not_utf8(self, tmp_path, capsys):
        """Test a scenario file holding bytes that are not UTF-8"""
        path = tmp_path / "binary.json"
        path.write_bytes(b'\xff\xfe{')

        assert run('rates', str(path), tmp_path / 'out') == EXIT_SCHEMA
        assert "not UTF-8" in capsys.readouterr().err

    def test_window_touches_singularity(self, tmp_path, capsys):
        """Test that an extension window reaching zero for sqrt is a schema error"""
        path = tmp_path / "near-zero.json"
        path.write_text(json.dumps(scenario_data(
            coefficient={'name': 'sqrt'}, initial={'kind': 'constant', 'mean': 0.3},
            stopping={'gamma': 0.5},
        )))

        assert run('remainder', str(path), tmp_path / 'out') == EXIT_SCHEMA
        assert "singularity" in capsys.readouterr().err


class TestCommands:
    """Test scenario commands end to end"""

    def test_rates_check(self, scenario_file, tmp_path):
        """Test a passing rate sweep with its table and manifest"""
        out = tmp_path / 'rates'

        assert run('rates', scenario_file, out, '--check') == EXIT_OK
        table = pd.read_csv(out / 'rates.csv')
        assert list(table.columns) == RESULT_COLUMNS
        assert len(table) == 4

        manifest = json.loads((out / 'rates_manifest.json').read_text())
        assert manifest['command'] == 'rates'
        assert manifest['scenario']['name'] == 'unit'
        assert manifest['verdict']['passed']
        assert manifest['outputs']['estimates']['sha1'] == file_hash(out / 'rates.csv')
        assert {'platform', 'cpu_logical'} <= set(manifest['host'])

    def test_reproducible_tables(self, scenario_file, tmp_path):
        """Test byte-identical CSVs for the same seed"""
        first, second = tmp_path / 'first', tmp_path / 'second'

        assert run('remainder', scenario_file, first, '--replicas', '20') == EXIT_OK
        assert run('remainder', scenario_file, second, '--replicas', '20') == EXIT_OK
        assert (first / 'remainder.csv').read_bytes() == (second / 'remainder.csv').read_bytes()

    def test_remainder_check_on_vanishing_remainder(self, tmp_path):
        """Test that a remainder cancelling to rounding error passes the check"""
        path = tmp_path / "linear.json"
        path.write_text(json.dumps(scenario_data(
            order=1, estimator={'mode': 'pointwise-sup', 'p': 2, 'target': 'remainder'})))
        out = tmp_path / 'remainder'

        assert run('remainder', str(path), out, '--replicas', '8', '--check') == EXIT_OK
        table = pd.read_csv(out / 'remainder.csv')
        assert table['estimate'].iloc[0] <= 1e-18
        manifest = json.loads((out / 'remainder_manifest.json').read_text())
        assert manifest['verdict']['passed']

    def test_seed_changes_results(self, scenario_file, tmp_path):
        """Test that --seed overrides the scenario seed"""
        first, second = tmp_path / 'first', tmp_path / 'second'

        run('remainder', scenario_file, first, '--replicas', '20')
        run('remainder', scenario_file, second, '--replicas', '20', '--seed', '8')
        assert (first / 'remainder.csv').read_bytes() != (second / 'remainder.csv').read_bytes()

    def test_simulate_exports(self, scenario_file, tmp_path):
        """Test trajectory export next to the summary"""
        out = tmp_path / 'sim'

        assert run('simulate', scenario_file, out) == EXIT_OK
        assert (out / 'simulate.csv').exists()
        assert (out / 'simulate_manifest.json').exists()
        arrays, metadata = load_fields(str(out), 'trajectory')
        assert arrays['u'].shape == (21, 8)
        assert metadata['seed'] is not None

    def test_expand_exports(self, tmp_path):
        """Test the exported coefficient stack"""
        path = tmp_path / "order2.json"
        path.write_text(json.dumps(scenario_data(order=2, coefficient={'name': 'cosine'})))
        out = tmp_path / 'expand'

        assert run('expand', str(path), out) == EXIT_OK
        arrays, metadata = load_fields(str(out), 'stack')
        assert arrays['coefficients'].shape == (3, 21, 8)
        assert metadata['order'] == 2
        assert set(pd.read_csv(out / 'expand.csv')['order']) == {0, 1, 2}

    def test_covariance_check(self, scenario_file, tmp_path):
        """Test the per-mode variance table"""
        out = tmp_path / 'cov'

        assert run('covariance-check', scenario_file, out, '--replicas', '500') == EXIT_OK
        table = pd.read_csv(out / 'covariance_check.csv')
        assert 'passed' in table.columns
        manifest = json.loads((out / 'covariance-check_manifest.json').read_text())
        assert manifest['verdict']['samples'] == 500

    def test_survival_check(self, tmp_path):
        """Test a passing survival check at zero noise"""
        path = tmp_path / "sqrt.json"
        path.write_text(json.dumps(scenario_data(
            coefficient={'name': 'sqrt'}, initial={'kind': 'constant', 'mean': 1.0},
            stopping={'gamma': 0.5},
            sweep={'epsilons': [0.0], 'schedule': {'kind': 'fixed'}})))
        out = tmp_path / 'survival'

        assert run('survival', str(path), out, '--replicas', '4', '--check') == EXIT_OK
        table = pd.read_csv(out / 'survival.csv')
        assert table.loc[0, 'survival'] == 1.0


class TestExitStatus:
    """Test exit statuses for failed checks and blow-ups"""

    def test_failed_check(self, scenario_file, tmp_path, monkeypatch):
        """Test that --check turns a failed verdict into status 1"""
        monkeypatch.setattr(ExperimentRunner, 'rates',
                            lambda self: (pd.DataFrame({'estimate': [1.0]}), False))

        assert run('rates', scenario_file, tmp_path / 'a') == EXIT_OK
        assert run('rates', scenario_file, tmp_path / 'b', '--check') == EXIT_CHECK_FAILED

    def test_blow_up(self, scenario_file, tmp_path, monkeypatch):
        """Test status 3 when every replica blows up"""
        def explode(*args, **kwargs):
            raise SolverBlowUpError(1, 0.0, 0.0)

        monkeypatch.setattr("src.harness.estimators.simulate", explode)
        assert run('remainder', scenario_file, tmp_path / 'out', '--replicas', '4') == EXIT_BLOWUP
