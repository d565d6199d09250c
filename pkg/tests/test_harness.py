"""
Tests for scenarios, regime schedules, moment estimators and sweeps
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.solver.she import SolverBlowUpError
from src.spectral.grid import build_grid
from src.noise.multiplier import build_multiplier, convolution_variance
from src.harness.schedules import (
    RegimeSchedule, k_delta_exponent, FIXED, POWER_LAW,
    REMAINDER, NORMALIZED_REMAINDER, COEFFICIENT
)
from src.harness.scenario import (
    Scenario, ScenarioError, parse_scenario, load_scenario, preset, setup, initial_values,
    PRESET_NAMES
)
from src.harness.estimators import (
    SweepPoint, BlowUpThresholdError, lattice_indices, compensated_moments,
    collect_estimates, run_moment_estimate
)
from src.harness.sweeps import (
    RESULT_COLUMNS, fit_loglog, rate_sweep, divergence_sweep, survival_curve,
    survival_nondecreasing
)

SCENARIO_DIR = Path(__file__).parent.parent / "config" / "scenarios"


def scenario_data(**overrides):
    """Small linear scenario: constant G, zero initial data, fixed delta"""
    data = {
        'schema': 1,
        'name': 'unit',
        'grid': {'dimension': 1, 'modes': 8},
        'time': {'dt': 1e-3, 'steps': 20},
        'coefficient': {'name': 'constant', 'value': 1.0},
        'initial': {'kind': 'constant', 'mean': 0.0},
        'noise': {'epsilon': 0.0625, 'delta': 0.1},
        'order': 0,
        'estimator': {'mode': 'space-time-Lp', 'p': 2, 'target': 'remainder'},
        'sweep': {'epsilons': [0.25, 0.125, 0.0625, 0.03125],
                  'schedule': {'kind': 'fixed'}, 'tolerance': 0.001},
        'replicas': 100,
        'seed': 7,
    }
    data.update(overrides)
    return data


def sqrt_scenario(**overrides):
    return parse_scenario(scenario_data(
        coefficient={'name': 'sqrt'}, initial={'kind': 'constant', 'mean': 1.0},
        stopping={'gamma': 0.5}, **overrides
    ))


class TestSchedules:
    """Test regime schedules and predicted exponents"""

    def test_k_delta_exponent(self):
        """Test the power of delta in K_i"""
        assert k_delta_exponent(1, 1) == 0.0
        assert k_delta_exponent(1, 2) is None
        assert k_delta_exponent(1, 3) == 1.0
        assert k_delta_exponent(2, 2) == 2.0
        with pytest.raises(ValueError):
            k_delta_exponent(3, 1)

    def test_fixed_schedule(self):
        """Test fixed delta and its exponents"""
        schedule = RegimeSchedule(FIXED, delta=0.1)

        assert schedule.delta_for(0.5) == 0.1
        assert schedule.k_exponent(2, 1) == 0.0
        assert schedule.predicted_exponent(0, 2, 1, 1) == pytest.approx(1.0)
        assert schedule.predicted_exponent(1, 2, 1, 1) == pytest.approx(2.0)
        assert schedule.predicted_exponent(2, 2, 1, 1, NORMALIZED_REMAINDER) == pytest.approx(1.0)
        assert schedule.predicted_exponent(2, 2, 1, 1, COEFFICIENT) == 0.0

    def test_power_law_schedule(self):
        """Test delta = scale * eps^a and the exponents it predicts"""
        schedule = RegimeSchedule(POWER_LAW, scale=1.0, exponent=0.25)

        assert schedule.delta_for(0.0625) == pytest.approx(0.5)
        assert schedule.k_exponent(2, 1) == pytest.approx(-0.25)
        assert schedule.predicted_exponent(1, 2, 2, 1, REMAINDER) == pytest.approx(1.5)
        assert schedule.predicted_exponent(1, 2, 2, 1, NORMALIZED_REMAINDER) == pytest.approx(0.5)
        assert schedule.predicted_exponent(1, 2, 2, 1, COEFFICIENT) == pytest.approx(-0.25)
        with pytest.raises(ValueError):
            schedule.delta_for(0.0)
        with pytest.raises(ValueError):
            schedule.predicted_exponent(1, 2, 2, 1, "moment")

    def test_admissibility(self):
        """Test eps K^(n+1) -> 0 and the irregular window conditions"""
        assert RegimeSchedule(FIXED, delta=0.1).is_admissible(3, True, True, 3)
        assert RegimeSchedule(POWER_LAW, exponent=0.25).is_admissible(1, True, True, 1)
        assert not RegimeSchedule(POWER_LAW, exponent=0.6).is_admissible(1, True, False, 1)
        assert not RegimeSchedule(POWER_LAW, exponent=0.4).is_admissible(1, True, True, 1)
        assert RegimeSchedule(POWER_LAW, exponent=0.9).is_admissible(3, False, True, 1)

    def test_invalid(self):
        """Test schedule validation"""
        with pytest.raises(ValueError):
            RegimeSchedule("geometric", delta=0.1)
        with pytest.raises(ValueError):
            RegimeSchedule(FIXED)
        with pytest.raises(ValueError):
            RegimeSchedule(POWER_LAW, exponent=0.0)

    def test_describe(self):
        """Test readable schedule descriptions"""
        assert RegimeSchedule(FIXED, delta=0.1).describe() == "delta=0.1"
        assert RegimeSchedule(POWER_LAW, scale=2.0, exponent=0.25).describe() == "delta=2*eps^0.25"


class TestScenario:
    """Test scenario parsing and presets"""

    def test_parse_defaults(self):
        """Test a minimal scenario and its defaults"""
        scenario = parse_scenario({'schema': 1, 'coefficient': {'name': 'cosine'}})

        assert scenario.grid.modes == 128
        assert scenario.estimator.mode == 'pointwise-sup'
        assert scenario.schedule().kind == FIXED
        assert not scenario.is_irregular

    def test_echo_round_trip(self):
        """Test that the echo parses back to the same scenario"""
        scenario = parse_scenario(scenario_data())

        echo = scenario.echo()
        assert echo['schema'] == 1
        assert parse_scenario(json.dumps(echo)) == scenario

    def _problems(self, data):
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario(data)
        return excinfo.value.problems

    def test_unknown_coefficient_pointer(self):
        """Test that schema errors carry a pointer to the offending field"""
        problems = self._problems(scenario_data(coefficient={'name': 'cubic'}))

        assert any(p.startswith("/coefficient/name") for p in problems)

    def test_unknown_field(self):
        """Test that unknown fields are rejected"""
        problems = self._problems(scenario_data(noise={'epsilon': 0.1, 'colour': 'pink'}))

        assert any(p.startswith("/noise/colour") for p in problems)

    def test_odd_modes(self):
        """Test that odd mode counts are rejected"""
        problems = self._problems(scenario_data(grid={'dimension': 1, 'modes': 15}))

        assert any(p.startswith("/grid/modes") for p in problems)

    def test_consistency_rules(self):
        """Test cross-field rules"""
        self._problems(scenario_data(coefficient={'name': 'sqrt'}))
        self._problems(scenario_data(grid={'dimension': 2, 'modes': 8},
                                     noise={'epsilon': 0.1, 'delta': 0.0}))
        self._problems(scenario_data(estimator={'mode': 'exceedance'}))
        self._problems(scenario_data(schema=2))

    def test_extension_window_inside_domain(self):
        """Test that the enlarged extension window must avoid the singularity of G"""
        problems = self._problems(scenario_data(
            coefficient={'name': 'sqrt'}, initial={'kind': 'constant', 'mean': 0.3},
            stopping={'gamma': 0.5}))
        assert any("singularity" in p for p in problems)

        # cosine data widens the range by its amplitude
        self._problems(scenario_data(
            coefficient={'name': 'logistic-sqrt'},
            initial={'kind': 'cosine', 'mean': 0.5, 'amplitude': 0.4},
            stopping={'gamma': 0.1}))

        scenario = parse_scenario(scenario_data(
            coefficient={'name': 'logistic-sqrt'},
            initial={'kind': 'cosine', 'mean': 0.5, 'amplitude': 0.1},
            stopping={'gamma': 0.1, 'extension_margin': 0.05}))
        assert setup(scenario).expansion_coefficient is not None

    def test_invalid_json(self):
        """Test malformed JSON text"""
        problems = self._problems("{not json")

        assert problems[0].startswith("/:")

    def test_load_files(self, tmp_path):
        """Test loading the bundled scenarios and a missing file"""
        for path in sorted(SCENARIO_DIR.glob("*.json")):
            assert isinstance(load_scenario(str(path)), Scenario)

        with pytest.raises(ScenarioError):
            load_scenario(str(tmp_path / "missing.json"))

    def test_presets(self):
        """Test the application presets"""
        assert set(PRESET_NAMES) == {"dawson-watanabe", "fleming-viot", "ssep", "dean-kawasaki"}

        ssep = preset("ssep")
        assert ssep.conservative
        assert ssep.coefficient.name == "logistic-sqrt"
        assert ssep.is_irregular
        schedule = ssep.schedule()
        assert schedule.kind == POWER_LAW
        assert schedule.exponent == pytest.approx(0.25)
        assert schedule.is_admissible(ssep.order, True, True, 1)

        for name in PRESET_NAMES:
            scenario = preset(name, dimension=2)
            assert scenario.grid.dimension == 2
            assert scenario.schedule().is_admissible(scenario.order, scenario.conservative, True, 2)

        with pytest.raises(ValueError):
            preset("voter")

    def test_setup_extends_irregular(self):
        """Test that window-smooth coefficients are paired with their extension"""
        prepared = setup(sqrt_scenario())

        assert prepared.solver_coefficient.is_window_smooth
        assert prepared.expansion_coefficient.window == (0.5, 1.5)
        assert prepared.expansion_coefficient.margin == 0.25
        config = prepared.solver_config(0.1, 0.2, 3)
        assert config.gamma == 0.5 and config.seed == 3 and config.steps == 20

    def test_setup_smooth(self):
        """Test that smooth coefficients are used directly"""
        prepared = setup(parse_scenario(scenario_data()))

        assert prepared.solver_coefficient is prepared.expansion_coefficient

    def test_initial_cosine(self):
        """Test mean + amplitude cos(2 pi x)"""
        scenario = parse_scenario(scenario_data(
            initial={'kind': 'cosine', 'mean': 1.0, 'amplitude': 0.5}))
        prepared = setup(scenario)

        values = initial_values(prepared.grid, scenario.initial)
        assert values.max() == pytest.approx(1.5)
        assert values.min() == pytest.approx(0.5)


class TestEstimators:
    """Test reductions and moment estimates"""

    def test_lattice_indices(self):
        """Test evenly spread stored time indices"""
        indices = lattice_indices(250, 8)

        assert len(indices) == 8
        assert indices[-1] == 250
        assert np.all(np.diff(indices) > 0) and indices[0] > 0
        np.testing.assert_array_equal(lattice_indices(5, 8), [1, 2, 3, 4, 5])

    def test_compensated_moments_order_free(self):
        """Test that replica order does not change the reduction"""
        rng = np.random.default_rng(15)
        samples = rng.lognormal(size=(200, 3))
        shuffled = samples[rng.permutation(200)]

        mean, stderr = compensated_moments(samples)
        mean_shuffled, stderr_shuffled = compensated_moments(shuffled)
        np.testing.assert_array_equal(mean, mean_shuffled)
        np.testing.assert_array_equal(stderr, stderr_shuffled)
        np.testing.assert_allclose(mean, samples.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(stderr, samples.std(axis=0, ddof=1) / np.sqrt(200), rtol=1e-10)

    def test_single_replica(self):
        """Test an infinite standard error for one replica"""
        _, stderr = compensated_moments(np.ones((1, 2)))

        assert np.all(np.isinf(stderr))

    def test_linear_remainder_vanishes(self):
        """Test that the first-order remainder of constant G is numerically zero"""
        scenario = parse_scenario(scenario_data(
            order=1, estimator={'mode': 'pointwise-sup', 'p': 2, 'target': 'remainder'}))

        estimate = run_moment_estimate(scenario, M=4, workers=1)
        assert estimate.value <= 1e-18
        assert estimate.M == 4
        assert estimate.blowups == 0

    def test_coefficient_target_ignores_epsilon(self):
        """Test that coefficient moments depend on delta only"""
        scenario = parse_scenario(scenario_data(
            order=1, estimator={'mode': 'space-time-Lp', 'p': 2, 'target': 'coefficient'}))
        points = [SweepPoint(0.1, 0.1), SweepPoint(0.01, 0.1)]

        first, second = collect_estimates(scenario, points, 8, 7, workers=1)
        assert first.value == second.value
        assert first.value > 0

    def test_replicas_are_reproducible(self):
        """Test that a fixed master seed gives identical estimates"""
        scenario = parse_scenario(scenario_data())

        first = run_moment_estimate(scenario, M=6, workers=1)
        second = run_moment_estimate(scenario, M=6, workers=1)
        assert first.value == second.value
        assert first.stderr == second.stderr
        assert run_moment_estimate(scenario, M=6, master_seed=8, workers=1).value != first.value

    def test_exceedance(self):
        """Test exceedance probabilities with a binomial interval"""
        scenario = parse_scenario(scenario_data(
            estimator={'mode': 'pointwise-sup', 'p': 2, 'threshold': 1e-9}))

        estimate = run_moment_estimate(scenario, estimator='exceedance', M=10, workers=1)
        assert estimate.value == 1.0
        assert estimate.ci[1] == pytest.approx(1.0)
        assert estimate.ci[0] < 1.0

    def test_exceedance_reads_normalized_remainder(self):
        """Test that exceedance of the remainder is measured on w_n"""
        estimator = {'mode': 'exceedance', 'p': 2, 'target': 'remainder', 'threshold': 0.1}
        first = run_moment_estimate(parse_scenario(scenario_data(
            noise={'epsilon': 0.0625, 'delta': 0.1}, estimator=estimator)), M=20, workers=1)
        second = run_moment_estimate(parse_scenario(scenario_data(
            noise={'epsilon': 0.015625, 'delta': 0.1}, estimator=estimator)), M=20, workers=1)

        # for constant G, w_0 is the stochastic convolution whatever epsilon is
        assert first.target == NORMALIZED_REMAINDER
        assert first.value == second.value
        assert 0.0 < first.value < 1.0

    def test_exceedance_needs_threshold(self):
        """Test rejection of exceedance without a threshold"""
        with pytest.raises(ValueError):
            run_moment_estimate(parse_scenario(scenario_data()), estimator='exceedance',
                                M=2, workers=1)

    def test_blow_up_threshold(self, monkeypatch):
        """Test that too many blown-up replicas abort the estimate"""
        def explode(*args, **kwargs):
            raise SolverBlowUpError(1, 0.0, 0.0)

        monkeypatch.setattr("src.harness.estimators.simulate", explode)
        with pytest.raises(BlowUpThresholdError):
            run_moment_estimate(parse_scenario(scenario_data()), M=4, workers=1)


def white_cosine_scenario():
    """Order-0 remainder of G = cos driven by white noise in d = 1"""
    return parse_scenario(scenario_data(
        grid={'dimension': 1, 'modes': 128}, time={'dt': 1e-3, 'steps': 250},
        coefficient={'name': 'cosine'}, initial={'kind': 'constant', 'mean': 0.5},
        noise={'epsilon': 2.0 ** -6, 'delta': 0.0},
        estimator={'mode': 'pointwise-sup', 'p': 2, 'target': 'remainder'}))


class TestLeadingOrder:
    """Test remainder moments against the leading-order variance"""

    def test_matches_scaled_convolution_variance(self):
        """Test that E|u - u0|^2 is within a factor 4 of eps K_0(T)"""
        scenario = white_cosine_scenario()
        grid = build_grid(1, 128)
        expected = scenario.noise.epsilon * convolution_variance(grid, build_multiplier(grid, 0.0), 0.25)

        estimate = run_moment_estimate(scenario, M=200, master_seed=1, workers=1)
        assert estimate.blowups == 0
        assert expected / 4.0 <= estimate.value <= 4.0 * expected

    def test_master_seeds_agree(self):
        """Test that two master seeds agree within three joint standard errors"""
        scenario = white_cosine_scenario()

        first = run_moment_estimate(scenario, M=200, master_seed=1, workers=1)
        second = run_moment_estimate(scenario, M=200, master_seed=2, workers=1)
        assert first.value != second.value
        assert abs(first.value - second.value) <= 3.0 * np.hypot(first.stderr, second.stderr)


class TestSweeps:
    """Test rate, divergence and survival sweeps"""

    def test_fit_loglog(self):
        """Test an exact power law and the usable-point filter"""
        x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
        values = 3.0 * x ** 1.5
        stderr = 0.01 * values
        stderr[-1] = 0.5 * values[-1]

        fit = fit_loglog(x, values, stderr)
        assert fit.slope == pytest.approx(1.5)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.used == [True, True, True, True, False]
        with pytest.raises(ValueError):
            fit_loglog(x[:3], values[:3], stderr[:3])

    def test_linear_rate(self):
        """Test the exact unit slope of the constant-G variance"""
        report = rate_sweep(parse_scenario(scenario_data()), workers=1)

        assert list(report.table.columns) == RESULT_COLUMNS
        assert len(report.table) == 4
        assert report.predicted == pytest.approx(1.0)
        assert report.slope == pytest.approx(1.0, abs=1e-3)
        assert report.passed
        summary = report.summary()
        assert summary['kind'] == 'rate' and summary['passed']

    def test_divergence_structure(self):
        """Test the divergence table and verdict fields"""
        scenario = parse_scenario(scenario_data(order=1, sweep={
            'deltas': [0.4, 0.2, 0.1, 0.05], 'schedule': {'kind': 'fixed'}, 'tolerance': 0.5}))

        report = divergence_sweep(scenario, M=200, workers=1)
        assert list(report.table.columns) == RESULT_COLUMNS + ['k_reference', 'ratio']
        np.testing.assert_allclose(report.table['k_reference'], 1.0)
        assert report.ratio_spread >= 1.0
        assert report.predicted == 0.0
        assert report.linear_r_squared is None

    def test_survival_zero_noise(self):
        """Test that epsilon = 0 always survives"""
        table = survival_curve(sqrt_scenario(), epsilons=[0.0], M=5, workers=1)

        assert table.loc[0, 'survival'] == 1.0
        assert table.loc[0, 'survived'] == 5

    def test_survival_power_law_zero(self):
        """Test that epsilon = 0 under a power law uses the scenario delta"""
        scenario = sqrt_scenario()
        schedule = RegimeSchedule(POWER_LAW, exponent=0.25)

        table = survival_curve(scenario, epsilons=[0.0, 0.0001], schedule=schedule, M=3, workers=1)
        assert table.loc[0, 'delta'] == 0.1
        assert table.loc[1, 'delta'] == pytest.approx(0.1)

    def test_survival_tiny_margin(self):
        """Test that a tiny margin stops most replicas"""
        table = survival_curve(sqrt_scenario(), gamma=1e-3, epsilons=[0.1], M=5, workers=1)

        assert table.loc[0, 'survival'] < 1.0
        assert 0.0 <= table.loc[0, 'ci_low'] <= table.loc[0, 'ci_high'] <= 1.0

    def test_survival_nondecreasing(self):
        """Test the monotonicity verdict"""
        table = pd.DataFrame({'epsilon': [0.1, 0.01, 0.001], 'survival': [0.5, 0.8, 1.0],
                              'ci_high': [0.6, 0.9, 1.0]})
        assert survival_nondecreasing(table)

        table['survival'] = [1.0, 0.5, 0.4]
        table['ci_high'] = [1.0, 0.6, 0.5]
        assert not survival_nondecreasing(table)
