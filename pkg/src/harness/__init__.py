"""
Experiment harness: scenarios, Monte Carlo estimators, sweeps and the CLI
"""

from .scenario import (
    Scenario, ScenarioError, ScenarioSetup, setup, parse_scenario, load_scenario,
    preset, PRESET_NAMES
)
from .schedules import RegimeSchedule, k_delta_exponent
from .estimators import (
    MomentEstimate, SweepPoint, BlowUpThresholdError, run_moment_estimate,
    collect_estimates, compensated_moments
)
from .sweeps import (
    RateReport, SlopeFit, fit_loglog, rate_sweep, divergence_sweep, survival_curve,
    survival_nondecreasing
)
from .runner import ExperimentRunner
from .cli import cli

__all__ = [
    'Scenario', 'ScenarioError', 'ScenarioSetup', 'setup', 'parse_scenario', 'load_scenario',
    'preset', 'PRESET_NAMES', 'RegimeSchedule', 'k_delta_exponent', 'MomentEstimate',
    'SweepPoint', 'BlowUpThresholdError', 'run_moment_estimate', 'collect_estimates',
    'compensated_moments', 'RateReport', 'SlopeFit', 'fit_loglog', 'rate_sweep',
    'divergence_sweep', 'survival_curve', 'survival_nondecreasing', 'ExperimentRunner', 'cli'
]
