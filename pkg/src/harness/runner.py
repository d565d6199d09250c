"""
Experiment runner: executes one harness command and persists its results
"""

import json
import time
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .. import __version__
from ..config import config
from ..noise.multiplier import build_multiplier
from ..noise.path import NoisePath, replica_seed, mode_variance_check
from ..solver.she import simulate
from ..solver.export import export_trajectory, export_fields
from ..expansion.engine import solve_coefficients
from ..utils.run_utils import resolve_workers, file_hash, host_info
from .scenario import Scenario, setup
from .estimators import run_moment_estimate
from .sweeps import rate_sweep, divergence_sweep, survival_curve, survival_nondecreasing

logger = logging.getLogger(__name__)


class ExperimentRunner:
    """Runs harness commands for one scenario and writes CSV tables plus a JSON manifest"""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 replicas: Optional[int] = None, workers: Optional[int] = None,
                 out_dir: Optional[str] = None):
        """Initialize runner

        Args:
            scenario: Validated scenario
            seed: Master seed (default scenario.seed)
            replicas: Replica count M (default scenario.replicas)
            workers: Worker processes (default SHE_WORKERS or physical CPUs)
            out_dir: Output directory (default from configuration)
        """
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.replicas = replicas or scenario.replicas
        self.explicit_replicas = replicas
        self.workers = resolve_workers(workers, config.default_workers)
        self.out_dir = Path(out_dir) if out_dir else config.output_dir / scenario.name
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.float_format = config.get('output.float_format', '%.17g')

        logger.info(f"ExperimentRunner initialized for '{scenario.name}' "
                    f"(seed={self.seed}, M={self.replicas}, workers={self.workers})")

    def _write_table(self, name: str, table: pd.DataFrame) -> Path:
        path = self.out_dir / f"{name}.csv"
        table.to_csv(path, index=False, float_format=self.float_format)
        return path

    def _write_manifest(self, command: str, started: float, outputs: Dict[str, Path],
                        verdict: dict) -> Path:
        manifest = {
            'command': command,
            'version': __version__,
            'scenario': self.scenario.echo(),
            'seed': self.seed,
            'replicas': self.replicas,
            'workers': self.workers,
            'budgets': config.get('budgets', {}),
            'outputs': {name: {'path': str(path), 'sha1': file_hash(path)}
                        for name, path in outputs.items()},
            'verdict': verdict,
            'wall_time_s': round(time.time() - started, 3),
            'host': host_info(),
        }
        path = self.out_dir / f"{command}_manifest.json"
        with open(path, 'w') as f:
            json.dump(manifest, f, indent=2, default=str)
        logger.info(f"Wrote {command} results to {self.out_dir}")
        return path

    def simulate(self) -> Tuple[pd.DataFrame, bool]:
        """One trajectory at the scenario's (epsilon, delta)"""
        started = time.time()
        prepared = setup(self.scenario)
        s = self.scenario
        seed = replica_seed(self.seed, 0)
        path = NoisePath(prepared.grid, seed, s.time.dt, s.time.steps, vector=s.conservative)
        trajectory = simulate(prepared.solver_config(s.noise.epsilon, s.noise.delta, seed),
                              prepared.solver_coefficient, prepared.u0, path)

        axes = tuple(range(1, trajectory.values.ndim))
        table = pd.DataFrame({
            'time': trajectory.times,
            'mean': trajectory.values.mean(axis=axes),
            'min': trajectory.values.min(axis=axes),
            'max': trajectory.values.max(axis=axes),
            'l2': np.sqrt((trajectory.values ** 2).mean(axis=axes)),
        })
        outputs = {'summary': self._write_table('simulate', table)}
        outputs['fields'], outputs['sidecar'] = export_trajectory(
            trajectory, str(self.out_dir), config_echo=s.echo()
        )
        verdict = {'stopping_index': trajectory.stopping_index, 'passed': True}
        self._write_manifest('simulate', started, outputs, verdict)
        return table, True

    def expand(self) -> Tuple[pd.DataFrame, bool]:
        """Expansion coefficients u^0..u^n of one replica"""
        started = time.time()
        prepared = setup(self.scenario)
        s = self.scenario
        seed = replica_seed(self.seed, 0)
        path = NoisePath(prepared.grid, seed, s.time.dt, s.time.steps, vector=s.conservative)
        stack = solve_coefficients(s.order, prepared.expansion_coefficient, prepared.u0, path,
                                   s.noise.delta, s.conservative, n_moll=s.noise.n_moll,
                                   dealias=s.noise.dealias)

        rows = []
        times = np.arange(stack.steps + 1) * stack.dt
        for i in range(stack.order + 1):
            series = stack.series(i)
            flat = series.reshape(series.shape[0], -1)
            for t, values in zip(times, flat):
                rows.append({'time': t, 'order': i, 'mean': values.mean(),
                             'l2': np.sqrt(np.mean(values ** 2))})
        table = pd.DataFrame(rows)
        outputs = {'summary': self._write_table('expand', table)}
        outputs['fields'], outputs['sidecar'] = export_fields(
            str(self.out_dir), 'stack', {'coefficients': stack.values},
            {'kind': 'expansion', 'order': stack.order, 'seed': seed, 'dt': stack.dt,
             'delta': stack.delta, 'conservative': stack.conservative,
             'dimension': stack.grid.dimension, 'modes_per_axis': stack.grid.modes_per_axis,
             'config': s.echo()}
        )
        self._write_manifest('expand', started, outputs, {'order': stack.order, 'passed': True})
        return table, True

    def remainder(self) -> Tuple[pd.DataFrame, bool]:
        """Moment estimate of the remainder at the scenario's (epsilon, delta)"""
        started = time.time()
        estimate = run_moment_estimate(self.scenario, M=self.replicas, master_seed=self.seed,
                                       workers=self.workers)
        table = pd.DataFrame([estimate.as_row()])
        rtol = float(config.get('harness.stderr_ratio_max', 0.2))
        atol = float(config.get('harness.stderr_atol', 1e-12))
        passed = estimate.stderr <= atol + rtol * abs(estimate.value)
        verdict = {'mode': estimate.mode, 'target': estimate.target, 'p': estimate.p,
                   'blowups': estimate.blowups, 'ci': estimate.ci, 'passed': bool(passed)}
        self._write_manifest('remainder', started,
                             {'estimates': self._write_table('remainder', table)}, verdict)
        return table, bool(passed)

    def rates(self) -> Tuple[pd.DataFrame, bool]:
        started = time.time()
        report = rate_sweep(self.scenario, M=self.replicas, master_seed=self.seed,
                            workers=self.workers)
        self._write_manifest('rates', started,
                             {'estimates': self._write_table('rates', report.table)},
                             report.summary())
        return report.table, report.passed

    def divergence(self) -> Tuple[pd.DataFrame, bool]:
        started = time.time()
        report = divergence_sweep(self.scenario, M=self.replicas, master_seed=self.seed,
                                  workers=self.workers)
        self._write_manifest('divergence', started,
                             {'estimates': self._write_table('divergence', report.table)},
                             report.summary())
        return report.table, report.passed

    def survival(self) -> Tuple[pd.DataFrame, bool]:
        started = time.time()
        table = survival_curve(self.scenario, M=self.replicas, master_seed=self.seed,
                               workers=self.workers)
        smallest = table.loc[table['epsilon'].idxmin(), 'survival']
        monotone = survival_nondecreasing(table)
        passed = monotone and smallest >= float(config.get('harness.survival_min', 0.99))
        verdict = {'nondecreasing': monotone, 'final_survival': float(smallest),
                   'passed': bool(passed)}
        self._write_manifest('survival', started,
                             {'survival': self._write_table('survival', table)}, verdict)
        return table, bool(passed)

    def covariance_check(self, samples: Optional[int] = None) -> Tuple[pd.DataFrame, bool]:
        """Per-mode variance of the mollified increments against dt m_delta^2"""
        started = time.time()
        prepared = setup(self.scenario)
        s = self.scenario
        samples = samples or self.explicit_replicas or int(config.get('covariance_check.samples', 100000))
        sigma = float(config.get('covariance_check.sigma', 3.0))
        multiplier = build_multiplier(prepared.grid, s.noise.delta, s.noise.n_moll)
        table = mode_variance_check(prepared.grid, multiplier, s.time.dt, samples,
                                    replica_seed(self.seed, 0), sigma)
        passed = bool(table['passed'].all())
        written = table.assign(mode=table['mode'].map(lambda m: " ".join(map(str, m))))
        verdict = {'samples': samples, 'sigma': sigma,
                   'failed_modes': int((~table['passed']).sum()), 'passed': passed}
        self._write_manifest('covariance-check', started,
                             {'modes': self._write_table('covariance_check', written)}, verdict)
        return table, passed
