"""
Rate sweeps over epsilon, divergence sweeps over delta and survival curves
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..config import config
from ..noise.multiplier import k_reference
from ..noise.path import NoisePath, replica_seed
from ..solver.she import SolverBlowUpError, simulate
from .scenario import Scenario, ScenarioSetup, POINTWISE_SUP, SPACE_TIME_LP
from .schedules import RegimeSchedule, POWER_LAW, COEFFICIENT, k_delta_exponent
from .estimators import SweepPoint, collect_estimates, fan_out, statistic_target

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['epsilon', 'delta', 'estimate', 'stderr', 'M']


@dataclass
class SlopeFit:
    """Least-squares line through (log x, log y) with a 95% interval on the slope"""
    slope: float
    intercept: float
    ci: Tuple[float, float]
    r_squared: float
    used: List[bool]


@dataclass
class RateReport:
    """Sweep estimates with the fitted log-log slope and its verdict"""
    kind: str
    table: pd.DataFrame
    fit: Optional[SlopeFit]
    predicted: Optional[float]
    tolerance: float
    passed: bool
    schedule: str = ""
    admissible: bool = True
    ratio_spread: Optional[float] = None
    linear_r_squared: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def slope(self) -> Optional[float]:
        return self.fit.slope if self.fit else None

    def summary(self) -> dict:
        """JSON-friendly verdict for run manifests"""
        return {
            'kind': self.kind,
            'slope': self.slope,
            'slope_ci': list(self.fit.ci) if self.fit else None,
            'r_squared': self.fit.r_squared if self.fit else None,
            'predicted': self.predicted,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'schedule': self.schedule,
            'admissible': self.admissible,
            'ratio_spread': self.ratio_spread,
            'linear_r_squared': self.linear_r_squared,
            'notes': self.notes,
        }


def fit_loglog(x: Sequence[float], values: Sequence[float], stderr: Sequence[float]) -> SlopeFit:
    """Fit log(values) against log(x) using points with stderr/value below the configured ratio

    Raises:
        ValueError: fewer than the minimum number of usable points
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    stderr = np.asarray(stderr, dtype=float)
    ratio_max = float(config.get('harness.stderr_ratio_max', 0.2))
    minimum = int(config.get('harness.min_sweep_points', 4))

    with np.errstate(divide='ignore', invalid='ignore'):
        used = (x > 0) & (values > 0) & (stderr / values < ratio_max)
    if used.sum() < minimum:
        raise ValueError(f"Only {int(used.sum())} usable sweep point(s); at least {minimum} needed")
    dropped = int((~used).sum())
    if dropped:
        logger.warning(f"Dropped {dropped} sweep point(s) with stderr/value >= {ratio_max}")

    result = stats.linregress(np.log(x[used]), np.log(values[used]))
    half_width = stats.t.ppf(0.975, int(used.sum()) - 2) * result.stderr
    return SlopeFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        ci=(float(result.slope - half_width), float(result.slope + half_width)),
        r_squared=float(result.rvalue ** 2),
        used=used.tolist(),
    )


def _with_overrides(scenario: Scenario, n: Optional[int], p: Optional[float],
                    **estimator) -> Scenario:
    updates = {}
    if n is not None:
        updates['order'] = n
    if p is not None:
        estimator['p'] = p
    if estimator:
        updates['estimator'] = scenario.estimator.model_copy(update=estimator)
    return scenario.model_copy(update=updates) if updates else scenario


def _table(estimates) -> pd.DataFrame:
    return pd.DataFrame([e.as_row() for e in estimates], columns=RESULT_COLUMNS)


def rate_sweep(scenario: Scenario, epsilons: Optional[Sequence[float]] = None,
               schedule: Optional[RegimeSchedule] = None, n: Optional[int] = None,
               p: Optional[float] = None, M: Optional[int] = None,
               master_seed: Optional[int] = None, workers: Optional[int] = None) -> RateReport:
    """Estimate the scenario's moment over an epsilon sweep and fit the log-log slope

    Paths are shared across epsilon within each replica, so the fitted slope
    carries no between-point sampling noise from independent draws.

    Returns:
        RateReport with the predicted exponent of the scheduled regime
    """
    scenario = _with_overrides(scenario, n, p)
    epsilons = list(epsilons if epsilons is not None else scenario.sweep.epsilons)
    schedule = schedule or scenario.schedule()
    M = M or scenario.replicas
    master_seed = scenario.seed if master_seed is None else master_seed
    d = scenario.grid.dimension
    i = 2 if scenario.conservative else 1

    admissible = schedule.is_admissible(scenario.order, scenario.conservative,
                                        scenario.is_irregular, d)
    if not admissible:
        logger.warning(f"Schedule {schedule.describe()} leaves the admissible regime "
                       f"for order {scenario.order} (d={d})")

    points = [SweepPoint(eps, schedule.delta_for(eps)) for eps in epsilons]
    estimates = collect_estimates(scenario, points, M, master_seed, workers)
    table = _table(estimates)

    predicted = schedule.predicted_exponent(scenario.order, scenario.estimator.p, i, d,
                                            statistic_target(scenario))
    fit = fit_loglog(table['epsilon'], table['estimate'], table['stderr'])
    tolerance = scenario.sweep.tolerance
    passed = abs(fit.slope - predicted) <= tolerance
    logger.info(f"Rate sweep: slope {fit.slope:.4f} (95% CI {fit.ci[0]:.3f}..{fit.ci[1]:.3f}), "
                f"predicted {predicted:.4f}, {'PASS' if passed else 'FAIL'}")

    return RateReport(kind='rate', table=table, fit=fit, predicted=predicted,
                      tolerance=tolerance, passed=passed, schedule=schedule.describe(),
                      admissible=admissible)


def divergence_sweep(scenario: Scenario, deltas: Optional[Sequence[float]] = None,
                     n: Optional[int] = None, p: Optional[float] = None,
                     M: Optional[int] = None, master_seed: Optional[int] = None,
                     workers: Optional[int] = None) -> RateReport:
    """Moments of the order-n coefficient against K_i(delta, d)^(pn/2)

    The verdict requires the ratio estimate / K^(pn/2) to stay within the
    configured max/min bound. When K is logarithmic (d=2, non-conservative) the
    estimate must also be affine in log(1/delta).
    """
    mode = SPACE_TIME_LP if scenario.conservative else POINTWISE_SUP
    scenario = _with_overrides(scenario, n, p, target=COEFFICIENT, mode=mode)
    deltas = list(deltas if deltas is not None else scenario.sweep.deltas)
    M = M or scenario.replicas
    master_seed = scenario.seed if master_seed is None else master_seed
    d = scenario.grid.dimension
    i = 2 if scenario.conservative else 1
    order, power = scenario.order, scenario.estimator.p

    points = [SweepPoint(scenario.noise.epsilon, delta) for delta in deltas]
    estimates = collect_estimates(scenario, points, M, master_seed, workers)
    table = _table(estimates)
    table['k_reference'] = [k_reference(i, d, delta) for delta in deltas]
    table['ratio'] = table['estimate'] / table['k_reference'] ** (power * order / 2.0)

    spread = float(table['ratio'].max() / table['ratio'].min())
    ratio_bound = float(config.get('harness.ratio_bound', 10.0))
    passed = spread <= ratio_bound

    beta = k_delta_exponent(i, d)
    predicted = None if beta is None else -beta * power * order / 2.0
    fit = fit_loglog(table['delta'], table['estimate'], table['stderr'])

    linear_r_squared = None
    if beta is None:
        line = stats.linregress(np.log(1.0 / table['delta'].to_numpy()), table['estimate'].to_numpy())
        linear_r_squared = float(line.rvalue ** 2)
        passed = passed and linear_r_squared >= float(config.get('harness.r_squared_min', 0.95))
    elif predicted is not None:
        passed = passed and abs(fit.slope - predicted) <= scenario.sweep.tolerance

    logger.info(f"Divergence sweep: ratio spread {spread:.3f}, slope {fit.slope:.4f}, "
                f"{'PASS' if passed else 'FAIL'}")
    return RateReport(kind='divergence', table=table, fit=fit, predicted=predicted,
                      tolerance=scenario.sweep.tolerance, passed=passed,
                      schedule=f"delta in {deltas}", ratio_spread=spread,
                      linear_r_squared=linear_r_squared)


def _survival_replica(prepared: ScenarioSetup, points: Sequence[SweepPoint], replica: int,
                      master_seed: int) -> List[bool]:
    scenario = prepared.scenario
    seed = replica_seed(master_seed, replica)
    path = NoisePath(grid=prepared.grid, seed=seed, dt=scenario.time.dt,
                     steps=scenario.time.steps, vector=scenario.conservative)
    survived = []
    for point in points:
        try:
            trajectory = simulate(prepared.solver_config(point.epsilon, point.delta, seed),
                                  prepared.solver_coefficient, prepared.u0, path)
            survived.append(not trajectory.stopped)
        except SolverBlowUpError as e:
            logger.error(f"Replica {replica} blew up at epsilon={point.epsilon:g}: {e}")
            survived.append(False)
    return survived


def survival_curve(scenario: Scenario, gamma: Optional[float] = None,
                   epsilons: Optional[Sequence[float]] = None,
                   schedule: Optional[RegimeSchedule] = None, M: Optional[int] = None,
                   master_seed: Optional[int] = None, workers: Optional[int] = None) -> pd.DataFrame:
    """Empirical P(tau > T) per epsilon with exact binomial 95% intervals

    Returns:
        DataFrame with columns epsilon, delta, survived, M, survival, ci_low, ci_high
    """
    if gamma is not None:
        if scenario.stopping is None:
            raise ValueError("gamma override needs a scenario with a stopping section")
        scenario = scenario.model_copy(
            update={'stopping': scenario.stopping.model_copy(update={'gamma': gamma})}
        )
    epsilons = list(epsilons if epsilons is not None else scenario.sweep.epsilons)
    schedule = schedule or scenario.schedule()
    M = M or scenario.replicas
    master_seed = scenario.seed if master_seed is None else master_seed

    points = []
    for eps in epsilons:
        if eps == 0 and schedule.kind == POWER_LAW:
            points.append(SweepPoint(0.0, scenario.noise.delta))
        else:
            points.append(SweepPoint(eps, schedule.delta_for(eps)))

    per_replica = fan_out(scenario, points, M, master_seed, worker=_survival_replica,
                          workers=workers)
    rows = []
    for index, point in enumerate(points):
        survived = int(sum(r[index] for r in per_replica))
        interval = stats.binomtest(survived, M).proportion_ci(confidence_level=0.95)
        rows.append({'epsilon': point.epsilon, 'delta': point.delta, 'survived': survived,
                     'M': M, 'survival': survived / M,
                     'ci_low': float(interval.low), 'ci_high': float(interval.high)})
        logger.info(f"Survival at epsilon={point.epsilon:g}: {survived}/{M}")
    return pd.DataFrame(rows)


def survival_nondecreasing(table: pd.DataFrame) -> bool:
    """Whether survival does not drop, within its interval, as epsilon decreases"""
    ordered = table.sort_values('epsilon', ascending=False).reset_index(drop=True)
    return all(ordered.loc[j + 1, 'ci_high'] >= ordered.loc[j, 'survival']
               for j in range(len(ordered) - 1))
