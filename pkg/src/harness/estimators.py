"""
Replica-parallel Monte Carlo moment estimates of remainders and coefficients
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from ..config import config
from ..noise.path import NoisePath, replica_seed
from ..solver.she import SolverBlowUpError, simulate
from ..expansion.engine import solve_coefficients, assemble_remainder, expansion_error
from .scenario import Scenario, ScenarioSetup, setup, POINTWISE_SUP, SPACE_TIME_LP, EXCEEDANCE
from .schedules import REMAINDER, NORMALIZED_REMAINDER, COEFFICIENT

logger = logging.getLogger(__name__)


class BlowUpThresholdError(RuntimeError):
    """Too many replicas produced non-finite trajectories"""

    def __init__(self, blowups: int, replicas: int, limit: float):
        self.blowups = blowups
        self.replicas = replicas
        super().__init__(f"{blowups}/{replicas} replicas blew up (limit {limit:.1%})")


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    delta: float


@dataclass
class MomentEstimate:
    """Monte Carlo estimate of one moment at one (epsilon, delta)

    For pointwise-sup the value is the largest per-point moment over the stored
    (t, x) lattice, a lower bound of the supremum over [0, T] x torus.
    """
    mode: str
    p: float
    M: int
    value: float
    stderr: float
    epsilon: float
    delta: float
    target: str = REMAINDER
    order: int = 0
    blowups: int = 0
    ci: Optional[Tuple[float, float]] = None
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {'epsilon': self.epsilon, 'delta': self.delta, 'estimate': self.value,
                'stderr': self.stderr, 'M': self.M}


def lattice_indices(steps: int, count: int) -> np.ndarray:
    """count stored time indices spread evenly over (0, steps], ending at steps"""
    count = min(count, steps)
    return np.unique(np.round(np.linspace(steps / count, steps, count)).astype(int))


def compensated_moments(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors over replicas (axis 0)

    Rows are sorted per column before a Kahan summation, so the result does not
    depend on replica order.
    """
    samples = np.sort(np.asarray(samples, dtype=float), axis=0)
    M = samples.shape[0]

    def kahan(rows: np.ndarray) -> np.ndarray:
        total = np.zeros(rows.shape[1:])
        carry = np.zeros(rows.shape[1:])
        for row in rows:
            y = row - carry
            t = total + y
            carry = (t - total) - y
            total = t
        return total

    mean = kahan(samples) / M
    if M < 2:
        return mean, np.full_like(mean, np.inf)
    deviations = np.sort((samples - mean) ** 2, axis=0)
    variance = kahan(deviations) / (M - 1)
    return mean, np.sqrt(variance / M)


def statistic_target(scenario: Scenario) -> str:
    """Series the estimator reduces; exceedance of the remainder is read on w_n"""
    target = scenario.estimator.target
    if scenario.estimator.mode == EXCEEDANCE and target == REMAINDER:
        return NORMALIZED_REMAINDER
    return target


def _statistic(series: np.ndarray, scenario: Scenario, lattice: np.ndarray) -> np.ndarray:
    estimator = scenario.estimator
    dt = scenario.time.dt
    magnitude = np.abs(series)

    if estimator.mode == POINTWISE_SUP:
        return (magnitude[lattice] ** estimator.p).ravel()

    axes = tuple(range(1, series.ndim))
    lp = dt * np.sum(np.mean(magnitude[1:] ** estimator.p, axis=axes))
    if estimator.mode == SPACE_TIME_LP:
        return np.array([lp])

    # exceedance: L^p norm for conservative runs, lattice points otherwise
    if scenario.conservative:
        return np.array([float(lp ** (1.0 / estimator.p) > estimator.threshold)])
    return (magnitude[lattice] > estimator.threshold).astype(float).ravel()


def replica_samples(prepared: ScenarioSetup, points: Sequence[SweepPoint], replica: int,
                    master_seed: int) -> List[Optional[np.ndarray]]:
    """Statistics of one replica at every sweep point (None where the solver blew up)

    All points share the replica's noise path; the expansion stack is solved once
    per distinct delta.
    """
    scenario = prepared.scenario
    seed = replica_seed(master_seed, replica)
    path = NoisePath(grid=prepared.grid, seed=seed, dt=scenario.time.dt,
                     steps=scenario.time.steps, vector=scenario.conservative)
    lattice = lattice_indices(scenario.time.steps, scenario.estimator.lattice_times)
    target = statistic_target(scenario)
    order = scenario.order

    stacks = {}
    results = []
    for point in points:
        if point.delta not in stacks:
            stacks[point.delta] = solve_coefficients(
                order, prepared.expansion_coefficient, prepared.u0, path, point.delta,
                scenario.conservative, n_moll=scenario.noise.n_moll, dealias=scenario.noise.dealias
            )
        stack = stacks[point.delta]

        if target == COEFFICIENT:
            results.append(_statistic(stack.series(order), scenario, lattice))
            continue

        try:
            trajectory = simulate(prepared.solver_config(point.epsilon, point.delta, seed),
                                  prepared.solver_coefficient, prepared.u0, path)
        except SolverBlowUpError as e:
            logger.error(f"Replica {replica} blew up at epsilon={point.epsilon:g}: {e}")
            results.append(None)
            continue

        if target == NORMALIZED_REMAINDER:
            series = assemble_remainder(trajectory, stack, point.epsilon, order).values
        else:
            series = expansion_error(trajectory, stack, point.epsilon, order)
        results.append(_statistic(series, scenario, lattice))

    return results


def _chunk(scenario: Scenario, points: Sequence[SweepPoint], replicas: Sequence[int],
           master_seed: int, worker: Callable) -> list:
    prepared = setup(scenario)
    return [worker(prepared, points, r, master_seed) for r in replicas]


def fan_out(scenario: Scenario, points: Sequence[SweepPoint], M: int, master_seed: int,
            worker: Callable = replica_samples, workers: Optional[int] = None) -> list:
    """Run worker over M replicas on a joblib pool, returned in replica order"""
    workers = workers or config.default_workers
    chunk_size = int(config.get('harness.chunk_size', 50))
    chunks = [range(start, min(start + chunk_size, M)) for start in range(0, M, chunk_size)]
    logger.info(f"Running {M} replicas over {len(points)} point(s) with {workers} worker(s)")

    results = Parallel(n_jobs=workers)(
        delayed(_chunk)(scenario, points, chunk, master_seed, worker) for chunk in chunks
    )
    return [replica for chunk in results for replica in chunk]


def reduce_point(scenario: Scenario, point: SweepPoint, samples: List[Optional[np.ndarray]]) -> MomentEstimate:
    """Reduce per-replica statistics of one sweep point to a MomentEstimate"""
    M = len(samples)
    finite = [s for s in samples if s is not None]
    blowups = M - len(finite)
    limit = float(config.get('harness.blowup_fraction_max', 0.01))
    if blowups > limit * M:
        raise BlowUpThresholdError(blowups, M, limit)
    if blowups:
        logger.warning(f"{blowups}/{M} replicas blew up at epsilon={point.epsilon:g}; excluded")

    estimator = scenario.estimator
    mean, stderr = compensated_moments(np.stack(finite))
    best = int(np.argmax(mean))
    estimate = MomentEstimate(
        mode=estimator.mode, p=estimator.p, M=len(finite), value=float(mean[best]),
        stderr=float(stderr[best]), epsilon=point.epsilon, delta=point.delta,
        target=statistic_target(scenario), order=scenario.order, blowups=blowups,
    )

    if estimator.mode == EXCEEDANCE:
        hits = int(round(estimate.value * estimate.M))
        interval = stats.binomtest(hits, estimate.M).proportion_ci(confidence_level=0.95)
        estimate.ci = (float(interval.low), float(interval.high))
        estimate.stderr = float(np.sqrt(estimate.value * (1.0 - estimate.value) / estimate.M))
        estimate.extra['threshold'] = estimator.threshold
    return estimate


def collect_estimates(scenario: Scenario, points: Sequence[SweepPoint], M: int,
                      master_seed: int, workers: Optional[int] = None) -> List[MomentEstimate]:
    """Coupled estimates at several sweep points (common random numbers across points)"""
    per_replica = fan_out(scenario, points, M, master_seed, workers=workers)
    estimates = []
    for index, point in enumerate(points):
        estimate = reduce_point(scenario, point, [r[index] for r in per_replica])
        logger.info(f"epsilon={point.epsilon:g} delta={point.delta:g}: "
                    f"{estimate.value:.6g} +- {estimate.stderr:.2g} (M={estimate.M})")
        estimates.append(estimate)
    return estimates


def run_moment_estimate(scenario: Scenario, estimator: Optional[str] = None,
                        M: Optional[int] = None, master_seed: Optional[int] = None,
                        workers: Optional[int] = None) -> MomentEstimate:
    """Estimate the scenario's moment at its own (epsilon, delta)

    Args:
        scenario: Scenario
        estimator: Override of scenario.estimator.mode
        M: Replica count (default scenario.replicas)
        master_seed: Master seed (default scenario.seed)
        workers: Worker processes (default from configuration)

    Returns:
        MomentEstimate
    """
    if estimator == EXCEEDANCE and scenario.estimator.threshold is None:
        raise ValueError("exceedance estimator requires a threshold")
    if estimator is not None:
        scenario = scenario.model_copy(
            update={'estimator': scenario.estimator.model_copy(update={'mode': estimator})}
        )
    M = M or scenario.replicas
    master_seed = scenario.seed if master_seed is None else master_seed
    point = SweepPoint(scenario.noise.epsilon, scenario.noise.delta)
    return collect_estimates(scenario, [point], M, master_seed, workers)[0]
