#!/usr/bin/env python3
"""
Long-running acceptance checks for the simulator and the rate harness.

Each check prints PASS/FAIL with a short diagnostic. Select checks by number:

    python scripts/run_acceptance.py            # all checks
    python scripts/run_acceptance.py 1 7 9      # a subset
"""

import sys
import time
import itertools
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.spectral import build_grid, Field
from src.noise import (
    NoisePath, build_multiplier, replica_seed, convolution_variance,
    discrete_convolution_variance, sample_increment
)
from src.coefficients import smooth_preset
from src.combinatorics import lambda_, lambda_m, unconstrained
from src.solver import SolverConfig, simulate, step_conservative
from src.expansion import (
    solve_coefficients, assemble_remainder, sigma_diagnostic, step_remainder
)
from src.harness import (
    load_scenario, rate_sweep, divergence_sweep, survival_curve, survival_nondecreasing
)
from src.harness.estimators import fan_out

SCENARIOS = Path(__file__).parent.parent / "config" / "scenarios"


def _coupled_run(G, d, N, delta, epsilon, n, seed, steps=50, dt=1e-3, conservative=False):
    grid = build_grid(d, N)
    rng = np.random.default_rng(seed)
    u0 = Field.physical(grid, 0.5 + 0.1 * rng.standard_normal(grid.shape))
    path = NoisePath(grid, seed, dt, steps, vector=conservative)
    config = SolverConfig(epsilon=epsilon, delta=delta, dt=dt, steps=steps,
                          conservative=conservative, seed=seed)
    trajectory = simulate(config, G, u0, path)
    stack = solve_coefficients(n, G, u0, path, delta, conservative)
    return grid, path, trajectory, stack


def check_linear_exactness():
    """G = 1, d=1, delta=0, n=1: w_1 vanishes pathwise"""
    G = smooth_preset("constant", c=1.0)
    worst = 0.0
    for seed, epsilon in itertools.product(range(10), [2.0 ** -2, 2.0 ** -6]):
        _, _, trajectory, stack = _coupled_run(G, 1, 128, 0.0, epsilon, 1, seed, steps=250)
        w = assemble_remainder(trajectory, stack, epsilon, 1).values
        worst = max(worst, float(np.max(np.abs(w))))
    return worst <= 1e-10, f"max |w_1| = {worst:.3e}"


def _terminal_coefficient(prepared, points, replica, master_seed):
    s = prepared.scenario
    path = NoisePath(prepared.grid, replica_seed(master_seed, replica), s.time.dt,
                     s.time.steps)
    stack = solve_coefficients(1, prepared.expansion_coefficient, prepared.u0, path,
                               points[0].delta, False)
    return stack.series(1)[-1, ::25]


def check_variance_oracle():
    """Var(u^1(T, x)) for G = 1 against the exact variance of the time-stepped convolution

    The continuum K_delta(T) is reported alongside; it differs from the scheme
    variance by the O(dt) bias of the exponential-Euler sum.
    """
    from src.harness import parse_scenario
    from src.harness.estimators import SweepPoint
    scenario = parse_scenario({
        'schema': 1, 'name': 'variance-oracle',
        'grid': {'dimension': 1, 'modes': 128}, 'time': {'dt': 1e-3, 'steps': 250},
        'coefficient': {'name': 'constant', 'value': 1.0},
        'initial': {'kind': 'constant', 'mean': 0.0},
        'noise': {'epsilon': 0.0, 'delta': 0.05}, 'order': 1, 'seed': 3,
    })
    M = 10000
    samples = np.stack(fan_out(scenario, [SweepPoint(0.0, 0.05)], M, 3,
                               worker=_terminal_coefficient))
    variance = samples.var(axis=0, ddof=1)
    stderr = variance * np.sqrt(2.0 / (M - 1))

    grid = build_grid(1, 128)
    multiplier = build_multiplier(grid, 0.05)
    continuum = convolution_variance(grid, multiplier, 0.25)
    discrete = discrete_convolution_variance(grid, multiplier, 0.25, 1e-3)
    ok = bool(np.all(np.abs(variance - discrete) <= 3 * stderr))
    return ok, (f"variances {np.round(variance, 5)} vs scheme {discrete:.5f} "
                f"(K_delta(T) = {continuum:.5f})")


def _rate_check(name):
    report = rate_sweep(load_scenario(SCENARIOS / name))
    return report.passed, (f"slope {report.slope:.3f} (CI {report.fit.ci[0]:.3f}..{report.fit.ci[1]:.3f}), "
                           f"predicted {report.predicted:.3f} +- {report.tolerance}")


def check_rate_n0():
    return _rate_check("cosine-d1-n0.json")


def check_rate_n1():
    return _rate_check("cosine-d1-n1.json")


def check_rate_conservative():
    return _rate_check("rational-conservative.json")


def check_divergence_d2():
    report = divergence_sweep(load_scenario(SCENARIOS / "divergence-d2.json"))
    ok = report.linear_r_squared is not None and report.linear_r_squared >= 0.95
    return ok, f"R^2 vs log(1/delta) = {report.linear_r_squared:.4f}, ratio spread {report.ratio_spread:.2f}"


def check_partitions():
    """Enumerations against brute force for k <= 8"""
    for k in range(1, 9):
        for l in range(0, k + 1):
            length = k - l
            brute = {q for q in itertools.product(range(k + 1), repeat=length)
                     if sum(q) == l and sum(i * x for i, x in enumerate(q, 1)) == k - 1}
            if {s.q for s in lambda_(k, l)} != (brute if l < k else set()):
                return False, f"lambda({k}, {l}) mismatch"
            regrouped = set()
            for m in range(l + 1, length * l + 2):
                solutions = {s.q for s in lambda_m(k, l, m)}
                brute_m = {q for q in itertools.product(range(k + 1), repeat=length)
                           if sum(q) == l and sum(i * x for i, x in enumerate(q, 1)) == m - 1}
                if solutions != brute_m:
                    return False, f"lambda_m({k}, {l}, {m}) mismatch"
                regrouped |= solutions
                if l + 1 <= m <= k - 1 and any(any(q[m - l:]) for q in solutions):
                    return False, f"projection property fails at ({k}, {l}, {m})"
                if l < m <= k:
                    padded = {s.q + (0,) * (k - m) for s in lambda_(m, l)}
                    if not padded <= solutions:
                        return False, f"zero padding fails at ({k}, {l}, {m})"
            if 0 < l < k and regrouped != {s.q for s in unconstrained(k, l)}:
                return False, f"regrouping fails at ({k}, {l})"
    return True, "k <= 8 exhaustive"


def check_mean_conservation():
    rng = np.random.default_rng(2024)
    worst = 0.0
    presets = ["cosine", "rational", "constant"]
    for trial in range(1000):
        d = int(rng.integers(1, 3))
        grid = build_grid(d, int(rng.choice([8, 16])))
        G = smooth_preset(presets[trial % 3], c=float(rng.uniform(0.5, 2.0)))
        multiplier = build_multiplier(grid, float(rng.uniform(0.05, 0.3)))
        path = NoisePath(grid, int(rng.integers(0, 2 ** 32)), 1e-3, 5, vector=True)
        u = Field.physical(grid, rng.uniform(-1.0, 1.0, grid.shape))
        for step in range(5):
            before = u.values.mean()
            u = step_conservative(u, sample_increment(path, step, multiplier), G,
                                  float(rng.uniform(0.0, 1.0)), 1e-3)
            worst = max(worst, abs(u.values.mean() - before))
    return worst <= 1e-12, f"max mean drift per step {worst:.3e}"


def check_remainder_recursion():
    G = smooth_preset("cosine")
    worst = 0.0
    for seed in range(10):
        epsilon = 2.0 ** -4
        _, _, trajectory, stack = _coupled_run(G, 1, 64, 0.1, epsilon, 3, seed)
        previous = assemble_remainder(trajectory, stack, epsilon, 0).values
        for n in range(1, 4):
            current = assemble_remainder(trajectory, stack, epsilon, n).values
            residual = current - (epsilon ** -0.5 * previous - stack.series(n))
            worst = max(worst, float(np.max(np.abs(residual))))
            previous = current
    return worst <= 1e-12, f"max recursion residual {worst:.3e}"


def check_survival():
    table = survival_curve(load_scenario(SCENARIOS / "ssep-survival.json"), gamma=0.2)
    final = float(table.loc[table['epsilon'].idxmin(), 'survival'])
    ok = survival_nondecreasing(table) and final >= 0.99
    return ok, f"survival {table['survival'].round(3).tolist()}"


def check_sigma_replay():
    G = smooth_preset("rational")
    worst = 0.0
    for seed in range(10):
        epsilon = 2.0 ** -3
        grid, path, trajectory, stack = _coupled_run(G, 1, 64, 0.1, epsilon, 2, seed)
        multiplier = build_multiplier(grid, 0.1)
        for n in range(0, 3):
            w = assemble_remainder(trajectory, stack, epsilon, n)
            sigma = sigma_diagnostic(trajectory, stack, G, epsilon, n)
            for t in range(stack.steps):
                replay = step_remainder(w.at(t), Field.physical(grid, sigma[t]),
                                        sample_increment(path, t, multiplier), path.dt)
                worst = max(worst, float(np.max(np.abs(replay.values - w.values[t + 1]))))
    return worst <= 1e-10, f"max replay residual {worst:.3e}"


CHECKS = [
    ("Linear exactness", check_linear_exactness),
    ("Exact variance oracle", check_variance_oracle),
    ("Rate, non-conservative n=0", check_rate_n0),
    ("Rate, non-conservative n=1", check_rate_n1),
    ("Rate, conservative n=0", check_rate_conservative),
    ("Divergence, d=2", check_divergence_d2),
    ("Partition oracle", check_partitions),
    ("Mean conservation", check_mean_conservation),
    ("Remainder recursion", check_remainder_recursion),
    ("Survival", check_survival),
    ("Sigma replay", check_sigma_replay),
]


def main():
    """Run the selected acceptance checks"""
    selected = [int(a) for a in sys.argv[1:]] or list(range(1, len(CHECKS) + 1))

    print("=" * 60)
    print("Heatwave - Acceptance Checks")
    print("=" * 60)
    print()

    results = []
    for number in selected:
        name, check_func = CHECKS[number - 1]
        started = time.time()
        success, message = check_func()
        results.append((name, success))

        status = "PASS" if success else "FAIL"
        print(f"[{status}] {number}. {name} ({time.time() - started:.1f}s)")
        print(f"     {message}")
        print()

    print("=" * 60)
    passed = sum(1 for _, success in results if success)
    print(f"Results: {passed}/{len(results)} checks passed")
    print("=" * 60)
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
