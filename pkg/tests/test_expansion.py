"""
Tests for the expansion coefficients and pathwise remainders
"""

import numpy as np
import pytest

from src.spectral.grid import Field, build_grid
from src.noise.multiplier import build_multiplier, discrete_convolution_variance
from src.noise.path import NoisePath, sample_increment, replica_seed
from src.coefficients.diffusion import smooth_preset, irregular_preset, smooth_extension
from src.solver.she import SolverConfig, simulate
from src.expansion.engine import (
    CouplingError, solve_heat_coefficient, solve_coefficients, expansion_drift,
    assemble_remainder, expansion_error, sigma_diagnostic, step_remainder
)

DT = 1e-3
DELTA = 0.1


@pytest.fixture
def grid():
    return build_grid(1, 16)


@pytest.fixture
def u0(grid):
    return Field.physical(grid, 1.0 + 0.5 * np.cos(2 * np.pi * grid.points[0]))


def coupled(grid, u0, G, epsilon, n, seed=5, steps=30, conservative=False):
    """Trajectory and stack driven by one path"""
    path = NoisePath(grid, seed, DT, steps, vector=conservative)
    config = SolverConfig(epsilon=epsilon, delta=DELTA, dt=DT, steps=steps,
                          conservative=conservative, seed=seed)
    trajectory = simulate(config, G, u0, path)
    stack = solve_coefficients(n, G, u0, path, DELTA, conservative)
    return trajectory, stack, path


class TestHeatCoefficient:
    """Test the exact heat flow u^0"""

    def test_constant(self, grid):
        """Test that constants are stationary"""
        values = solve_heat_coefficient(Field.physical(grid, np.full(16, 2.0)), [0.0, 0.5])

        np.testing.assert_allclose(values, 2.0)

    def test_first_mode_decay(self, grid):
        """Test exp(-4 pi^2 t) decay of cos(2 pi x)"""
        u0 = Field.physical(grid, np.cos(2 * np.pi * grid.points[0]))
        values = solve_heat_coefficient(u0, [0.0, 0.01])

        np.testing.assert_allclose(values[1], np.exp(-4 * np.pi ** 2 * 0.01) * values[0],
                                   atol=1e-14)


class TestCoefficients:
    """Test the recursive coefficients u^1..u^n"""

    def test_linear_case_telescopes(self, grid, u0):
        """Test u = u^0 + eps^(1/2) u^1 pathwise for constant G"""
        trajectory, stack, _ = coupled(grid, u0, smooth_preset("constant(1.5)"), 0.04, 1)

        error = expansion_error(trajectory, stack, 0.04, 1)
        np.testing.assert_allclose(error, 0.0, atol=1e-12)

    def test_linear_case_conservative(self, grid, u0):
        """Test the telescoping identity for divergence-form noise"""
        trajectory, stack, _ = coupled(grid, u0, smooth_preset("constant(1)"), 0.01, 1,
                                       conservative=True)

        np.testing.assert_allclose(expansion_error(trajectory, stack, 0.01, 1), 0.0, atol=1e-12)

    def test_constant_g_higher_orders_vanish(self, grid, u0):
        """Test u^k = 0 for k >= 2 when G is constant"""
        _, stack, _ = coupled(grid, u0, smooth_preset("constant(2)"), 0.1, 3)

        assert np.any(stack.series(1) != 0)
        np.testing.assert_array_equal(stack.series(2), 0.0)
        np.testing.assert_array_equal(stack.series(3), 0.0)

    def test_drift_formulas(self):
        """Test c_1 = G(u^0), c_2 = G'(u^0) u^1 and c_3 = G' u^2 + G'' (u^1)^2 / 2"""
        G = smooth_preset("cosine")
        rng = np.random.default_rng(14)
        terms = [rng.standard_normal(16) for _ in range(3)]

        np.testing.assert_allclose(expansion_drift(1, G, terms[:1]), np.cos(terms[0]))
        np.testing.assert_allclose(expansion_drift(2, G, terms[:2]),
                                   -np.sin(terms[0]) * terms[1])
        expected = -np.sin(terms[0]) * terms[2] - 0.5 * np.cos(terms[0]) * terms[1] ** 2
        np.testing.assert_allclose(expansion_drift(3, G, terms), expected, rtol=1e-12)

    def test_heat_term_independent_of_noise(self, grid, u0):
        """Test that u^0 does not depend on the path"""
        G = smooth_preset("cosine")
        first = solve_coefficients(2, G, u0, NoisePath(grid, 1, DT, 10), DELTA, False)
        second = solve_coefficients(2, G, u0, NoisePath(grid, 2, DT, 10), DELTA, False)

        np.testing.assert_array_equal(first.series(0), second.series(0))
        assert not np.array_equal(first.series(1), second.series(1))

    def test_zero_initial_values(self, grid, u0):
        """Test u^k(0) = 0 for k >= 1"""
        _, stack, _ = coupled(grid, u0, smooth_preset("rational"), 0.1, 3)

        for k in range(1, 4):
            np.testing.assert_array_equal(stack.series(k)[0], 0.0)

    def test_stack_shape(self, grid, u0):
        """Test stack layout and accessors"""
        _, stack, _ = coupled(grid, u0, smooth_preset("cosine"), 0.1, 2, steps=12)

        assert stack.values.shape == (3, 13, 16)
        assert stack.order == 2
        assert stack.steps == 12
        assert len(stack.physical_terms(4)) == 3
        with pytest.raises(IndexError):
            stack.series(3)

    def test_mc_variance_matches_discrete_oracle(self, grid):
        """Test the variance of u^1 for G = 1 against the exact time-stepped variance"""
        G = smooth_preset("constant(1)")
        zero = Field.physical(grid, np.zeros(16))
        steps, M = 20, 400

        per_replica = []
        for r in range(M):
            path = NoisePath(grid, replica_seed(99, r), DT, steps)
            stack = solve_coefficients(1, G, zero, path, DELTA, False)
            per_replica.append(np.mean(stack.series(1)[-1] ** 2))

        per_replica = np.array(per_replica)
        estimate = per_replica.mean()
        stderr = per_replica.std(ddof=1) / np.sqrt(M)
        expected = discrete_convolution_variance(grid, build_multiplier(grid, DELTA), steps * DT, DT)
        assert abs(estimate - expected) <= 4 * stderr

    def test_pointwise_variance_within_three_standard_errors(self, grid):
        """Test Var(u^1(T, 0)) against the time-stepped variance at 3 standard errors"""
        G = smooth_preset("constant(1)")
        zero = Field.physical(grid, np.zeros(16))
        steps, M = 20, 1000

        samples = np.array([
            solve_coefficients(1, G, zero, NoisePath(grid, replica_seed(41, r), DT, steps),
                               DELTA, False).series(1)[-1, 0]
            for r in range(M)
        ])
        variance = samples.var(ddof=1)
        stderr = variance * np.sqrt(2.0 / (M - 1))
        expected = discrete_convolution_variance(grid, build_multiplier(grid, DELTA), steps * DT, DT)
        assert abs(variance - expected) <= 3 * stderr


class TestCoefficientValidation:
    """Test solve_coefficients input checks"""

    def test_window_smooth_rejected(self, grid, u0):
        """Test that irregular G must be extended first"""
        with pytest.raises(ValueError):
            solve_coefficients(1, irregular_preset("sqrt"), u0, NoisePath(grid, 1, DT, 5),
                               DELTA, False)

    def test_extension_accepted(self, grid, u0):
        """Test that the extension is used inside its window"""
        G0 = smooth_extension(irregular_preset("sqrt"), 0.3, 0.15, 0.5, 1.5)

        stack = solve_coefficients(2, G0, u0, NoisePath(grid, 1, DT, 5), DELTA, False)
        assert stack.series(1)[1].std() > 0

    def test_heat_flow_leaves_window(self, grid, u0):
        """Test rejection when u^0 leaves the extension window"""
        G0 = smooth_extension(irregular_preset("sqrt"), 0.05, 0.05, 0.95, 1.05)

        with pytest.raises(ValueError):
            solve_coefficients(1, G0, u0, NoisePath(grid, 1, DT, 5), DELTA, False)

    def test_order_too_high(self, grid, u0):
        """Test rejection of orders beyond the available derivatives"""
        with pytest.raises(ValueError):
            solve_coefficients(8, smooth_preset("cosine"), u0, NoisePath(grid, 1, DT, 5),
                               DELTA, False)

    def test_mismatches(self, grid, u0):
        """Test arity, grid and step-count mismatches"""
        G = smooth_preset("cosine")

        with pytest.raises(ValueError):
            solve_coefficients(1, G, u0, NoisePath(grid, 1, DT, 5, vector=True), DELTA, False)
        with pytest.raises(ValueError):
            solve_coefficients(1, G, u0, NoisePath(build_grid(1, 16), 1, DT, 5), DELTA, False)
        with pytest.raises(ValueError):
            solve_coefficients(1, G, u0, NoisePath(grid, 1, DT, 5), DELTA, False, steps=6)


class TestRemainder:
    """Test remainder assembly and the sigma replay"""

    def test_zero_noise_remainder(self, grid, u0):
        """Test w_0 = 0 at epsilon = 0"""
        trajectory, stack, _ = coupled(grid, u0, smooth_preset("cosine"), 0.0, 2)

        remainder = assemble_remainder(trajectory, stack, 0.0, 0)
        np.testing.assert_allclose(remainder.values, 0.0, atol=1e-12)
        with pytest.raises(ValueError):
            assemble_remainder(trajectory, stack, 0.0, 1)

    def test_first_remainder_constant_g(self, grid, u0):
        """Test w_1 = 0 for G = 1"""
        trajectory, stack, _ = coupled(grid, u0, smooth_preset("constant(1)"), 0.04, 1)

        np.testing.assert_allclose(assemble_remainder(trajectory, stack, 0.04, 1).values, 0.0,
                                   atol=1e-10)

    def test_recursion(self, grid, u0):
        """Test w_n = eps^(-1/2) w_(n-1) - u^n and the unnormalized form"""
        epsilon = 0.09
        trajectory, stack, _ = coupled(grid, u0, smooth_preset("cosine"), epsilon, 3)

        previous = assemble_remainder(trajectory, stack, epsilon, 1).values
        for n in (2, 3):
            w = assemble_remainder(trajectory, stack, epsilon, n)
            np.testing.assert_allclose(w.values, previous / np.sqrt(epsilon) - stack.series(n),
                                       rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(w.unnormalized, expansion_error(trajectory, stack, epsilon, n),
                                       rtol=1e-8, atol=1e-12)
            previous = w.values

    def test_coupling_errors(self, grid, u0):
        """Test that uncoupled trajectories and stacks are rejected"""
        G = smooth_preset("cosine")
        trajectory, _, _ = coupled(grid, u0, G, 0.1, 1, seed=1)
        _, other_seed, _ = coupled(grid, u0, G, 0.1, 1, seed=2)
        _, other_steps, _ = coupled(grid, u0, G, 0.1, 1, seed=1, steps=20)

        with pytest.raises(CouplingError):
            assemble_remainder(trajectory, other_seed, 0.1, 1)
        with pytest.raises(CouplingError):
            expansion_error(trajectory, other_steps, 0.1, 1)
        with pytest.raises(ValueError):
            assemble_remainder(trajectory, coupled(grid, u0, G, 0.1, 1, seed=1)[1], 0.1, 2)

    def test_sigma_constant_g(self, grid, u0):
        """Test sigma_1 = 0 and sigma_0 = eps^(1/2) G(u) for constant G"""
        G = smooth_preset("constant(1.5)")
        trajectory, stack, _ = coupled(grid, u0, G, 0.25, 1)

        np.testing.assert_allclose(sigma_diagnostic(trajectory, stack, G, 0.25, 1), 0.0, atol=1e-14)
        np.testing.assert_allclose(sigma_diagnostic(trajectory, stack, G, 0.25, 0), 0.75)
        with pytest.raises(ValueError):
            sigma_diagnostic(trajectory, stack, G, 0.0, 1)

    @pytest.mark.parametrize("n", [1, 2])
    def test_sigma_replay(self, grid, u0, n):
        """Test that stepping dw = Laplace(w) dt + sigma_n dW reproduces w_n"""
        G = smooth_preset("cosine")
        epsilon = 0.25
        trajectory, stack, path = coupled(grid, u0, G, epsilon, n, steps=20)
        remainder = assemble_remainder(trajectory, stack, epsilon, n)
        sigma = sigma_diagnostic(trajectory, stack, G, epsilon, n)
        multiplier = build_multiplier(grid, DELTA)

        w = remainder.at(0)
        for step in range(20):
            dW = sample_increment(path, step, multiplier)
            w = step_remainder(w, Field.physical(grid, sigma[step]), dW, DT)
            np.testing.assert_allclose(w.values, remainder.values[step + 1], atol=1e-10)
