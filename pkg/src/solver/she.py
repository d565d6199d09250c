"""
Mild-form time stepping for du = Laplace(u) dt + eps^(1/2) G(u) dW^delta

Both equations advance by one exponential Euler step per increment: the noise
term is evaluated at the left point and propagated together with the state.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..spectral.grid import (
    TorusGrid, Field, PHYSICAL, SPECTRAL, to_spectral, to_physical, transform
)
from ..noise.multiplier import build_multiplier
from ..noise.path import NoisePath, sample_increment
from ..coefficients.diffusion import DiffusionCoefficient

logger = logging.getLogger(__name__)


class SolverBlowUpError(RuntimeError):
    """Raised when a trajectory produces NaN or infinite values"""

    def __init__(self, step: int, last_min: float, last_max: float):
        self.step = step
        self.last_min = last_min
        self.last_max = last_max
        super().__init__(
            f"Non-finite values at step {step}; last finite range [{last_min:.6g}, {last_max:.6g}]"
        )


@dataclass
class SolverConfig:
    """Parameters of one solver run

    Attributes:
        epsilon: Noise intensity
        delta: Correlation length (0 only for non-conservative d=1)
        dt: Time step
        steps: Number of steps, T = steps * dt
        conservative: Divergence-form noise
        gamma: Stopping margin for window-smooth coefficients
        seed: Seed of the driving noise path
        n_moll: Mollification order (None for the default)
        dealias: Apply the 2/3-rule to the noise term
    """
    epsilon: float
    delta: float
    dt: float
    steps: int
    conservative: bool = False
    gamma: Optional[float] = None
    seed: int = 0
    n_moll: Optional[int] = None
    dealias: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"Noise intensity must be non-negative, got epsilon={self.epsilon}")
        if self.dt <= 0:
            raise ValueError(f"Time step must be positive, got dt={self.dt}")
        if self.steps < 1:
            raise ValueError(f"Step count must be positive, got {self.steps}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"Stopping margin must be positive, got gamma={self.gamma}")

    @property
    def horizon(self) -> float:
        return self.dt * self.steps


@dataclass(eq=False)
class Trajectory:
    """Physical snapshots u(t_0), ..., u(t_steps) of one solution

    values has shape (steps + 1,) + grid.shape. After stopping_index every
    snapshot equals the one at stopping_index.
    """
    grid: TorusGrid
    values: np.ndarray
    dt: float
    seed: int
    epsilon: float
    delta: float
    conservative: bool = False
    stopping_index: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @property
    def stopped(self) -> bool:
        return self.stopping_index is not None

    @property
    def frozen_tail(self) -> bool:
        return self.stopping_index is not None and self.stopping_index < self.steps

    def at(self, index: int) -> Field:
        return Field.physical(self.grid, self.values[index])


def exponential_euler(u: np.ndarray, amplitude: np.ndarray, dW: Field, scale: float,
                      dt: float, dealias: bool = False) -> np.ndarray:
    """S(dt)[u + scale * A dW] on physical arrays

    A scalar increment multiplies pointwise; a vector increment forms the flux
    A dW componentwise and enters through its spectral divergence.

    Args:
        u: Physical state values
        amplitude: Physical multiplier A of the increment
        dW: Spectral increment (scalar or vector)
        scale: Noise prefactor
        dt: Time step
        dealias: Truncate the noise term with the 2/3-rule

    Returns:
        Physical values after one step
    """
    grid = dW.grid
    coeffs = to_spectral(u, grid)
    if scale != 0:
        noise = to_physical(dW.values, grid)
        if dW.vector:
            flux_hat = to_spectral(amplitude[np.newaxis] * noise, grid)
            forcing = np.sum(grid.derivative_factors * flux_hat, axis=0)
        else:
            forcing = to_spectral(amplitude * noise, grid)
        if dealias:
            forcing = forcing * grid.dealias_mask
        coeffs = coeffs + scale * forcing
    return to_physical(coeffs * grid.propagator(dt), grid)


def _check_state(u: Field, dW: Field, vector: bool):
    if u.representation != PHYSICAL or u.vector:
        raise ValueError(f"Solver state must be a physical scalar field, got {u.representation}")
    if dW.representation != SPECTRAL:
        raise ValueError(f"Noise increment must be spectral, got {dW.representation}")
    if dW.vector != vector:
        expected = f"{u.grid.dimension}-vector" if vector else "scalar"
        raise ValueError(f"Noise increment arity mismatch: expected a {expected} increment")
    if dW.grid is not u.grid:
        raise ValueError("State and noise increment live on different grids")


def step_nonconservative(u: Field, dW: Field, G: DiffusionCoefficient, epsilon: float,
                         dt: float, dealias: bool = False) -> Field:
    """u+ = S(dt)[u + eps^(1/2) G(u) dW]

    Args:
        u: Physical scalar state
        dW: Spectral scalar increment
        G: Diffusion coefficient
        epsilon: Noise intensity
        dt: Time step
        dealias: Truncate the noise term with the 2/3-rule

    Returns:
        Physical state after one step
    """
    _check_state(u, dW, vector=False)
    amplitude = G(u.values) if epsilon > 0 else u.values
    stepped = exponential_euler(u.values, amplitude, dW, np.sqrt(epsilon), dt, dealias)
    return Field.physical(u.grid, stepped)


def step_conservative(u: Field, dW: Field, G: DiffusionCoefficient, epsilon: float,
                      dt: float, dealias: bool = False) -> Field:
    """u+ = S(dt)[u + eps^(1/2) div(G(u) dW)], componentwise product, spectral divergence"""
    _check_state(u, dW, vector=True)
    amplitude = G(u.values) if epsilon > 0 else u.values
    stepped = exponential_euler(u.values, amplitude, dW, np.sqrt(epsilon), dt, dealias)
    return Field.physical(u.grid, stepped)


def stopping_monitor(u: Field, K: float, K_prime: float, gamma: float) -> bool:
    """True iff max(u) > K + gamma or min(u) < K' - gamma (strict)"""
    values = transform(u, PHYSICAL).values
    return bool(np.max(values) > K + gamma or np.min(values) < K_prime - gamma)


def smallness_threshold(G: DiffusionCoefficient, delta: float, d: int,
                        window: Optional[tuple] = None) -> float:
    """eps_0 = 2 delta^d / sup|G'|^2 for the conservative equation

    sup|G'| is the declared bound of a globally smooth G, or the sampled sup
    over window for window-smooth G.
    """
    if G.derivative_bounds is not None:
        slope = G.derivative_bound(1)
    elif window is not None:
        slope = G.sup_on(window[0], window[1], order=1)
    elif G.window is not None:
        lower, upper = G.window
        slope = G.sup_on(lower - G.margin, upper + G.margin, order=1)
    else:
        raise ValueError(f"No derivative bound available for {G.name}")
    if slope == 0:
        return float('inf')
    return 2.0 * delta ** d / slope ** 2


def simulate(config: SolverConfig, G: DiffusionCoefficient, u0: Field,
             path: NoisePath) -> Trajectory:
    """Run the solver over the full horizon

    Window-smooth coefficients are monitored every step against the range of u0
    widened by config.gamma; the trajectory freezes at the first hit.

    Args:
        config: Solver parameters
        G: Diffusion coefficient
        u0: Bounded initial condition
        path: Driving noise path (arity must match config.conservative)

    Returns:
        Trajectory with steps + 1 snapshots
    """
    grid = u0.grid
    if path.grid is not grid:
        raise ValueError("Initial condition and noise path live on different grids")
    if path.vector != config.conservative:
        raise ValueError(
            f"Noise path arity {path.arity} does not match "
            f"{'conservative' if config.conservative else 'non-conservative'} run"
        )
    if path.dt != config.dt or path.steps < config.steps:
        raise ValueError(f"Noise path (dt={path.dt}, steps={path.steps}) does not cover "
                         f"dt={config.dt}, steps={config.steps}")
    if path.seed != config.seed:
        raise ValueError(f"Noise path seed {path.seed} differs from configured seed {config.seed}")
    if config.delta == 0 and (config.conservative or grid.dimension != 1):
        raise ValueError("White noise (delta=0) is only supported for the non-conservative d=1 equation")

    initial = transform(u0, PHYSICAL).values
    if not np.all(np.isfinite(initial)):
        raise ValueError("Initial condition must be bounded")
    K, K_prime = float(np.max(initial)), float(np.min(initial))

    monitored = G.is_window_smooth
    if monitored:
        if config.gamma is None:
            raise ValueError(f"Window-smooth coefficient {G.name} requires a stopping margin gamma")
        if not G.contains(K_prime - config.gamma, K + config.gamma):
            raise ValueError(
                f"Range [{K_prime:.6g}, {K:.6g}] widened by gamma={config.gamma} leaves "
                f"the smooth domain {G.domain} of {G.name}"
            )

    if config.conservative and config.epsilon > 0:
        window = (K_prime - config.gamma, K + config.gamma) if monitored else None
        eps0 = smallness_threshold(G, config.delta, grid.dimension, window)
        if config.epsilon > eps0:
            logger.warning(f"epsilon={config.epsilon:g} exceeds the smallness threshold "
                           f"eps_0={eps0:.4g} (delta={config.delta:g}, d={grid.dimension})")

    multiplier = build_multiplier(grid, config.delta, config.n_moll)
    stepper = step_conservative if config.conservative else step_nonconservative

    values = np.empty((config.steps + 1,) + grid.shape)
    values[0] = initial
    state = Field.physical(grid, initial)
    stopping_index = None

    for step in range(config.steps):
        if stopping_index is not None:
            values[step + 1] = values[step]
            continue

        dW = sample_increment(path, step, multiplier)
        with np.errstate(over='ignore', invalid='ignore'):
            state = stepper(state, dW, G, config.epsilon, config.dt, config.dealias)
        if not np.all(np.isfinite(state.values)):
            raise SolverBlowUpError(step + 1, float(np.min(values[step])), float(np.max(values[step])))
        values[step + 1] = state.values

        if monitored and stopping_monitor(state, K, K_prime, config.gamma):
            stopping_index = step + 1
            logger.debug(f"Stopping time hit at step {stopping_index} (seed={config.seed})")

    return Trajectory(
        grid=grid,
        values=values,
        dt=config.dt,
        seed=config.seed,
        epsilon=config.epsilon,
        delta=config.delta,
        conservative=config.conservative,
        stopping_index=stopping_index,
        metadata={'coefficient': G.name, 'gamma': config.gamma, 'K': K, 'K_prime': K_prime},
    )
