"""
Recursive expansion coefficients u^0, ..., u^n and pathwise remainders

u^0 is the exact heat flow of u0. For k >= 1, u^k solves the linear equation
driven by c_k dW with c_k = sum_{l<k} G^(l)(u^0) J(k, l) / l!, stepped with the
same exponential Euler rule and the same increments as the solver.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..spectral.grid import TorusGrid, Field, PHYSICAL, to_spectral, to_physical, transform
from ..noise.multiplier import build_multiplier
from ..noise.path import NoisePath, sample_increment
from ..coefficients.diffusion import DiffusionCoefficient
from ..combinatorics.partitions import j_product
from ..solver.she import Trajectory, exponential_euler

logger = logging.getLogger(__name__)


class CouplingError(ValueError):
    """Raised when a trajectory and an expansion stack were not driven by the same path"""


@dataclass(eq=False)
class ExpansionStack:
    """Coefficients u^0..u^n at every stored time

    values has shape (order + 1, steps + 1) + grid.shape.
    """
    grid: TorusGrid
    values: np.ndarray
    dt: float
    seed: int
    delta: float
    coefficient: DiffusionCoefficient
    conservative: bool = False
    dealias: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.values.shape[0] - 1

    @property
    def steps(self) -> int:
        return self.values.shape[1] - 1

    def series(self, i: int) -> np.ndarray:
        """u^i at every stored time"""
        if not 0 <= i <= self.order:
            raise IndexError(f"Coefficient {i} outside stack of order {self.order}")
        return self.values[i]

    def physical_terms(self, t: int) -> List[np.ndarray]:
        """[u^0(t), ..., u^n(t)] at stored time index t"""
        return [self.values[i, t] for i in range(self.order + 1)]

    def at(self, i: int, t: int) -> Field:
        return Field.physical(self.grid, self.values[i, t])


@dataclass(eq=False)
class Remainder:
    """w_n = eps^(-n/2) (u - sum_{i<=n} eps^(i/2) u^i) at every stored time"""
    grid: TorusGrid
    order: int
    epsilon: float
    values: np.ndarray
    dt: float
    seed: int

    @property
    def unnormalized(self) -> np.ndarray:
        """u - sum_{i<=n} eps^(i/2) u^i"""
        return self.values * self.epsilon ** (self.order / 2.0)

    def at(self, t: int) -> Field:
        return Field.physical(self.grid, self.values[t])


def solve_heat_coefficient(u0: Field, times: Sequence[float]) -> np.ndarray:
    """Exact spectral heat flow of u0 sampled at the given times

    Returns:
        Physical values of shape (len(times),) + grid.shape
    """
    grid = u0.grid
    coeffs = transform(u0, PHYSICAL).values
    coeffs = to_spectral(coeffs, grid)
    return np.stack([to_physical(coeffs * grid.propagator(t), grid) for t in times])


def expansion_drift(k: int, G: DiffusionCoefficient, terms: Sequence[np.ndarray]) -> np.ndarray:
    """c_k = sum_{l=0}^{k-1} G^(l)(u^0) J(k, l) / l! on physical values

    Args:
        k: Coefficient order (>= 1)
        G: Globally smooth coefficient
        terms: Physical [u^0, u^1, ..., u^(k-1)]
    """
    total = np.zeros(np.shape(terms[0]))
    for l in range(k):
        j = j_product(k, l, terms)
        if np.any(j):
            total += G.derivative(terms[0], l) * j / math.factorial(l)
    return total


def solve_coefficients(n: int, G: DiffusionCoefficient, u0: Field, path: NoisePath,
                       delta: float, conservative: bool, steps: Optional[int] = None,
                       n_moll: Optional[int] = None, dealias: bool = False) -> ExpansionStack:
    """Compute u^0..u^n driven by the increments of path

    G must be globally smooth; window-smooth coefficients enter through their
    smooth extension, and u^0 must stay inside the extension window.

    Args:
        n: Expansion order
        G: Globally smooth diffusion coefficient
        u0: Initial condition
        path: Driving noise path
        delta: Correlation length
        conservative: Divergence-form noise
        steps: Number of steps (defaults to path.steps)
        n_moll: Mollification order
        dealias: Truncate noise terms with the 2/3-rule

    Returns:
        ExpansionStack
    """
    if n < 0:
        raise ValueError(f"Expansion order must be non-negative, got {n}")
    if n - 1 > G.max_order:
        raise ValueError(f"Order {n} needs derivatives up to {n - 1}; {G.name} provides {G.max_order}")
    if G.is_window_smooth:
        raise ValueError(f"{G.name} is only window-smooth; pass its smooth extension")
    if path.vector != conservative:
        raise ValueError(f"Noise path arity {path.arity} does not match "
                         f"{'conservative' if conservative else 'non-conservative'} expansion")
    grid = u0.grid
    if path.grid is not grid:
        raise ValueError("Initial condition and noise path live on different grids")
    steps = path.steps if steps is None else steps
    if steps > path.steps:
        raise ValueError(f"Noise path holds {path.steps} steps, {steps} requested")

    times = np.arange(steps + 1) * path.dt
    values = np.zeros((n + 1, steps + 1) + grid.shape)
    values[0] = solve_heat_coefficient(u0, times)

    if G.window is not None:
        lower, upper = float(np.min(values[0])), float(np.max(values[0]))
        if lower < G.window[0] or upper > G.window[1]:
            raise ValueError(f"Heat flow range [{lower:.6g}, {upper:.6g}] leaves the "
                             f"extension window {G.window} of {G.name}")

    if n >= 1:
        multiplier = build_multiplier(grid, delta, n_moll)
        for step in range(steps):
            dW = sample_increment(path, step, multiplier)
            terms = [values[i, step] for i in range(n + 1)]
            for k in range(1, n + 1):
                drift = expansion_drift(k, G, terms[:k])
                values[k, step + 1] = exponential_euler(terms[k], drift, dW, 1.0, path.dt, dealias)

    logger.debug(f"Solved expansion of order {n} over {steps} steps (seed={path.seed})")
    return ExpansionStack(
        grid=grid,
        values=values,
        dt=path.dt,
        seed=path.seed,
        delta=delta,
        coefficient=G,
        conservative=conservative,
        dealias=dealias,
        metadata={'coefficient': G.name, 'n_moll': n_moll},
    )


def _check_coupling(trajectory: Trajectory, stack: ExpansionStack, n: int):
    if trajectory.seed != stack.seed:
        raise CouplingError(f"Trajectory seed {trajectory.seed} differs from stack seed {stack.seed}")
    if trajectory.dt != stack.dt or trajectory.steps != stack.steps:
        raise CouplingError(f"Time lattices differ: trajectory (dt={trajectory.dt}, "
                            f"steps={trajectory.steps}), stack (dt={stack.dt}, steps={stack.steps})")
    if trajectory.grid is not stack.grid:
        raise CouplingError("Trajectory and stack live on different grids")
    if trajectory.conservative != stack.conservative:
        raise CouplingError("Trajectory and stack disagree on the conservative flag")
    if not 0 <= n <= stack.order:
        raise ValueError(f"Remainder order {n} outside stack of order {stack.order}")


def expansion_error(trajectory: Trajectory, stack: ExpansionStack, epsilon: float,
                    n: int) -> np.ndarray:
    """u - sum_{i<=n} eps^(i/2) u^i at every stored time"""
    _check_coupling(trajectory, stack, n)
    error = trajectory.values - stack.values[0]
    for i in range(1, n + 1):
        error = error - epsilon ** (i / 2.0) * stack.values[i]
    return error


def assemble_remainder(trajectory: Trajectory, stack: ExpansionStack, epsilon: float,
                       n: int) -> Remainder:
    """Pathwise remainder w_n, built by w_0 = u - u^0, w_k = eps^(-1/2) w_(k-1) - u^k"""
    _check_coupling(trajectory, stack, n)
    if n >= 1 and epsilon <= 0:
        raise ValueError(f"Remainder of order {n} needs epsilon > 0, got {epsilon}")
    w = trajectory.values - stack.values[0]
    scale = epsilon ** -0.5 if n >= 1 else 1.0
    for k in range(1, n + 1):
        w = scale * w - stack.values[k]
    return Remainder(grid=stack.grid, order=n, epsilon=epsilon, values=w,
                     dt=stack.dt, seed=stack.seed)


def sigma_diagnostic(trajectory: Trajectory, stack: ExpansionStack, G: DiffusionCoefficient,
                     epsilon: float, n: int) -> np.ndarray:
    """sigma_n = eps^(-(n-1)/2) (G(u) - sum_{m=1}^n eps^((m-1)/2) c_m) at every stored time

    G is the coefficient the trajectory was solved with; the c_m use the
    stack's own (globally smooth) coefficient.

    Returns:
        Physical values of shape (steps + 1,) + grid.shape
    """
    _check_coupling(trajectory, stack, n)
    if epsilon <= 0:
        raise ValueError(f"sigma_n needs epsilon > 0, got {epsilon}")
    sigma = np.empty_like(trajectory.values)
    for t in range(stack.steps + 1):
        terms = stack.physical_terms(t)
        total = G(trajectory.values[t])
        for m in range(1, n + 1):
            total = total - epsilon ** ((m - 1) / 2.0) * expansion_drift(m, stack.coefficient, terms[:m])
        sigma[t] = epsilon ** (-(n - 1) / 2.0) * total
    return sigma


def step_remainder(w: Field, sigma: Field, dW: Field, dt: float, dealias: bool = False) -> Field:
    """One exponential Euler step of the linear equation dw = Laplace(w) dt + sigma dW"""
    if w.representation != PHYSICAL or sigma.representation != PHYSICAL:
        raise ValueError("step_remainder expects physical fields")
    return Field.physical(w.grid, exponential_euler(w.values, sigma.values, dW, 1.0, dt, dealias))
