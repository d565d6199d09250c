"""
Resolvent mollifier (1 + delta^2 alpha)^-n and the quantities derived from it
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..config import config
from ..spectral.grid import TorusGrid, Field, SPECTRAL, transform

logger = logging.getLogger(__name__)

NONCONSERVATIVE = 1
CONSERVATIVE = 2


@dataclass(frozen=True, eq=False)
class SpectralMultiplier:
    """Per-mode damping factors of the mollifier eta_delta on a grid"""
    grid: TorusGrid
    delta: float
    n_moll: int
    values: np.ndarray

    @property
    def is_white(self) -> bool:
        return self.delta == 0.0

    @property
    def squared(self) -> np.ndarray:
        return self.values ** 2


def build_multiplier(grid: TorusGrid, delta: float,
                     n_moll: Optional[int] = None) -> SpectralMultiplier:
    """Tabulate m_delta(m) = (1 + delta^2 alpha(m))^-n_moll

    Args:
        grid: Torus grid
        delta: Correlation length (0 means white noise)
        n_moll: Mollification order; defaults to solver.n_moll from configuration

    Returns:
        SpectralMultiplier
    """
    if delta < 0:
        raise ValueError(f"Correlation length must be non-negative, got delta={delta}")
    if n_moll is None:
        n_moll = int(config.get('solver.n_moll', 1))
    minimum = max((grid.dimension - 2) / 4.0, 0.0)
    if int(n_moll) != n_moll or n_moll <= minimum:
        raise ValueError(
            f"Mollification order must be an integer > {minimum} for d={grid.dimension}, got {n_moll}"
        )

    values = (1.0 + delta ** 2 * grid.eigenvalues) ** (-int(n_moll))
    values.setflags(write=False)
    return SpectralMultiplier(grid=grid, delta=float(delta), n_moll=int(n_moll), values=values)


def weighted_inner(f: Field, g: Field, multiplier: SpectralMultiplier) -> float:
    """Semi-inner product <f, g>_delta = sum_m m_delta(m)^2 f(m) conj(g(m))"""
    if f.grid is not g.grid or f.grid is not multiplier.grid:
        raise ValueError("weighted_inner requires fields and multiplier on the same grid")
    if f.vector or g.vector:
        raise ValueError("weighted_inner expects scalar fields")

    f_hat = transform(f, SPECTRAL).values
    g_hat = transform(g, SPECTRAL).values
    return float(np.sum(multiplier.squared * f_hat * np.conj(g_hat)).real)


def covariance_kernel(multiplier: SpectralMultiplier, z) -> np.ndarray:
    """Spatial covariance R_delta(z) = sum_m m_delta(m)^2 exp(i 2 pi m.z)

    Args:
        multiplier: Spectral multiplier
        z: A point of length d, or an array of points with trailing axis d

    Returns:
        Covariance values (scalar array for a single point)
    """
    grid = multiplier.grid
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.shape[-1] != grid.dimension:
        raise ValueError(f"Points must have trailing dimension {grid.dimension}, got {z.shape}")

    m = grid.wavevectors.reshape(grid.dimension, -1).astype(float)
    weights = multiplier.squared.ravel()
    phase = 2.0 * np.pi * (z @ m)
    return np.cos(phase) @ weights


def k_reference(i: int, d: int, delta: float) -> float:
    """Blow-up rate K_i(delta, d) of the stochastic convolution as delta -> 0

    Case 1 is non-conservative noise, case 2 conservative noise. The constant of
    the d=1 non-conservative branch is fixed to 1.
    """
    if i not in (NONCONSERVATIVE, CONSERVATIVE):
        raise ValueError(f"Unknown noise case i={i}; expected 1 or 2")
    if d < 1:
        raise ValueError(f"Dimension must be positive, got d={d}")

    if i == NONCONSERVATIVE and d == 1:
        return 1.0
    if not 0.0 < delta < 0.5:
        raise ValueError(f"K_{i}(delta, {d}) needs delta in (0, 1/2), got {delta}")
    if i == CONSERVATIVE:
        return float(delta ** (-d))
    if d == 2:
        return float(np.log(1.0 / delta))
    return float(delta ** (2 - d))


def convolution_variance(grid: TorusGrid, multiplier: SpectralMultiplier, t: float) -> float:
    """Exact pointwise variance K_delta(t) of the mollified stochastic heat convolution

    K_delta(t) = t + sum_{m != 0} (1 - exp(-2 alpha t)) / (2 alpha) m_delta(m)^2
    """
    if t < 0:
        raise ValueError(f"Time must be non-negative, got t={t}")
    alpha = grid.eigenvalues
    positive = alpha > 0
    weights = multiplier.squared[positive]
    a = alpha[positive]
    tail = -np.expm1(-2.0 * a * t) / (2.0 * a)
    mass = float(multiplier.squared[~positive].sum()) * t
    return mass + float(np.sum(tail * weights))


def discrete_convolution_variance(grid: TorusGrid, multiplier: SpectralMultiplier,
                                  t: float, dt: float) -> float:
    """Variance of the exponential-Euler stochastic convolution after round(t/dt) steps

    Each mode contributes dt m_delta^2 sum_{j=1}^{steps} exp(-2 alpha j dt).
    """
    if t < 0 or dt <= 0:
        raise ValueError(f"Need t >= 0 and dt > 0, got t={t}, dt={dt}")
    steps = int(round(t / dt))
    alpha = grid.eigenvalues
    positive = alpha > 0
    a = alpha[positive]
    q = np.exp(-2.0 * a * dt)
    geometric = q * (-np.expm1(-2.0 * a * dt * steps)) / (-np.expm1(-2.0 * a * dt))
    mass = float(multiplier.squared[~positive].sum()) * dt * steps
    return mass + float(np.sum(dt * multiplier.squared[positive] * geometric))
