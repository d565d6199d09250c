"""
Discrete fields on the torus [-1/2, 1/2]^d with a complex-exponential basis
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import fft as sfft

logger = logging.getLogger(__name__)

PHYSICAL = "physical"
SPECTRAL = "spectral"
SUPPORTED_DIMENSIONS = (1, 2, 3)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Discrete d-torus with its Laplacian eigenstructure

    Spectral arrays use FFT ordering along every axis. The wavevector table stores
    the Nyquist index as +N/2, so each axis carries m in {-N/2+1, ..., N/2}.
    """
    dimension: int
    modes_per_axis: int
    wavevectors: np.ndarray
    eigenvalues: np.ndarray
    points: np.ndarray
    derivative_factors: np.ndarray
    dealias_mask: np.ndarray

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.modes_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.modes_per_axis ** self.dimension

    @property
    def axes(self) -> Tuple[int, ...]:
        """Trailing axes that carry the spatial lattice"""
        return tuple(range(-self.dimension, 0))

    def propagator(self, t: float) -> np.ndarray:
        """Spectral heat multiplier exp(-alpha(m) t)"""
        if t < 0:
            raise ValueError(f"Heat propagation time must be non-negative, got {t}")
        return np.exp(-self.eigenvalues * t)

    def __repr__(self) -> str:
        return f"TorusGrid(d={self.dimension}, N={self.modes_per_axis})"


def build_grid(d: int, N: int) -> TorusGrid:
    """Build a periodic grid with its wavevector and eigenvalue tables

    Args:
        d: Spatial dimension (1, 2 or 3)
        N: Modes per axis (even, at least 4)

    Returns:
        Immutable TorusGrid
    """
    if d not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"Unsupported dimension d={d}; expected one of {SUPPORTED_DIMENSIONS}")
    if N < 4 or N % 2 != 0:
        raise ValueError(f"Modes per axis must be even and >= 4, got N={N}")

    axis_modes = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
    axis_modes[N // 2] = N // 2
    wavevectors = np.stack(np.meshgrid(*([axis_modes] * d), indexing='ij'))
    eigenvalues = 4.0 * np.pi ** 2 * np.sum(wavevectors.astype(float) ** 2, axis=0)

    axis_points = -0.5 + np.arange(N) / N
    points = np.stack(np.meshgrid(*([axis_points] * d), indexing='ij'))

    # Odd derivatives of the Nyquist mode are not real-representable
    nyquist = np.abs(wavevectors) == N // 2
    derivative_factors = np.where(nyquist, 0.0, 2j * np.pi * wavevectors)

    dealias_mask = np.all(np.abs(wavevectors) <= N // 3, axis=0)

    grid = TorusGrid(
        dimension=d,
        modes_per_axis=N,
        wavevectors=_frozen(wavevectors),
        eigenvalues=_frozen(eigenvalues),
        points=_frozen(points),
        derivative_factors=_frozen(derivative_factors),
        dealias_mask=_frozen(dealias_mask),
    )
    logger.debug(f"Built {grid} with {grid.size} modes")
    return grid


def to_spectral(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Forward transform normalised so that a constant c maps to coefficient c at m=0"""
    return sfft.fftn(values, axes=grid.axes, norm="forward")


def to_physical(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Inverse of to_spectral, returning the real part"""
    return sfft.ifftn(coeffs, axes=grid.axes, norm="forward").real


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar or vector field on a TorusGrid in one representation

    Scalar values have shape grid.shape; vector values carry a leading axis of
    length d.
    """
    grid: TorusGrid
    values: np.ndarray
    representation: str = PHYSICAL
    vector: bool = False

    def __post_init__(self):
        if self.representation not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"Unknown representation: {self.representation}")
        if self.values.shape != self.expected_shape(self.grid, self.vector):
            raise ValueError(
                f"Field values have shape {self.values.shape}, "
                f"expected {self.expected_shape(self.grid, self.vector)}"
            )

    @staticmethod
    def expected_shape(grid: TorusGrid, vector: bool) -> Tuple[int, ...]:
        return ((grid.dimension,) + grid.shape) if vector else grid.shape

    @property
    def arity(self) -> int:
        return self.grid.dimension if self.vector else 1

    @classmethod
    def physical(cls, grid: TorusGrid, values: np.ndarray, vector: bool = False) -> "Field":
        return cls(grid, np.asarray(values, dtype=float), PHYSICAL, vector)

    @classmethod
    def spectral(cls, grid: TorusGrid, coeffs: np.ndarray, vector: bool = False) -> "Field":
        return cls(grid, np.asarray(coeffs, dtype=complex), SPECTRAL, vector)

    def mean(self) -> float:
        """Spatial mean (mode-0 coefficient) of a scalar field"""
        if self.representation == SPECTRAL:
            return float(self.values.flat[0].real)
        return float(np.mean(self.values))

    def l2_norm(self) -> float:
        """L2 norm over the unit-volume torus"""
        if self.representation == SPECTRAL:
            return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))
        return float(np.sqrt(np.mean(self.values ** 2)))


def transform(f: Field, target: str) -> Field:
    """Move a field into the target representation (identity if already there)

    Args:
        f: Field to transform
        target: 'physical' or 'spectral'

    Returns:
        Field in the target representation
    """
    if target not in (PHYSICAL, SPECTRAL):
        raise ValueError(f"Unknown representation: {target}")
    if f.representation == target:
        return f
    if target == SPECTRAL:
        return Field.spectral(f.grid, to_spectral(f.values, f.grid), f.vector)
    return Field.physical(f.grid, to_physical(f.values, f.grid), f.vector)


def _require_spectral(f: Field, operation: str):
    if f.representation != SPECTRAL:
        raise ValueError(f"{operation} requires a spectral field, got {f.representation}")


def heat_propagate(f: Field, t: float) -> Field:
    """Apply the heat semigroup S(t) exactly in spectral space

    Args:
        f: Spectral field (scalar or vector)
        t: Non-negative duration

    Returns:
        Propagated spectral field
    """
    _require_spectral(f, "heat_propagate")
    return Field.spectral(f.grid, f.values * f.grid.propagator(t), f.vector)


def gradient(f: Field) -> Field:
    """Spectral gradient of a scalar field"""
    _require_spectral(f, "gradient")
    if f.vector:
        raise ValueError("gradient expects a scalar field")
    return Field.spectral(f.grid, f.grid.derivative_factors * f.values, vector=True)


def divergence(f: Field) -> Field:
    """Spectral divergence of a d-vector field; the mode-0 coefficient is always zero"""
    _require_spectral(f, "divergence")
    if not f.vector:
        raise ValueError(f"divergence expects a {f.grid.dimension}-vector field, got a scalar")
    return Field.spectral(f.grid, np.sum(f.grid.derivative_factors * f.values, axis=0))


def eigenvalue_scaling_constant(grid: TorusGrid) -> float:
    """Smallest c with c^-1 j^(2/d) <= alpha_j <= c j^(2/d) over the resolved spectrum

    alpha_j is the j-th smallest positive eigenvalue counted with multiplicity.
    """
    positive = np.sort(grid.eigenvalues[grid.eigenvalues > 0].ravel())
    j = np.arange(1, positive.size + 1, dtype=float) ** (2.0 / grid.dimension)
    return float(max(np.max(positive / j), np.max(j / positive)))
