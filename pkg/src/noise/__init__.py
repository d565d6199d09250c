"""
Mollified Wiener noise: spectral multipliers, seeded increment paths and blow-up rates
"""

from .multiplier import (
    SpectralMultiplier, build_multiplier, weighted_inner, covariance_kernel,
    k_reference, convolution_variance, discrete_convolution_variance
)
from .path import NoisePath, sample_increment, replica_seed, mode_variance_check

__all__ = [
    'SpectralMultiplier', 'build_multiplier', 'weighted_inner', 'covariance_kernel',
    'k_reference', 'convolution_variance', 'discrete_convolution_variance',
    'NoisePath', 'sample_increment', 'replica_seed', 'mode_variance_check'
]
