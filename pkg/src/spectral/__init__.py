"""
Spectral core: torus grids, fields and exact heat propagation
"""

from .grid import (
    TorusGrid, Field, build_grid, transform, heat_propagate,
    gradient, divergence, to_spectral, to_physical, eigenvalue_scaling_constant
)

__all__ = [
    'TorusGrid', 'Field', 'build_grid', 'transform', 'heat_propagate',
    'gradient', 'divergence', 'to_spectral', 'to_physical',
    'eigenvalue_scaling_constant'
]
