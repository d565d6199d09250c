"""
Exponential-Euler solvers for the non-conservative and conservative SHE
"""

from .she import (
    SolverConfig, Trajectory, SolverBlowUpError, exponential_euler, step_nonconservative,
    step_conservative, stopping_monitor, smallness_threshold, simulate
)
from .export import export_fields, load_fields, export_trajectory

__all__ = [
    'SolverConfig', 'Trajectory', 'SolverBlowUpError', 'exponential_euler', 'step_nonconservative',
    'step_conservative', 'stopping_monitor', 'smallness_threshold', 'simulate',
    'export_fields', 'load_fields', 'export_trajectory'
]
