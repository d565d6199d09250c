"""
Small-noise expansion coefficients coupled to a noise path, and their remainders
"""

from .engine import (
    ExpansionStack, Remainder, CouplingError, solve_heat_coefficient, solve_coefficients,
    expansion_drift, assemble_remainder, expansion_error, sigma_diagnostic, step_remainder
)

__all__ = [
    'ExpansionStack', 'Remainder', 'CouplingError', 'solve_heat_coefficient',
    'solve_coefficients', 'expansion_drift', 'assemble_remainder', 'expansion_error',
    'sigma_diagnostic', 'step_remainder'
]
