"""
Diffusion coefficients G with derivative stacks and smooth extensions
"""

from .diffusion import (
    DiffusionCoefficient, smooth_preset, irregular_preset, smooth_extension,
    taylor_remainder_check, GLOBAL_SMOOTH, WINDOW_SMOOTH, MAX_ORDER
)

__all__ = [
    'DiffusionCoefficient', 'smooth_preset', 'irregular_preset', 'smooth_extension',
    'taylor_remainder_check', 'GLOBAL_SMOOTH', 'WINDOW_SMOOTH', 'MAX_ORDER'
]
