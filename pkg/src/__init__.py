"""
Heatwave: small-noise expansion simulator for stochastic heat equations on the torus
"""

__version__ = "1.0.0"
__author__ = "Heatwave Team"
__description__ = "Pseudo-spectral SHE simulator with higher-order fluctuation expansions"
