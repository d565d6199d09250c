"""
Integer-solution sets and the expansion products built on them
"""

from .partitions import (
    PartitionSolution, lambda_, lambda_m, unconstrained, weight, j_product, evaluate_j
)

__all__ = [
    'PartitionSolution', 'lambda_', 'lambda_m', 'unconstrained', 'weight',
    'j_product', 'evaluate_j'
]
