"""
Enumeration of the solution sets behind the expansion products J(k, l)

A solution of order (k, l) is a tuple (q_1, ..., q_{k-l}) of non-negative
integers with q_1 + ... + q_{k-l} = l. Lambda(k, l, m) additionally fixes
q_1 + 2 q_2 + ... + (k-l) q_{k-l} = m - 1, and Lambda(k, l) = Lambda(k, l, k).
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from ..spectral.grid import Field

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartitionSolution:
    """One integer solution q and its multinomial weight l! / (q_1! ... q_{k-l}!)"""
    q: Tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.q)

    @property
    def weight(self) -> int:
        return weight(self.order, self.q)

    @property
    def moment(self) -> int:
        """sum_i i q_i"""
        return sum(i * qi for i, qi in enumerate(self.q, start=1))


@lru_cache(maxsize=None)
def _solutions(length: int, count: int, moment: Optional[int]) -> Tuple[Tuple[int, ...], ...]:
    """All q of the given length with sum count and (optionally) sum i q_i = moment

    Descends from q_length to q_1, pruning on both residuals.
    """
    if length == 0:
        return ((),) if count == 0 and moment in (None, 0) else ()

    found = []
    for last in range(count, -1, -1):
        rest_moment = None
        if moment is not None:
            rest_moment = moment - length * last
            rest_count = count - last
            # q_1..q_{length-1} contribute between rest_count and (length-1) rest_count
            if rest_moment < 0:
                continue
            if length > 1 and not rest_count <= rest_moment <= (length - 1) * rest_count:
                continue
        for head in _solutions(length - 1, count - last, rest_moment):
            found.append(head + (last,))
    return tuple(sorted(found))


def _check(k: int, l: int):
    if k < 0 or l < 0:
        raise ValueError(f"Partition arguments must be non-negative, got k={k}, l={l}")


def lambda_(k: int, l: int) -> Tuple[PartitionSolution, ...]:
    """Lambda(k, l): solutions with sum q_i = l and sum i q_i = k - 1

    Lambda(1, 0) holds the single all-zero tuple; Lambda(k, 0) is empty for k >= 2
    and Lambda(k, k) is empty.
    """
    _check(k, l)
    if k < 1 or l >= k:
        return ()
    return tuple(PartitionSolution(q) for q in _solutions(k - l, l, k - 1))


def lambda_m(k: int, l: int, m: int) -> Tuple[PartitionSolution, ...]:
    """Lambda(k, l, m): solutions with sum q_i = l and sum i q_i = m - 1

    Arguments outside l + 1 <= m <= (k - l) l + 1 give the empty set.
    """
    _check(k, l)
    if m < 0:
        raise ValueError(f"Partition arguments must be non-negative, got m={m}")
    if k < 1 or l >= k or m < l + 1 or m > (k - l) * l + 1:
        return ()
    return tuple(PartitionSolution(q) for q in _solutions(k - l, l, m - 1))


def unconstrained(k: int, l: int) -> Tuple[PartitionSolution, ...]:
    """All tuples of length k - l with sum l"""
    _check(k, l)
    if l > k:
        return ()
    return tuple(PartitionSolution(q) for q in _solutions(k - l, l, None))


def weight(l: int, q: Sequence[int]) -> int:
    """Multinomial coefficient l! / (q_1! ... q_n!)"""
    if any(qi < 0 for qi in q):
        raise ValueError(f"Negative entry in {tuple(q)}")
    if sum(q) != l:
        raise ValueError(f"Entries of {tuple(q)} do not sum to {l}")
    denominator = 1
    for qi in q:
        denominator *= math.factorial(qi)
    return math.factorial(l) // denominator


def j_product(k: int, l: int, terms: Sequence[np.ndarray]) -> np.ndarray:
    """Pointwise J(k, l) = sum over Lambda(k, l) of weight * prod_i (terms[i])^{q_i}

    Args:
        k: Outer order
        l: Derivative order
        terms: Physical values with terms[i] holding coefficient i (terms[0] sets the shape)

    Returns:
        Array shaped like terms[0]
    """
    if len(terms) == 0:
        raise ValueError("J(k, l) needs at least the zeroth coefficient")
    shape = np.shape(terms[0])
    solutions = lambda_(k, l)
    if solutions and l > 0 and len(terms) - 1 < k - l:
        raise ValueError(f"J({k}, {l}) needs coefficients up to order {k - l}, "
                         f"stack holds {len(terms) - 1}")

    total = np.zeros(shape)
    for solution in solutions:
        product = np.full(shape, float(solution.weight))
        for i, qi in enumerate(solution.q, start=1):
            if qi:
                product = product * terms[i] ** qi
        total += product
    return total


def evaluate_j(k: int, l: int, stack, t: int) -> Field:
    """J(k, l) of an expansion stack at stored time index t

    Args:
        k: Outer order
        l: Derivative order
        stack: Object exposing grid and physical_terms(t)
        t: Stored time index

    Returns:
        Physical Field
    """
    return Field.physical(stack.grid, j_product(k, l, stack.physical_terms(t)))
