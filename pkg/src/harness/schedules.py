"""
Joint scaling regimes (epsilon, delta(epsilon)) and the exponents they predict
"""

import logging
from dataclasses import dataclass
from typing import Optional

logger = logging.getLogger(__name__)

FIXED = "fixed"
POWER_LAW = "power-law"

REMAINDER = "remainder"
NORMALIZED_REMAINDER = "normalized-remainder"
COEFFICIENT = "coefficient"
TARGETS = (REMAINDER, NORMALIZED_REMAINDER, COEFFICIENT)


def k_delta_exponent(i: int, d: int) -> Optional[float]:
    """Power beta with K_i(delta, d) ~ delta^-beta, or None for the logarithmic case

    K_1 is bounded for d=1, logarithmic for d=2 and delta^(2-d) beyond;
    K_2 = delta^-d.
    """
    if i not in (1, 2):
        raise ValueError(f"Blow-up rate index must be 1 or 2, got {i}")
    if i == 2:
        return float(d)
    if d == 1:
        return 0.0
    if d == 2:
        return None
    return float(d - 2)


@dataclass(frozen=True)
class RegimeSchedule:
    """delta as a function of epsilon: fixed, or power law delta = scale * epsilon^exponent"""
    kind: str = FIXED
    delta: Optional[float] = None
    scale: float = 1.0
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in (FIXED, POWER_LAW):
            raise ValueError(f"Unknown schedule kind: {self.kind}")
        if self.kind == FIXED and (self.delta is None or self.delta < 0):
            raise ValueError(f"Fixed schedule needs a non-negative delta, got {self.delta}")
        if self.kind == POWER_LAW and (self.scale <= 0 or self.exponent <= 0):
            raise ValueError(f"Power-law schedule needs scale > 0 and exponent > 0, "
                             f"got scale={self.scale}, exponent={self.exponent}")

    def delta_for(self, epsilon: float) -> float:
        if self.kind == FIXED:
            return self.delta
        if epsilon <= 0:
            raise ValueError(f"Power-law schedule is undefined at epsilon={epsilon}")
        return self.scale * epsilon ** self.exponent

    def k_exponent(self, i: int, d: int) -> float:
        """Exponent kappa of epsilon in K_i(delta(epsilon), d), logarithms dropped"""
        if self.kind == FIXED:
            return 0.0
        beta = k_delta_exponent(i, d)
        return -self.exponent * (beta or 0.0)

    def predicted_exponent(self, n: int, p: float, i: int, d: int, target: str = REMAINDER) -> float:
        """Exponent of epsilon in the moment bound of the chosen target

        remainder: eps^(np/2) (eps K^(n+1))^(p/2); normalized-remainder drops
        eps^(np/2); coefficient: K^(pn/2).
        """
        kappa = self.k_exponent(i, d)
        if target == REMAINDER:
            return n * p / 2.0 + p / 2.0 * (1.0 + (n + 1) * kappa)
        if target == NORMALIZED_REMAINDER:
            return p / 2.0 * (1.0 + (n + 1) * kappa)
        if target == COEFFICIENT:
            return p * n / 2.0 * kappa
        raise ValueError(f"Unknown target: {target}")

    def is_admissible(self, n: int, conservative: bool, irregular: bool, d: int) -> bool:
        """Whether epsilon K_i^(n+1) -> 0 (and the window conditions for irregular G)

        Irregular non-conservative runs also need epsilon delta^-d -> 0, irregular
        conservative runs epsilon delta^-(d+2) -> 0.
        """
        if self.kind == FIXED:
            return True
        i = 2 if conservative else 1
        if 1.0 + (n + 1) * self.k_exponent(i, d) <= 0:
            return False
        if irregular:
            power = d + 2 if conservative else d
            if 1.0 - self.exponent * power <= 0:
                return False
        return True

    def describe(self) -> str:
        if self.kind == FIXED:
            return f"delta={self.delta:g}"
        return f"delta={self.scale:g}*eps^{self.exponent:g}"
