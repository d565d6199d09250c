"""
Diffusion coefficient presets and the C-infinity cutoff extension G0
"""

import re
import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

GLOBAL_SMOOTH = "globally-smooth"
WINDOW_SMOOTH = "window-smooth"
MAX_ORDER = 6

# Transition coordinates closer than this to 0 or 1 take the exact limit values
_CUTOFF_EDGE = 0.01

Evaluator = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class DiffusionCoefficient:
    """Diffusion coefficient G with derivatives up to max_order

    Attributes:
        name: Preset name
        evaluator: Callable (u, l) -> G^(l)(u)
        max_order: Highest available derivative
        smoothness: 'globally-smooth' or 'window-smooth'
        domain: Open interval on which G is smooth
        derivative_bounds: sup |G^(l)| over the real line, globally-smooth only
        window: Interval on which an extension agrees with the original G
        margin: Width of the cutoff transition of an extension
    """
    name: str
    evaluator: Evaluator
    max_order: int = MAX_ORDER
    smoothness: str = GLOBAL_SMOOTH
    domain: Tuple[float, float] = (-math.inf, math.inf)
    derivative_bounds: Optional[Tuple[float, ...]] = None
    window: Optional[Tuple[float, float]] = None
    margin: Optional[float] = None

    def __call__(self, u) -> np.ndarray:
        return self.derivative(u, 0)

    @property
    def is_window_smooth(self) -> bool:
        return self.smoothness == WINDOW_SMOOTH

    def derivative(self, u, order: int) -> np.ndarray:
        """Evaluate G^(order) pointwise"""
        if order < 0 or order > self.max_order:
            raise ValueError(f"{self.name}: derivative order {order} outside [0, {self.max_order}]")
        return self.evaluator(np.asarray(u, dtype=float), order)

    def derivative_bound(self, order: int) -> float:
        """Declared bound on sup |G^(order)| over the real line"""
        if self.derivative_bounds is None:
            raise ValueError(f"{self.name} has no global derivative bounds")
        if order > self.max_order:
            raise ValueError(f"{self.name}: derivative order {order} exceeds {self.max_order}")
        return self.derivative_bounds[order]

    def sup_on(self, lower: float, upper: float, order: int = 0, samples: int = 2001) -> float:
        """Sampled sup |G^(order)| on [lower, upper]"""
        points = np.linspace(lower, upper, samples)
        return float(np.max(np.abs(self.derivative(points, order))))

    def contains(self, lower: float, upper: float) -> bool:
        """Whether [lower, upper] lies strictly inside the smooth domain"""
        return self.domain[0] < lower and upper < self.domain[1]

    def __repr__(self) -> str:
        return f"DiffusionCoefficient(name='{self.name}', smoothness='{self.smoothness}')"


def _falling(l: int) -> float:
    """(1/2)(1/2 - 1)...(1/2 - l + 1), the l-th derivative constant of sqrt"""
    return float(special.poch(1.5 - l, l))


def _constant(c: float) -> Evaluator:
    def evaluate(u: np.ndarray, order: int) -> np.ndarray:
        return np.full_like(u, c if order == 0 else 0.0)
    return evaluate


def _cosine(u: np.ndarray, order: int) -> np.ndarray:
    return np.cos(u + order * np.pi / 2.0)


def _rational(u: np.ndarray, order: int) -> np.ndarray:
    # 1/(1+u^2) = Im 1/(u-i)
    return (-1) ** order * math.factorial(order) * np.imag((u - 1j) ** (-(order + 1)))


def _sqrt(u: np.ndarray, order: int) -> np.ndarray:
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.where(u > 0, _falling(order) * np.abs(u) ** (0.5 - order), np.nan)


def _logistic_sqrt(u: np.ndarray, order: int) -> np.ndarray:
    # Leibniz rule on sqrt(u) * sqrt(1 - u)
    inside = (u > 0) & (u < 1)
    v = np.where(inside, u, 0.5)
    total = np.zeros_like(v)
    for j in range(order + 1):
        k = order - j
        left = _falling(j) * v ** (0.5 - j)
        right = (-1) ** k * _falling(k) * (1.0 - v) ** (0.5 - k)
        total += math.comb(order, j) * left * right
    return np.where(inside, total, np.nan)


def smooth_preset(name: str, c: float = 1.0) -> DiffusionCoefficient:
    """Globally smooth presets with bounded derivatives

    Args:
        name: 'constant' (or 'constant(c)'), 'cosine' or 'rational'
        c: Value of the constant preset

    Returns:
        DiffusionCoefficient
    """
    match = re.fullmatch(r"constant\((.+)\)", name.strip())
    if match:
        name, c = "constant", float(match.group(1))

    if name == "constant":
        bounds = (abs(c),) + (0.0,) * MAX_ORDER
        return DiffusionCoefficient(f"constant({c:g})", _constant(c), derivative_bounds=bounds)
    if name == "cosine":
        return DiffusionCoefficient("cosine", _cosine, derivative_bounds=(1.0,) * (MAX_ORDER + 1))
    if name == "rational":
        bounds = tuple(float(math.factorial(l)) for l in range(MAX_ORDER + 1))
        return DiffusionCoefficient("rational", _rational, derivative_bounds=bounds)
    raise ValueError(f"Unknown smooth preset: {name}")


def irregular_preset(name: str) -> DiffusionCoefficient:
    """Square-root type coefficients that are smooth only away from their singularities"""
    if name == "sqrt":
        return DiffusionCoefficient("sqrt", _sqrt, smoothness=WINDOW_SMOOTH, domain=(0.0, math.inf))
    if name == "logistic-sqrt":
        return DiffusionCoefficient("logistic-sqrt", _logistic_sqrt,
                                    smoothness=WINDOW_SMOOTH, domain=(0.0, 1.0))
    raise ValueError(f"Unknown irregular preset: {name}")


def _series_reciprocal(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, a.shape[0]):
        out[k] = -np.sum(a[1:k + 1] * out[k - 1::-1], axis=0) / a[0]
    return out


def _series_exp(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        j = np.arange(1, k + 1).reshape((-1,) + (1,) * (a.ndim - 1))
        out[k] = np.sum(j * a[1:k + 1] * out[k - 1::-1], axis=0) / k
    return out


def _smooth_step(x: np.ndarray, order: int) -> np.ndarray:
    """Derivatives 0..order of s(x) = psi(x) / (psi(x) + psi(1-x)), psi(x) = exp(-1/x)

    Returns:
        Array of shape (order + 1,) + x.shape
    """
    out = np.zeros((order + 1,) + x.shape)
    out[0] = np.where(x >= 1.0 - _CUTOFF_EDGE, 1.0, 0.0)
    middle = (x > _CUTOFF_EDGE) & (x < 1.0 - _CUTOFF_EDGE)
    if not np.any(middle):
        return out

    xm = x[middle]
    left = np.zeros((order + 1,) + xm.shape)
    left[0] = xm
    if order >= 1:
        left[1] = 1.0
    right = -left
    right[0] = 1.0 - xm
    # s = 1 / (1 + exp(1/x - 1/(1-x)))
    exponent = _series_reciprocal(left) - _series_reciprocal(right)
    denominator = _series_exp(exponent)
    denominator[0] += 1.0
    taylor = _series_reciprocal(denominator)
    factorials = np.array([math.factorial(k) for k in range(order + 1)], dtype=float)
    out[:, middle] = taylor * factorials.reshape((-1, 1))
    return out


def _cutoff(zeta: np.ndarray, window: Tuple[float, float], margin: float,
            order: int) -> np.ndarray:
    """Derivatives 0..order of the cutoff that is 1 on window and 0 outside window +- margin"""
    lower, upper = window
    out = np.zeros((order + 1,) + zeta.shape)
    out[0] = np.where((zeta >= lower) & (zeta <= upper), 1.0, 0.0)

    rising = (zeta > lower - margin) & (zeta < lower)
    if np.any(rising):
        out[:, rising] = _smooth_step((zeta[rising] - (lower - margin)) / margin, order)

    falling = (zeta > upper) & (zeta < upper + margin)
    if np.any(falling):
        step = _smooth_step((upper + margin - zeta[falling]) / margin, order)
        signs = np.array([(-1.0) ** k for k in range(order + 1)]).reshape((-1, 1))
        out[:, falling] = step * signs

    scale = np.array([margin ** -k for k in range(order + 1)]).reshape((-1,) + (1,) * zeta.ndim)
    out[1:] *= scale[1:]
    return out


def smooth_extension(G: DiffusionCoefficient, gamma: float, gamma_prime: float,
                     lower: float, upper: float) -> DiffusionCoefficient:
    """Globally smooth G0 agreeing with G on [lower - gamma, upper + gamma]

    G0 vanishes outside the window enlarged by gamma_prime and blends through a
    C-infinity cutoff in between.

    Args:
        G: Coefficient to extend
        gamma: Window half-margin around the range [lower, upper] of the initial data
        gamma_prime: Width of the cutoff transition
        lower: ess inf of the initial data (K')
        upper: ess sup of the initial data (K)

    Returns:
        Globally smooth DiffusionCoefficient
    """
    if gamma <= 0 or gamma_prime <= 0:
        raise ValueError(f"Margins must be positive, got gamma={gamma}, gamma'={gamma_prime}")
    if lower > upper:
        raise ValueError(f"Empty initial range [{lower}, {upper}]")

    window = (lower - gamma, upper + gamma)
    if not G.contains(window[0] - gamma_prime, window[1] + gamma_prime):
        raise ValueError(
            f"Window {window} with margin {gamma_prime} touches a singularity of "
            f"{G.name} (smooth on {G.domain})"
        )

    def evaluate(zeta: np.ndarray, order: int) -> np.ndarray:
        zeta = np.atleast_1d(zeta)
        support = (zeta > window[0] - gamma_prime) & (zeta < window[1] + gamma_prime)
        safe = np.where(support, zeta, 0.5 * (window[0] + window[1]))
        chi = _cutoff(safe, window, gamma_prime, order)
        total = np.zeros_like(safe)
        for j in range(order + 1):
            total += math.comb(order, j) * G.derivative(safe, j) * chi[order - j]
        return np.where(support, total, 0.0)

    # Inside the window the cutoff is exactly 1, so G0 reproduces G bit for bit there
    def evaluate_exact(zeta: np.ndarray, order: int) -> np.ndarray:
        shaped = np.asarray(zeta, dtype=float)
        flat = evaluate(shaped.ravel(), order)
        inside = (shaped.ravel() >= window[0]) & (shaped.ravel() <= window[1])
        if np.any(inside):
            flat[inside] = G.derivative(shaped.ravel()[inside], order)
        return flat.reshape(shaped.shape)

    logger.debug(f"Smooth extension of {G.name} on window {window}, margin {gamma_prime}")
    return DiffusionCoefficient(
        name=f"{G.name}-extended",
        evaluator=evaluate_exact,
        max_order=G.max_order,
        smoothness=GLOBAL_SMOOTH,
        domain=(-math.inf, math.inf),
        window=window,
        margin=gamma_prime,
    )


def taylor_remainder_check(G: DiffusionCoefficient, a, b, n: int) -> np.ndarray:
    """|G(a) - G(b) - sum_{l=1}^{n-1} G^(l)(b) (a-b)^l / l!|

    Args:
        G: Diffusion coefficient
        a: Evaluation point(s)
        b: Expansion point(s)
        n: Expansion order; must not exceed G.max_order

    Returns:
        Residual(s)
    """
    if n > G.max_order:
        raise ValueError(f"Taylor order {n} exceeds available derivatives ({G.max_order})")
    if n < 1:
        raise ValueError(f"Taylor order must be positive, got {n}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = a - b
    expansion = G(b)
    for l in range(1, n):
        expansion = expansion + G.derivative(b, l) * h ** l / math.factorial(l)
    return np.abs(G(a) - expansion)
