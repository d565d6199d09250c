"""
Versioned JSON scenarios and the application presets
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from pydantic import Field as SchemaField

from ..config import config
from ..spectral.grid import TorusGrid, Field, build_grid
from ..coefficients.diffusion import (
    DiffusionCoefficient, smooth_preset, irregular_preset, smooth_extension, MAX_ORDER
)
from ..solver.she import SolverConfig
from .schedules import RegimeSchedule, FIXED, POWER_LAW, TARGETS, REMAINDER

logger = logging.getLogger(__name__)

SMOOTH_PRESETS = ("constant", "cosine", "rational")
IRREGULAR_PRESETS = ("sqrt", "logistic-sqrt")

POINTWISE_SUP = "pointwise-sup"
SPACE_TIME_LP = "space-time-Lp"
EXCEEDANCE = "exceedance"


class ScenarioError(ValueError):
    """Scenario file that does not match the schema"""

    def __init__(self, problems: List[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class GridSpec(_Section):
    dimension: Literal[1, 2, 3] = 1
    modes: int = 128

    @field_validator('modes')
    @classmethod
    def _even_modes(cls, value: int) -> int:
        if value < 4 or value % 2:
            raise ValueError(f"modes must be even and >= 4, got {value}")
        return value


class TimeSpec(_Section):
    dt: float = SchemaField(1e-3, gt=0)
    steps: int = SchemaField(250, ge=1)


class CoefficientSpec(_Section):
    name: Literal["constant", "cosine", "rational", "sqrt", "logistic-sqrt"]
    value: float = 1.0


class InitialSpec(_Section):
    kind: Literal["constant", "cosine"] = "constant"
    mean: float = 1.0
    amplitude: float = 0.0


class NoiseSpec(_Section):
    epsilon: float = SchemaField(2.0 ** -6, ge=0)
    delta: float = SchemaField(0.1, ge=0)
    n_moll: Optional[int] = SchemaField(None, ge=1)
    dealias: bool = False


class StoppingSpec(_Section):
    gamma: float = SchemaField(gt=0)
    extension_margin: Optional[float] = SchemaField(None, gt=0)


class EstimatorSpec(_Section):
    mode: Literal["pointwise-sup", "space-time-Lp", "exceedance"] = POINTWISE_SUP
    p: float = SchemaField(2.0, ge=1)
    target: Literal["remainder", "normalized-remainder", "coefficient"] = REMAINDER
    lattice_times: int = SchemaField(
        default_factory=lambda: int(config.get('harness.lattice_times', 8)), ge=1)
    threshold: Optional[float] = SchemaField(None, gt=0)


class ScheduleSpec(_Section):
    kind: Literal["fixed", "power-law"] = FIXED
    scale: float = SchemaField(1.0, gt=0)
    exponent: float = SchemaField(0.25, gt=0)


class SweepSpec(_Section):
    epsilons: List[float] = SchemaField(default_factory=list)
    deltas: List[float] = SchemaField(default_factory=list)
    schedule: ScheduleSpec = SchemaField(default_factory=ScheduleSpec)
    tolerance: float = SchemaField(
        default_factory=lambda: float(config.get('harness.slope_tolerance', 0.15)), gt=0)

    @field_validator('epsilons', 'deltas')
    @classmethod
    def _positive(cls, values: List[float]) -> List[float]:
        if any(v < 0 for v in values):
            raise ValueError("sweep values must be non-negative")
        return values


class Scenario(_Section):
    """One experiment: grid, time lattice, coefficient, noise and estimator"""
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    schema_version: Literal[1] = SchemaField(1, alias='schema')
    name: str = "scenario"
    preset: Optional[str] = None
    grid: GridSpec = SchemaField(default_factory=GridSpec)
    time: TimeSpec = SchemaField(default_factory=TimeSpec)
    coefficient: CoefficientSpec
    initial: InitialSpec = SchemaField(default_factory=InitialSpec)
    noise: NoiseSpec = SchemaField(default_factory=NoiseSpec)
    conservative: bool = False
    order: int = SchemaField(1, ge=0, le=MAX_ORDER - 1)
    stopping: Optional[StoppingSpec] = None
    estimator: EstimatorSpec = SchemaField(default_factory=EstimatorSpec)
    sweep: SweepSpec = SchemaField(default_factory=SweepSpec)
    replicas: int = SchemaField(100, ge=1)
    seed: int = SchemaField(0, ge=0)

    @model_validator(mode='after')
    def _consistent(self) -> "Scenario":
        if self.coefficient.name in IRREGULAR_PRESETS and self.stopping is None:
            raise ValueError(f"coefficient '{self.coefficient.name}' requires a stopping section")
        white = self.noise.delta == 0 or 0 in self.sweep.deltas
        if white and (self.conservative or self.grid.dimension != 1):
            raise ValueError("delta=0 is only supported for the non-conservative d=1 equation")
        if self.estimator.mode == EXCEEDANCE and self.estimator.threshold is None:
            raise ValueError("exceedance estimator requires a threshold")
        if self.is_irregular:
            self._check_extension_window()
        return self

    def _check_extension_window(self) -> None:
        """The enlarged extension window must stay inside the smooth domain of G"""
        spread = abs(self.initial.amplitude) if self.initial.kind == "cosine" else 0.0
        low, high = self.initial.mean - spread, self.initial.mean + spread
        gamma = self.stopping.gamma
        margin = self.stopping.extension_margin or gamma / 2.0
        G = build_coefficient(self.coefficient)
        if not G.contains(low - gamma - margin, high + gamma + margin):
            raise ValueError(
                f"extension window ({low - gamma:g}, {high + gamma:g}) with margin {margin:g} "
                f"touches a singularity of {G.name} (smooth on {G.domain})"
            )

    @property
    def is_irregular(self) -> bool:
        return self.coefficient.name in IRREGULAR_PRESETS

    def schedule(self) -> RegimeSchedule:
        spec = self.sweep.schedule
        if spec.kind == POWER_LAW:
            return RegimeSchedule(POWER_LAW, scale=spec.scale, exponent=spec.exponent)
        return RegimeSchedule(FIXED, delta=self.noise.delta)

    def echo(self) -> dict:
        return self.model_dump(by_alias=True, mode='json')


@dataclass(eq=False)
class ScenarioSetup:
    """Objects built from a scenario, shared by every replica of a run"""
    scenario: Scenario
    grid: TorusGrid
    u0: Field
    solver_coefficient: DiffusionCoefficient
    expansion_coefficient: DiffusionCoefficient

    def solver_config(self, epsilon: float, delta: float, seed: int) -> SolverConfig:
        s = self.scenario
        return SolverConfig(
            epsilon=epsilon,
            delta=delta,
            dt=s.time.dt,
            steps=s.time.steps,
            conservative=s.conservative,
            gamma=s.stopping.gamma if s.stopping else None,
            seed=seed,
            n_moll=s.noise.n_moll,
            dealias=s.noise.dealias,
        )


def build_coefficient(spec: CoefficientSpec) -> DiffusionCoefficient:
    if spec.name in SMOOTH_PRESETS:
        return smooth_preset(spec.name, c=spec.value)
    return irregular_preset(spec.name)


def initial_values(grid: TorusGrid, spec: InitialSpec) -> np.ndarray:
    """mean + amplitude cos(2 pi x_1) on the grid points"""
    values = np.full(grid.shape, spec.mean, dtype=float)
    if spec.kind == "cosine":
        values = values + spec.amplitude * np.cos(2.0 * np.pi * grid.points[0])
    return values


def setup(scenario: Scenario) -> ScenarioSetup:
    """Build the grid, initial condition and coefficients of a scenario

    Window-smooth coefficients are paired with their smooth extension on
    [min u0 - gamma, max u0 + gamma] for the expansion.
    """
    grid = build_grid(scenario.grid.dimension, scenario.grid.modes)
    values = initial_values(grid, scenario.initial)
    u0 = Field.physical(grid, values)
    G = build_coefficient(scenario.coefficient)

    G0 = G
    if G.is_window_smooth:
        gamma = scenario.stopping.gamma
        margin = scenario.stopping.extension_margin or gamma / 2.0
        G0 = smooth_extension(G, gamma, margin, float(values.min()), float(values.max()))

    return ScenarioSetup(scenario=scenario, grid=grid, u0=u0,
                         solver_coefficient=G, expansion_coefficient=G0)


def _pointer(location) -> str:
    return "/" + "/".join(str(part) for part in location)


def parse_scenario(data: Union[dict, str]) -> Scenario:
    """Validate a scenario mapping (or JSON text), raising ScenarioError with pointered messages"""
    try:
        if isinstance(data, str):
            data = json.loads(data)
        return Scenario.model_validate(data)
    except json.JSONDecodeError as e:
        raise ScenarioError([f"/: invalid JSON ({e.msg} at line {e.lineno})"]) from e
    except ValidationError as e:
        problems = [f"{_pointer(error['loc'])}: {error['msg']}" for error in e.errors()]
        raise ScenarioError(problems) from e


def load_scenario(path: str) -> Scenario:
    """Read and validate a scenario file"""
    path = Path(path)
    if not path.exists():
        raise ScenarioError([f"/: scenario file not found: {path}"])
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except UnicodeDecodeError as e:
        raise ScenarioError([f"/: scenario file is not UTF-8 ({e.reason} at byte {e.start})"]) from e
    except OSError as e:
        raise ScenarioError([f"/: cannot read scenario file {path}: {e.strerror}"]) from e
    scenario = parse_scenario(text)
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


_PRESETS = {
    "dawson-watanabe": dict(coefficient="sqrt", conservative=False, mean=1.0, gamma=0.5),
    "fleming-viot": dict(coefficient="logistic-sqrt", conservative=False, mean=0.5, gamma=0.2),
    "ssep": dict(coefficient="logistic-sqrt", conservative=True, mean=0.5, gamma=0.2),
    "dean-kawasaki": dict(coefficient="sqrt", conservative=True, mean=1.0, gamma=0.5),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, dimension: int = 1) -> Scenario:
    """Application scenario for one of the correlated particle-system models

    Args:
        name: 'dawson-watanabe', 'fleming-viot', 'ssep' or 'dean-kawasaki'
        dimension: Spatial dimension (budgets from config.yaml)

    Returns:
        Scenario
    """
    if name not in _PRESETS:
        raise ValueError(f"Unknown preset: {name}; available: {', '.join(PRESET_NAMES)}")
    entry = _PRESETS[name]
    budget = config.get(f'budgets.d{dimension}', {}) or {}

    # delta = eps^(1/(d+3)) keeps eps delta^-(d+2) -> 0
    exponent = 1.0 / (dimension + 3)
    epsilons = [2.0 ** -k for k in range(4, 11)]
    return Scenario.model_validate({
        'schema': 1,
        'name': name,
        'preset': name,
        'grid': {'dimension': dimension, 'modes': budget.get('modes', 64)},
        'time': {'dt': budget.get('dt', 1e-3), 'steps': budget.get('steps', 250)},
        'coefficient': {'name': entry['coefficient']},
        'initial': {'kind': 'constant', 'mean': entry['mean']},
        'noise': {'epsilon': epsilons[-1], 'delta': epsilons[-1] ** exponent},
        'conservative': entry['conservative'],
        'order': 1,
        'stopping': {'gamma': entry['gamma']},
        'estimator': {'mode': SPACE_TIME_LP if entry['conservative'] else POINTWISE_SUP},
        'sweep': {'epsilons': epsilons,
                  'schedule': {'kind': POWER_LAW, 'scale': 1.0, 'exponent': exponent}},
        'replicas': budget.get('replicas', 100),
        'seed': 0,
    })
