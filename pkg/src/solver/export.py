"""
Binary field snapshots with a JSON sidecar
"""

import json
import logging
from pathlib import Path
from typing import Dict, Tuple

import joblib
import numpy as np

from .she import Trajectory

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".json"
ARRAY_SUFFIX = ".joblib"


def export_fields(directory: str, name: str, arrays: Dict[str, np.ndarray],
                  metadata: dict) -> Tuple[Path, Path]:
    """Dump named arrays with joblib and write their metadata next to them

    Args:
        directory: Output directory (created if missing)
        name: Base file name
        arrays: Arrays to store
        metadata: JSON-serialisable description (grid, seed, config echo)

    Returns:
        (array file, sidecar file)
    """
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    array_path = target / f"{name}{ARRAY_SUFFIX}"
    sidecar_path = target / f"{name}{SIDECAR_SUFFIX}"

    joblib.dump(arrays, array_path, compress=3)
    sidecar = dict(metadata)
    sidecar['arrays'] = {key: {'shape': list(value.shape), 'dtype': str(value.dtype)}
                         for key, value in arrays.items()}
    with open(sidecar_path, 'w') as f:
        json.dump(sidecar, f, indent=2, default=str)

    logger.info(f"Exported {len(arrays)} array(s) to {array_path}")
    return array_path, sidecar_path


def load_fields(directory: str, name: str) -> Tuple[Dict[str, np.ndarray], dict]:
    """Inverse of export_fields"""
    target = Path(directory)
    arrays = joblib.load(target / f"{name}{ARRAY_SUFFIX}")
    with open(target / f"{name}{SIDECAR_SUFFIX}") as f:
        metadata = json.load(f)
    return arrays, metadata


def export_trajectory(trajectory: Trajectory, directory: str, name: str = "trajectory",
                      config_echo: dict = None) -> Tuple[Path, Path]:
    """Store a trajectory's snapshots with grid metadata, seed and config echo"""
    metadata = {
        'kind': 'trajectory',
        'dimension': trajectory.grid.dimension,
        'modes_per_axis': trajectory.grid.modes_per_axis,
        'dt': trajectory.dt,
        'steps': trajectory.steps,
        'seed': trajectory.seed,
        'epsilon': trajectory.epsilon,
        'delta': trajectory.delta,
        'conservative': trajectory.conservative,
        'stopping_index': trajectory.stopping_index,
        'metadata': trajectory.metadata,
        'config': config_echo or {},
    }
    return export_fields(directory, name, {'u': trajectory.values}, metadata)
