"""
Checkpoint and trajectory files.

Both are numpy ``.npz`` archives with a JSON ``meta`` entry describing the grid,
the physical parameters and the frame, so a file can be read back without the
run configuration that produced it.
"""
import json
import logging
import os
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.nonlinear.state import FIELD_ORDER, SystemState
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"


def _grid_meta(grid: GridSpec) -> Dict[str, Any]:
    return {"nx": grid.nx, "ny": grid.ny, "ly": grid.ly, "dealias": grid.dealias}


def _npz_path(path: str) -> str:
    path = str(path)
    if not path.endswith(".npz"):
        path += ".npz"
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return path


def _read_meta(archive) -> Dict[str, Any]:
    return json.loads(str(archive["meta"]))


def save_checkpoint(state: SystemState, path: str, schema_version: Optional[str] = None) -> str:
    """
    Write one state to ``path``.

    Args:
        state: State to write
        path: Target file; ``.npz`` is appended when missing
        schema_version: Version tag embedded in the metadata

    Returns:
        The path actually written
    """
    path = _npz_path(path)
    meta = {
        "grid": _grid_meta(state.grid),
        "params": state.params.model_dump(),
        "t": state.t,
        "shear_time": state.shear_time,
        "schema_version": schema_version or SCHEMA_VERSION,
    }
    np.savez(path, w=state.w.coef, j=state.j.coef, theta=state.theta.coef, meta=np.array(json.dumps(meta, sort_keys=True)))
    logger.info(f"Checkpoint written to {path} at t={state.t:.6g}")
    return path


def load_checkpoint(path: str) -> SystemState:
    """Read a state written by save_checkpoint."""
    with np.load(path) as archive:
        meta = _read_meta(archive)
        grid = GridSpec(**meta["grid"])
        data = np.stack([archive[name] for name in FIELD_ORDER])
    params = PhysParams(**meta["params"])
    return SystemState.from_stack(grid, data, meta["t"], params, meta["shear_time"])


def save_trajectory(
    path: str,
    grid: GridSpec,
    params: PhysParams,
    times: np.ndarray,
    data: np.ndarray,
    schema_version: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Write sampled moving-frame states; sample n carries shear_time == times[n].

    Args:
        path: Target file
        grid: Grid of every sample
        params: Physical parameters of the run
        times: Sample times, shape (n,)
        data: Coefficients in FIELD_ORDER, shape (n, 3, nx, ny)
        schema_version: Version tag embedded in the metadata
        extra: Additional metadata, such as the resolved run config

    Returns:
        The path actually written
    """
    path = _npz_path(path)
    meta = {
        "grid": _grid_meta(grid),
        "params": params.model_dump(),
        "schema_version": schema_version or SCHEMA_VERSION,
        "extra": extra or {},
    }
    np.savez(path, times=np.asarray(times, dtype=float), data=data, meta=np.array(json.dumps(meta, sort_keys=True)))
    logger.info(f"Trajectory with {len(times)} samples written to {path}")
    return path


def load_trajectory(path: str) -> Tuple[GridSpec, PhysParams, np.ndarray, np.ndarray]:
    """
    Read a trajectory written by save_trajectory.

    Returns:
        Tuple of (grid, params, times, data)

    Raises:
        ValueError: If the archive is not a trajectory file
    """
    with np.load(path) as archive:
        if "times" not in archive.files or "data" not in archive.files:
            raise ValueError(f"{path} is not a trajectory file")
        meta = _read_meta(archive)
        times = archive["times"]
        data = archive["data"]
    return GridSpec(**meta["grid"]), PhysParams(**meta["params"]), times, data


def read_trajectory_meta(path: str) -> Dict[str, Any]:
    """Metadata of a trajectory file, including the ``extra`` written with it."""
    with np.load(path) as archive:
        return _read_meta(archive)
