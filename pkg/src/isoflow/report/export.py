"""
VTK export of degree-k embeddings.

Every mesh triangle is split into s^2 sub-triangles on its barycentric lattice
and the lattice points are mapped through the field. Points are not shared
between triangles: a field on F triangles gives F (s+1)(s+2)/2 points.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

import numpy as np

from ..errors import ExportError
from ..fem.lagrange import FeField
from ..mesh.io import read_vtk_polydata, write_vtk_polydata
from ..mesh.surface import lattice_indices, lattice_triangles

logger = logging.getLogger(__name__)

# Point data are arrays (F, npts) or callables of the reference points (npts, 2).
PointData = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def visualization_points(subdivision: int) -> np.ndarray:
    """Reference coordinates of the lattice points, (npts, 2)."""
    return lattice_indices(subdivision)[:, 1:] / subdivision


def export_vtk(
    field: FeField,
    path,
    subdivision: int = 4,
    point_data: Optional[Mapping[str, PointData]] = None,
) -> Path:
    if field.ncomp != 3:
        raise ExportError(f"Only 3-component fields can be exported, got {field.ncomp}")
    if subdivision < 1:
        raise ExportError(f"Subdivision must be >= 1, got {subdivision}")

    ref = visualization_points(subdivision)
    npts = len(ref)
    values, _ = field.evaluate(ref)                         # (F, npts, 3)
    F = values.shape[0]
    local = lattice_triangles(subdivision)
    triangles = (np.arange(F)[:, None, None] * npts + local[None]).reshape(-1, 3)

    data = {}
    for name, item in (point_data or {}).items():
        arr = item(ref) if callable(item) else item
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (F, npts):
            raise ExportError(f"Point data '{name}' has shape {arr.shape}, expected {(F, npts)}")
        data[name] = arr.ravel()

    out = write_vtk_polydata(values.reshape(-1, 3), triangles, path, data)
    logger.debug("exported %s: %d points, %d triangles", out, F * npts, len(triangles))
    return out


def read_vtk(path) -> tuple[np.ndarray, np.ndarray, dict]:
    return read_vtk_polydata(path)
