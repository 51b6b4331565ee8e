"""
Plain-text mesh formats: OFF for reference meshes and legacy ASCII VTK
POLYDATA for visualization. Coordinates are written with 17 significant
digits so a re-import reproduces them exactly.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from ..errors import ExportError
from .surface import SurfaceMesh

logger = logging.getLogger(__name__)

FLOAT_FMT = "%.17g"


def _tokens(path: Path) -> list[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"Cannot read {path}: {exc}") from exc
    lines = [line.split("#", 1)[0] for line in text.splitlines()]
    return " ".join(lines).split()


def write_off(mesh: SurfaceMesh, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write("OFF\n")
            f.write(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}\n")
            np.savetxt(f, mesh.vertices, fmt=FLOAT_FMT)
            faces = np.column_stack((np.full(mesh.n_triangles, 3), mesh.triangles))
            np.savetxt(f, faces, fmt="%d")
    except OSError as exc:
        raise ExportError(f"Cannot write {path}: {exc}") from exc
    logger.debug("wrote %s (%d vertices, %d triangles)", path, mesh.n_vertices, mesh.n_triangles)
    return path


def read_off(path: str | Path) -> SurfaceMesh:
    """Read a triangle OFF file; topology is validated on construction."""
    path = Path(path)
    tok = _tokens(path)
    if not tok or tok[0] != "OFF":
        raise ExportError(f"{path} is not an OFF file")
    try:
        nv, nf = int(tok[1]), int(tok[2])
        pos = 4
        verts = np.array(tok[pos: pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = np.array(tok[pos: pos + 4 * nf], dtype=np.int64).reshape(nf, 4)
    except (IndexError, ValueError) as exc:
        raise ExportError(f"Malformed OFF file {path}: {exc}") from exc
    if np.any(faces[:, 0] != 3):
        raise ExportError(f"{path} contains non-triangular faces")
    return SurfaceMesh.from_triangles(verts, faces[:, 1:])


def write_vtk_polydata(
    points: np.ndarray,
    triangles: np.ndarray,
    path: str | Path,
    point_data: Optional[Mapping[str, np.ndarray]] = None,
    title: str = "isoflow surface",
) -> Path:
    """Legacy ASCII VTK POLYDATA with optional scalar POINT_DATA."""
    path = Path(path)
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write(f"{title}\n")
            f.write("ASCII\n")
            f.write("DATASET POLYDATA\n")
            f.write(f"POINTS {len(points)} double\n")
            np.savetxt(f, points, fmt=FLOAT_FMT)
            f.write(f"POLYGONS {len(triangles)} {4 * len(triangles)}\n")
            np.savetxt(f, np.column_stack((np.full(len(triangles), 3), triangles)), fmt="%d")
            if point_data:
                f.write(f"POINT_DATA {len(points)}\n")
                for name, values in point_data.items():
                    values = np.asarray(values, dtype=float).ravel()
                    if len(values) != len(points):
                        raise ExportError(f"Point data '{name}' has {len(values)} values for {len(points)} points")
                    f.write(f"SCALARS {name} double 1\n")
                    f.write("LOOKUP_TABLE default\n")
                    np.savetxt(f, values, fmt=FLOAT_FMT)
    except OSError as exc:
        raise ExportError(f"Cannot write {path}: {exc}") from exc
    return path


def read_vtk_polydata(path: str | Path) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Inverse of write_vtk_polydata: (points, triangles, point_data)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ExportError(f"Cannot read {path}: {exc}") from exc
    if len(lines) < 4 or not lines[0].startswith("# vtk") or lines[3].strip() != "DATASET POLYDATA":
        raise ExportError(f"{path} is not a legacy VTK POLYDATA file")

    tok = " ".join(lines[4:]).split()
    data: dict[str, np.ndarray] = {}
    points = triangles = None
    i = 0
    try:
        while i < len(tok):
            key = tok[i]
            if key == "POINTS":
                n = int(tok[i + 1])
                points = np.array(tok[i + 3: i + 3 + 3 * n], dtype=float).reshape(n, 3)
                i += 3 + 3 * n
            elif key == "POLYGONS":
                n = int(tok[i + 1])
                cells = np.array(tok[i + 3: i + 3 + 4 * n], dtype=np.int64).reshape(n, 4)
                triangles = cells[:, 1:]
                i += 3 + 4 * n
            elif key == "POINT_DATA":
                i += 2
            elif key == "SCALARS":
                name = tok[i + 1]
                n = len(points)
                start = i + 6  # SCALARS name type 1 LOOKUP_TABLE default
                data[name] = np.array(tok[start: start + n], dtype=float)
                i = start + n
            else:
                raise ExportError(f"Unexpected token '{key}' in {path}")
    except (IndexError, ValueError, TypeError) as exc:
        raise ExportError(f"Malformed VTK file {path}: {exc}") from exc
    if points is None or triangles is None:
        raise ExportError(f"{path} has no POINTS/POLYGONS section")
    return points, triangles, data


def write_vtk_mesh(mesh: SurfaceMesh, path: str | Path, point_data=None) -> Path:
    return write_vtk_polydata(mesh.vertices, mesh.triangles, path, point_data, title="isoflow reference mesh")
