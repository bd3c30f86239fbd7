"""Wavefront OBJ reader/writer (v/f records, optional per-vertex color).

The writer is deterministic: fixed 6-fractional-digit decimals, one vertex
per `v` record (6 components when albedo is present), 1-based `f` records.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParameterError
from .geometry import Mesh


def mesh_to_obj(mesh: Mesh) -> str:
    lines = []
    if mesh.albedo is not None:
        for (x, y, z), (r, g, b) in zip(mesh.vertices, mesh.albedo):
            lines.append(f"v {x:.6f} {y:.6f} {z:.6f} {r:.6f} {g:.6f} {b:.6f}")
    else:
        for x, y, z in mesh.vertices:
            lines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
    for f in mesh.faces:
        lines.append("f " + " ".join(str(i + 1) for i in f))
    return "\n".join(lines) + ("\n" if lines else "")


def write_obj(mesh: Mesh, path) -> None:
    Path(path).write_text(mesh_to_obj(mesh), encoding="ascii", newline="\n")


def obj_to_mesh(text: str) -> Mesh:
    verts, colors, faces = [], [], []
    for ln, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            vals = [float(t) for t in parts[1:]]
            if len(vals) not in (3, 6):
                raise ParameterError(f"line {ln}: v record needs 3 or 6 components")
            verts.append(vals[:3])
            colors.append(vals[3:] if len(vals) == 6 else None)
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                i = int(tok.split("/")[0])
                idx.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(tuple(idx))
        # Other record types (vn, vt, o, ...) are ignored.
    albedo = None
    if verts and all(c is not None for c in colors):
        albedo = np.array(colors, dtype=np.float64)
    mesh = Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3), faces, albedo)
    mesh.validate()
    return mesh


def read_obj(path) -> Mesh:
    return obj_to_mesh(Path(path).read_text(encoding="ascii"))
