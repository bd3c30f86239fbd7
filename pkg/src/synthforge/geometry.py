"""Mesh representation, primitive constructors and the two Algorithm-style modifiers.

Meshes are plain value objects: float64 vertex arrays plus faces stored as
tuples of vertex indices (triangles or quads). All operations here are pure;
identical inputs give bit-identical outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, ParameterError

DEGENERATE_FACE_AREA = 1e-12

PRIMITIVE_KINDS = ("cube", "sphere", "cone", "cylinder", "torus")


class Tally:
    """Mutable warning counter an operation can report skips/flags into."""

    def __init__(self):
        self.count = 0

    def add(self, n: int = 1) -> None:
        self.count += n


@dataclass
class Mesh:
    """Indexed polygonal surface with optional per-vertex RGB albedo."""

    vertices: np.ndarray                      # (V, 3) float64
    faces: list                               # list of tuples of vertex indices
    albedo: Optional[np.ndarray] = None       # (V, 3) float64 in [0, 1]

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        if self.albedo is not None:
            self.albedo = np.asarray(self.albedo, dtype=np.float64).reshape(-1, 3)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def copy(self) -> "Mesh":
        return Mesh(
            self.vertices.copy(),
            [tuple(f) for f in self.faces],
            None if self.albedo is None else self.albedo.copy(),
        )

    def validate(self) -> None:
        """Raise ParameterError if any Mesh invariant is violated."""
        if not np.all(np.isfinite(self.vertices)):
            raise ParameterError("mesh has non-finite vertex coordinates")
        nv = len(self.vertices)
        if self.faces:
            padded, sizes = _padded_faces(self.faces)
            if sizes.min() < 3:
                raise ParameterError("every face needs at least 3 vertices")
            if padded.min() < 0 or padded.max() >= nv:
                raise ParameterError(f"face index out of range (V={nv})")
            srt = np.sort(padded, axis=1)
            distinct = 1 + (np.diff(srt, axis=1) != 0).sum(axis=1)
            if distinct.min() < 3:
                bad = self.faces[int(np.argmin(distinct))]
                raise ParameterError(f"face {bad} has fewer than 3 distinct vertices")
        if self.albedo is not None:
            if len(self.albedo) != nv:
                raise ParameterError("albedo length does not match vertex count")
            if len(self.albedo) and (self.albedo.min() < 0.0 or self.albedo.max() > 1.0):
                raise ParameterError("albedo channel outside [0, 1]")


def empty_mesh() -> Mesh:
    return Mesh(np.zeros((0, 3)), [])


@dataclass
class Aabb:
    """Axis-aligned bounding box."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if np.any(self.lo > self.hi):
            raise ParameterError("Aabb min exceeds max")

    @property
    def extents(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def max_extent(self) -> float:
        return float(self.extents.max())

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extents))

    def inflate(self, amount: float) -> "Aabb":
        return Aabb(self.lo - amount, self.hi + amount)

    def contains(self, other: "Aabb", tol: float = 1e-9) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))


# Required size / tessellation keys per primitive kind.
_SIZE_KEYS = {
    "cube": ("edge",),
    "sphere": ("radius",),
    "cone": ("radius", "height"),
    "cylinder": ("radius", "height"),
    "torus": ("major_radius", "tube_radius"),
}
_SEGMENT_KEYS = {
    "cube": (),
    "sphere": ("segments", "rings"),
    "cone": ("segments",),
    "cylinder": ("segments",),
    "torus": ("major_segments", "minor_segments"),
}


@dataclass
class PrimitiveSpec:
    """One primitive instance: kind, sizes, tessellation and placement.

    Rotation is a unit quaternion (w, x, y, z); the placement transform is
    translate(rotate(scale * v)).
    """

    kind: str
    params: dict
    segments: dict = field(default_factory=dict)
    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (1.0, 0.0, 0.0, 0.0)
    scale: float = 1.0

    def validate(self) -> None:
        if self.kind not in PRIMITIVE_KINDS:
            raise ParameterError(f"unknown primitive kind {self.kind!r}")
        for key in _SIZE_KEYS[self.kind]:
            val = self.params.get(key)
            if val is None or val <= 0:
                raise ParameterError(f"{self.kind}: size parameter {key!r} must be > 0")
        for key in _SEGMENT_KEYS[self.kind]:
            val = self.segments.get(key)
            if val is None or val < 3:
                raise ParameterError(f"{self.kind}: segment count {key!r} must be >= 3")
        if self.kind == "torus" and self.params["tube_radius"] >= self.params["major_radius"]:
            raise ParameterError("torus: tube radius must be smaller than major radius")
        if self.scale <= 0:
            raise ParameterError("placement scale must be > 0")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "segments": dict(self.segments),
            "translation": list(self.translation),
            "rotation": list(self.rotation),
            "scale": self.scale,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PrimitiveSpec":
        return cls(
            kind=d["kind"],
            params=dict(d["params"]),
            segments=dict(d["segments"]),
            translation=tuple(d["translation"]),
            rotation=tuple(d["rotation"]),
            scale=float(d["scale"]),
        )


@dataclass
class ModifierSpec:
    """Either Wireframe(thickness) or Subdivide(levels)."""

    kind: str                      # "wireframe" | "subdivide"
    thickness: Optional[float] = None
    levels: Optional[int] = None

    def validate(self) -> None:
        if self.kind == "wireframe":
            if self.thickness is None or self.thickness <= 0:
                raise ParameterError("wireframe thickness must be > 0")
        elif self.kind == "subdivide":
            if self.levels is None or not 1 <= self.levels <= 3:
                raise ParameterError("subdivide levels must be in 1..3")
        else:
            raise ParameterError(f"unknown modifier {self.kind!r}")

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.thickness is not None:
            d["thickness"] = self.thickness
        if self.levels is not None:
            d["levels"] = self.levels
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModifierSpec":
        return cls(kind=d["kind"], thickness=d.get("thickness"), levels=d.get("levels"))


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    """Rotation matrix from a quaternion (w, x, y, z); normalizes defensively."""
    w, x, y, z = q
    n = np.sqrt(w * w + x * x + y * y + z * z)
    if n < 1e-12:
        raise ParameterError("zero quaternion")
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


# ---------------------------------------------------------------------------
# Primitive constructors (canonical orientation: y is up, centered at origin)
# ---------------------------------------------------------------------------

def _cube(edge: float):
    h = edge / 2.0
    verts = np.array([
        [-h, -h, -h], [h, -h, -h], [h, h, -h], [-h, h, -h],
        [-h, -h, h], [h, -h, h], [h, h, h], [-h, h, h],
    ])
    faces = [
        (0, 3, 2, 1), (4, 5, 6, 7),          # back, front
        (0, 1, 5, 4), (2, 3, 7, 6),          # bottom, top
        (1, 2, 6, 5), (0, 4, 7, 3),          # right, left
    ]
    return verts, faces


def _uv_sphere(radius: float, segments: int, rings: int):
    """UV sphere: `rings` latitude bands, `segments` longitude slices."""
    verts = [np.array([0.0, radius, 0.0])]
    for i in range(1, rings):
        theta = np.pi * i / rings
        y = radius * np.cos(theta)
        r = radius * np.sin(theta)
        for j in range(segments):
            phi = 2.0 * np.pi * j / segments
            verts.append(np.array([r * np.sin(phi), y, r * np.cos(phi)]))
    verts.append(np.array([0.0, -radius, 0.0]))
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * segments + (j % segments)

    faces = []
    for j in range(segments):
        faces.append((0, ring(1, j), ring(1, j + 1)))
    for i in range(1, rings - 1):
        for j in range(segments):
            faces.append((ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1)))
    for j in range(segments):
        faces.append((south, ring(rings - 1, j + 1), ring(rings - 1, j)))
    return np.array(verts), faces


def _circle(radius: float, y: float, segments: int) -> np.ndarray:
    phi = 2.0 * np.pi * np.arange(segments) / segments
    return np.column_stack([radius * np.sin(phi), np.full(segments, y), radius * np.cos(phi)])


def _cone(radius: float, height: float, segments: int):
    base = _circle(radius, -height / 2.0, segments)
    verts = np.vstack([base, [[0.0, height / 2.0, 0.0]], [[0.0, -height / 2.0, 0.0]]])
    apex, center = segments, segments + 1
    faces = []
    for j in range(segments):
        faces.append((j, (j + 1) % segments, apex))
    for j in range(segments):
        faces.append((center, (j + 1) % segments, j))
    return verts, faces


def _cylinder(radius: float, height: float, segments: int):
    bot = _circle(radius, -height / 2.0, segments)
    top = _circle(radius, height / 2.0, segments)
    verts = np.vstack([bot, top, [[0.0, -height / 2.0, 0.0]], [[0.0, height / 2.0, 0.0]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for j in range(segments):
        jn = (j + 1) % segments
        faces.append((j, jn, segments + jn, segments + j))
    for j in range(segments):
        faces.append((cb, (j + 1) % segments, j))
    for j in range(segments):
        faces.append((ct, segments + j, segments + (j + 1) % segments))
    return verts, faces


def _torus(major_radius: float, tube_radius: float, major_segments: int, minor_segments: int):
    verts = np.zeros((major_segments * minor_segments, 3))
    for i in range(major_segments):
        phi = 2.0 * np.pi * i / major_segments
        for j in range(minor_segments):
            psi = 2.0 * np.pi * j / minor_segments
            r = major_radius + tube_radius * np.cos(psi)
            verts[i * minor_segments + j] = [r * np.sin(phi), tube_radius * np.sin(psi), r * np.cos(phi)]

    def vid(i, j):
        return (i % major_segments) * minor_segments + (j % minor_segments)

    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
    return verts, faces


def make_primitive(spec: PrimitiveSpec) -> Mesh:
    """Build a tessellated primitive and apply its placement transform."""
    spec.validate()
    p, s = spec.params, spec.segments
    if spec.kind == "cube":
        verts, faces = _cube(p["edge"])
    elif spec.kind == "sphere":
        verts, faces = _uv_sphere(p["radius"], s["segments"], s["rings"])
    elif spec.kind == "cone":
        verts, faces = _cone(p["radius"], p["height"], s["segments"])
    elif spec.kind == "cylinder":
        verts, faces = _cylinder(p["radius"], p["height"], s["segments"])
    else:
        verts, faces = _torus(p["major_radius"], p["tube_radius"],
                              s["major_segments"], s["minor_segments"])
    rot = quat_to_matrix(spec.rotation)
    verts = (spec.scale * verts) @ rot.T + np.asarray(spec.translation, dtype=np.float64)
    return Mesh(verts, faces)


# ---------------------------------------------------------------------------
# Shared face/edge indexing helpers
# ---------------------------------------------------------------------------

def _padded_faces(faces: list):
    """Faces as a (F, max_size) index array, short faces repeating their last
    vertex; returns (padded, sizes)."""
    nf = len(faces)
    sizes = np.fromiter((len(f) for f in faces), dtype=np.int64, count=nf)
    width = int(sizes.max()) if nf else 0
    padded = np.empty((nf, width), dtype=np.int64)
    for i, f in enumerate(faces):
        k = len(f)
        padded[i, :k] = f
        if k < width:
            padded[i, k:] = f[k - 1]
    return padded, sizes


def _corner_arrays(faces: list):
    """Flatten faces into corner arrays: (corner vertex ids, face sizes, face id per corner)."""
    sizes = np.array([len(f) for f in faces], dtype=np.int64)
    corners = np.fromiter((v for f in faces for v in f), dtype=np.int64, count=int(sizes.sum()))
    face_of = np.repeat(np.arange(len(faces), dtype=np.int64), sizes)
    return corners, sizes, face_of


def _cycle_next(corners: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Index of the next corner within each face cycle."""
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    base = np.repeat(offsets, sizes)
    local = np.arange(len(corners), dtype=np.int64) - base
    return base + (local + 1) % np.repeat(sizes, sizes)


def unique_edges(mesh: Mesh) -> np.ndarray:
    """Unique undirected edges as an (E, 2) index array (sorted pairs)."""
    if not mesh.faces:
        return np.zeros((0, 2), dtype=np.int64)
    corners, sizes, _ = _corner_arrays(mesh.faces)
    nxt = _cycle_next(corners, sizes)
    a = np.minimum(corners, corners[nxt])
    b = np.maximum(corners, corners[nxt])
    nv = len(mesh.vertices)
    keys = np.unique(a * nv + b)
    return np.column_stack([keys // nv, keys % nv])


# ---------------------------------------------------------------------------
# Modifiers
# ---------------------------------------------------------------------------

def apply_wireframe(mesh: Mesh, thickness: float, tally: Optional[Tally] = None) -> Mesh:
    """Replace every unique edge with a capless square prism of side `thickness`.

    Input faces are discarded; degenerate edges (coincident endpoints) are
    skipped and counted into `tally`.
    """
    mesh.validate()
    if thickness <= 0:
        raise ParameterError("wireframe thickness must be > 0")
    edges = unique_edges(mesh)
    if len(edges) == 0:
        return empty_mesh()

    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    d = b - a
    length = np.linalg.norm(d, axis=1)
    keep = length > 1e-12
    if tally is not None:
        tally.add(int((~keep).sum()))
    if not keep.any():
        return empty_mesh()
    a, b, d, length = a[keep], b[keep], d[keep], length[keep]
    d = d / length[:, None]

    # Frame perpendicular to each edge: reference axis = least-aligned coordinate axis.
    ref = np.zeros_like(d)
    ref[np.arange(len(d)), np.argmin(np.abs(d), axis=1)] = 1.0
    u = np.cross(d, ref)
    u /= np.linalg.norm(u, axis=1)[:, None]
    w = np.cross(d, u)

    h = thickness / 2.0
    offsets = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    corners = []
    for end in (a, b):
        for su, sw in offsets:
            corners.append(end + su * h * u + sw * h * w)
    # Layout per edge k: A-corners at 8k..8k+3, B-corners at 8k+4..8k+7.
    verts = np.stack(corners, axis=1).reshape(-1, 3)

    k = np.arange(len(a), dtype=np.int64)[:, None] * 8
    quads = []
    for i in range(4):
        j = (i + 1) % 4
        quads.append(np.column_stack([k + i, k + 4 + i, k + 4 + j, k + j]).reshape(len(a), 4))
    faces_arr = np.stack(quads, axis=1).reshape(-1, 4)
    return Mesh(verts, [tuple(f) for f in faces_arr.tolist()])


def apply_subdivide(mesh: Mesh, levels: int, tally: Optional[Tally] = None) -> Mesh:
    """Catmull-Clark subdivision applied `levels` times; output is all quads.

    Boundary edges use midpoint rules; non-manifold edges (more than two
    incident faces) also fall back to boundary rules and are counted into
    `tally`.
    """
    mesh.validate()
    if levels < 1:
        raise ParameterError("subdivision levels must be >= 1")
    for f in mesh.faces:
        if len(f) > 4:
            raise ParameterError("subdivision input must be triangles or quads")
    out = mesh
    for _ in range(levels):
        out = _catmull_clark_once(out, tally)
    return out


def _catmull_clark_once(mesh: Mesh, tally: Optional[Tally]) -> Mesh:
    if not mesh.faces:
        return mesh.copy()

    # Carry albedo through the same averaging as positions.
    has_albedo = mesh.albedo is not None
    P = np.hstack([mesh.vertices, mesh.albedo]) if has_albedo else mesh.vertices
    nv = len(P)
    nf = len(mesh.faces)

    corners, sizes, face_of = _corner_arrays(mesh.faces)
    nxt = _cycle_next(corners, sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    base = np.repeat(offsets, sizes)
    local = np.arange(len(corners), dtype=np.int64) - base
    prv = base + (local - 1) % np.repeat(sizes, sizes)

    # Face points: centroid of each face.
    fp = np.zeros((nf, P.shape[1]))
    np.add.at(fp, face_of, P[corners])
    fp /= sizes[:, None]

    # Unique edges with corner -> edge mapping.
    ea_dir = np.minimum(corners, corners[nxt])
    eb_dir = np.maximum(corners, corners[nxt])
    keys = ea_dir * nv + eb_dir
    uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
    ne = len(uniq)
    ea, eb = uniq // nv, uniq % nv
    mid = (P[ea] + P[eb]) / 2.0

    interior = counts == 2
    if tally is not None:
        tally.add(int((counts > 2).sum()))

    # Edge points: interior = average of endpoints and the two face points.
    fp_sum = np.zeros((ne, P.shape[1]))
    np.add.at(fp_sum, inv, fp[face_of])
    ep = mid.copy()
    ep[interior] = (P[ea[interior]] + P[eb[interior]] + fp_sum[interior]) / 4.0

    # Vertex points.
    q_sum = np.zeros((nv, P.shape[1]))
    np.add.at(q_sum, corners, fp[face_of])
    nf_v = np.zeros(nv)
    np.add.at(nf_v, corners, 1.0)

    r_sum = np.zeros((nv, P.shape[1]))
    np.add.at(r_sum, ea, mid)
    np.add.at(r_sum, eb, mid)
    ne_v = np.zeros(nv)
    np.add.at(ne_v, ea, 1.0)
    np.add.at(ne_v, eb, 1.0)

    bmid_sum = np.zeros((nv, P.shape[1]))
    nb_v = np.zeros(nv)
    bdry = ~interior
    np.add.at(bmid_sum, ea[bdry], mid[bdry])
    np.add.at(bmid_sum, eb[bdry], mid[bdry])
    np.add.at(nb_v, ea[bdry], 1.0)
    np.add.at(nb_v, eb[bdry], 1.0)

    vp = P.copy()
    interior_v = (nb_v == 0) & (ne_v > 0)
    n = ne_v[interior_v][:, None]
    q = q_sum[interior_v] / np.maximum(nf_v[interior_v], 1.0)[:, None]
    r = r_sum[interior_v] / n
    vp[interior_v] = (q + 2.0 * r + (n - 3.0) * P[interior_v]) / n
    crease_v = nb_v == 2
    vp[crease_v] = (bmid_sum[crease_v] + 6.0 * P[crease_v]) / 8.0
    # Vertices with 1 or >2 boundary edges stay fixed (corner rule).

    new_pts = np.vstack([vp, fp, ep])
    vertices = new_pts[:, :3]
    albedo = np.clip(new_pts[:, 3:], 0.0, 1.0) if has_albedo else None

    # One quad per input face corner: vertex, next-edge point, face point, prev-edge point.
    fquads = np.column_stack([
        corners,
        nv + nf + inv,
        nv + face_of,
        nv + nf + inv[prv],
    ])
    return Mesh(vertices, [tuple(f) for f in fquads.tolist()], albedo)


# ---------------------------------------------------------------------------
# Queries and assembly
# ---------------------------------------------------------------------------

def _face_areas(mesh: Mesh) -> np.ndarray:
    """Fan-decomposed face areas; padded repeat vertices contribute zero."""
    padded, _ = _padded_faces(mesh.faces)
    v0 = mesh.vertices[padded[:, 0]]
    areas = np.zeros(len(mesh.faces))
    for k in range(1, padded.shape[1] - 1):
        e1 = mesh.vertices[padded[:, k]] - v0
        e2 = mesh.vertices[padded[:, k + 1]] - v0
        areas += 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    return areas


def merge(meshes: Sequence[Mesh], tally: Optional[Tally] = None) -> Mesh:
    """Concatenate meshes, shifting face indices; drop near-zero-area faces.

    Albedo is kept only when every input mesh carries it.
    """
    meshes = [m for m in meshes]
    if not meshes:
        return empty_mesh()
    for m in meshes:
        m.validate()

    keep_albedo = all(m.albedo is not None for m in meshes)
    verts = np.vstack([m.vertices for m in meshes]) if meshes else np.zeros((0, 3))
    faces = []
    offset = 0
    for m in meshes:
        for f in m.faces:
            faces.append(tuple(idx + offset for idx in f))
        offset += len(m.vertices)
    albedo = np.vstack([m.albedo for m in meshes]) if keep_albedo else None

    merged = Mesh(verts, faces, albedo)
    if faces:
        areas = _face_areas(merged)
        good = areas >= DEGENERATE_FACE_AREA
        if not good.all():
            if tally is not None:
                tally.add(int((~good).sum()))
            merged = Mesh(verts, [f for f, g in zip(faces, good) if g], albedo)
    return merged


def bounding_box(mesh: Mesh) -> Aabb:
    if mesh.is_empty():
        raise EmptyInputError("bounding box of an empty mesh")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


def mesh_center_and_radius(mesh: Mesh):
    """Bounding-sphere approximation used by camera framing."""
    box = bounding_box(mesh)
    if box.diagonal == 0.0:
        raise DegenerateInputError("mesh bounding box has zero diagonal")
    return box.center, box.diagonal / 2.0
