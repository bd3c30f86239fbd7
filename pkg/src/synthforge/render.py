"""Deterministic software rasterizer.

Meshes are rendered under sampled camera poses and directional Lambert
illumination, with optional anisotropic scaling along one axis. Flat mode
removes all 3D variation: a canonical pose, orientation-independent shading,
and only 2D augmentation (in-plane rotation and translation jitter) left to
vary. The pixel loop is plain arithmetic so identical jobs rasterize to
bit-identical images anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .geometry import Mesh, mesh_center_and_radius
from .rng import RngStream

LUMA = (0.299, 0.587, 0.114)

FLAT_AZIMUTH = 30.0
FLAT_ELEVATION = 20.0
FLAT_ILLUM = {"direction": (0.0, 1.0, 0.0), "k_d": 0.7, "k_a": 0.1}

FRAME_FILL = 0.8        # bounding sphere subtends this fraction of the vertical fov

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class CameraPose:
    azimuth_deg: float
    elevation_deg: float
    distance: float
    fov_deg: float = 40.0

    def validate(self) -> None:
        if self.distance <= 0:
            raise ParameterError("camera distance must be > 0")
        if not 0.0 < self.fov_deg < 180.0:
            raise ParameterError("vertical fov must be in (0, 180)")

    def to_json(self) -> dict:
        return {"azimuth_deg": self.azimuth_deg, "elevation_deg": self.elevation_deg,
                "distance": self.distance, "fov_deg": self.fov_deg}

    @classmethod
    def from_json(cls, d: dict) -> "CameraPose":
        return cls(d["azimuth_deg"], d["elevation_deg"], d["distance"], d["fov_deg"])


@dataclass
class Illumination:
    direction: tuple            # unit vector pointing toward the light
    k_d: float
    k_a: float

    def validate(self) -> None:
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-6:
            raise ParameterError("light direction must be a unit vector")
        if not (0.0 <= self.k_d <= 1.0 and 0.0 <= self.k_a <= 1.0):
            raise ParameterError("intensities must be within [0, 1]")
        if self.k_a + self.k_d > 1.0 + 1e-9:
            raise ParameterError("k_a + k_d must not exceed 1")

    def to_json(self) -> dict:
        return {"direction": list(self.direction), "k_d": self.k_d, "k_a": self.k_a}

    @classmethod
    def from_json(cls, d: dict) -> "Illumination":
        return cls(tuple(d["direction"]), d["k_d"], d["k_a"])


@dataclass
class RenderJob:
    """Everything needed to produce one image of one mesh."""

    mesh_ref: str
    pose: CameraPose
    illumination: Illumination
    aniso: Optional[tuple] = None          # ("x"|"y"|"z", factor)
    resolution: int = 256
    color_mode: str = "gray"               # "gray" | "rgb"
    flat: bool = False
    rot2d_deg: float = 0.0
    jitter_frac: tuple = (0.0, 0.0)
    auto_frame: bool = True

    def validate(self) -> None:
        self.pose.validate()
        self.illumination.validate()
        if self.aniso is not None:
            axis, factor = self.aniso
            if axis not in _AXES:
                raise ParameterError(f"unknown scale axis {axis!r}")
            if factor <= 0:
                raise ParameterError("anisotropic scale factor must be > 0")
        if self.resolution < 32:
            raise ParameterError("resolution must be >= 32")
        if self.color_mode not in ("gray", "rgb"):
            raise ParameterError("color mode must be gray or rgb")

    def to_json(self) -> dict:
        return {
            "mesh_ref": self.mesh_ref,
            "pose": self.pose.to_json(),
            "illumination": self.illumination.to_json(),
            "aniso": None if self.aniso is None else [self.aniso[0], self.aniso[1]],
            "resolution": self.resolution,
            "color_mode": self.color_mode,
            "flat": self.flat,
            "rot2d_deg": self.rot2d_deg,
            "jitter_frac": list(self.jitter_frac),
            "auto_frame": self.auto_frame,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RenderJob":
        return cls(
            mesh_ref=d["mesh_ref"],
            pose=CameraPose.from_json(d["pose"]),
            illumination=Illumination.from_json(d["illumination"]),
            aniso=None if d["aniso"] is None else (d["aniso"][0], float(d["aniso"][1])),
            resolution=d["resolution"],
            color_mode=d["color_mode"],
            flat=d["flat"],
            rot2d_deg=d["rot2d_deg"],
            jitter_frac=tuple(d["jitter_frac"]),
            auto_frame=d["auto_frame"],
        )


@dataclass
class RenderedImage:
    pixels: np.ndarray          # (res, res) or (res, res, 3) uint8
    job: RenderJob
    coverage: np.ndarray        # (res, res) bool: pixels any triangle wrote

    @property
    def foreground_count(self) -> int:
        return int(self.coverage.sum())


@dataclass
class Camera:
    position: np.ndarray
    rotation: np.ndarray        # world -> view, rows (right, up, back)
    fov_deg: float

    @property
    def matrix(self) -> np.ndarray:
        """Combined perspective transform (projection @ view), 4x4."""
        view = np.eye(4)
        view[:3, :3] = self.rotation
        view[:3, 3] = -self.rotation @ self.position
        f = 1.0 / np.tan(np.deg2rad(self.fov_deg) / 2.0)
        near, far = 0.01, 1000.0
        proj = np.zeros((4, 4))
        proj[0, 0] = f
        proj[1, 1] = f
        proj[2, 2] = (far + near) / (near - far)
        proj[2, 3] = 2 * far * near / (near - far)
        proj[3, 2] = -1.0
        return proj @ view


def _camera_at(center: np.ndarray, azimuth_deg: float, elevation_deg: float,
               distance: float, fov_deg: float) -> Camera:
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    direction = np.array([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])
    position = center + distance * direction
    forward = center - position
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right = right / np.linalg.norm(right)
    true_up = np.cross(right, forward)
    rotation = np.stack([right, true_up, -forward])
    return Camera(position, rotation, fov_deg)


def frame_camera(mesh: Mesh, pose: CameraPose) -> Camera:
    """Aim at the mesh center, rescaling distance so the bounding sphere
    subtends FRAME_FILL of the vertical field of view."""
    pose.validate()
    center, radius = mesh_center_and_radius(mesh)   # raises on zero diagonal
    half_fov = np.deg2rad(pose.fov_deg) / 2.0
    distance = radius / np.sin(FRAME_FILL * half_fov)
    return _camera_at(center, pose.azimuth_deg, pose.elevation_deg, distance, pose.fov_deg)


def _face_colors(mesh: Mesh, color_mode: str) -> np.ndarray:
    """Mean vertex albedo per face; (F, 3) for rgb, (F, 1) luminance for gray.

    Meshes without albedo shade at exactly 1.0 (no luminance rounding)."""
    nf = len(mesh.faces)
    if mesh.albedo is None:
        return np.ones((nf, 1)) if color_mode == "gray" else np.ones((nf, 3))
    rgb = np.array([mesh.albedo[list(f)].mean(axis=0) for f in mesh.faces])
    if color_mode == "gray":
        return (rgb @ np.array(LUMA))[:, None]
    return rgb


def rasterize(job: RenderJob, mesh: Mesh) -> RenderedImage:
    """Z-buffered perspective render of one job.

    Shading is flat per triangle: albedo x clamp(k_a + k_d * max(0, n.l), 0, 1)
    with the face normal oriented toward the camera (double-sided). Flat mode
    uses the canonical pose and drops the n.l term entirely.
    """
    job.validate()
    mesh.validate()
    res = job.resolution

    verts = mesh.vertices
    if job.aniso is not None:
        axis, factor = job.aniso
        verts = verts.copy()
        verts[:, _AXES[axis]] *= factor
    world = Mesh(verts, mesh.faces, mesh.albedo)

    pose = job.pose
    if job.flat:
        pose = CameraPose(FLAT_AZIMUTH, FLAT_ELEVATION, pose.distance, pose.fov_deg)
    if job.auto_frame:
        cam = frame_camera(world, pose)
    else:
        center, _ = mesh_center_and_radius(world)
        cam = _camera_at(center, pose.azimuth_deg, pose.elevation_deg,
                         pose.distance, pose.fov_deg)

    channels = 1 if job.color_mode == "gray" else 3
    image = np.zeros((res, res) if channels == 1 else (res, res, 3), dtype=np.uint8)
    if not world.faces:
        return RenderedImage(image, job, np.zeros((res, res), dtype=bool))

    view = (world.vertices - cam.position) @ cam.rotation.T
    depth = -view[:, 2]
    f_scale = 1.0 / np.tan(np.deg2rad(pose.fov_deg) / 2.0)
    safe = np.maximum(depth, 1e-12)
    sx = (f_scale * view[:, 0] / safe + 1.0) * res / 2.0
    sy = (1.0 - f_scale * view[:, 1] / safe) * res / 2.0

    if job.rot2d_deg != 0.0 or job.jitter_frac != (0.0, 0.0):
        t = np.deg2rad(job.rot2d_deg)
        c, s = np.cos(t), np.sin(t)
        cx = cy = res / 2.0
        rx = c * (sx - cx) - s * (sy - cy) + cx + job.jitter_frac[0] * res
        ry = s * (sx - cx) + c * (sy - cy) + cy + job.jitter_frac[1] * res
        sx, sy = rx, ry

    inv_depth = 1.0 / safe

    # Fan-triangulate, remembering the source face for its albedo.
    tris = []
    tri_face = []
    for fi, face in enumerate(world.faces):
        for k in range(1, len(face) - 1):
            tris.append((face[0], face[k], face[k + 1]))
            tri_face.append(fi)
    tris = np.array(tris, dtype=np.int64)
    tri_face = np.array(tri_face, dtype=np.int64)

    colors = _face_colors(world, job.color_mode)

    v0w = world.vertices[tris[:, 0]]
    normals = np.cross(world.vertices[tris[:, 1]] - v0w, world.vertices[tris[:, 2]] - v0w)
    norm_len = np.linalg.norm(normals, axis=1)
    centroids = (v0w + world.vertices[tris[:, 1]] + world.vertices[tris[:, 2]]) / 3.0

    if job.flat:
        shade = np.full(len(tris), min(job.illumination.k_a + job.illumination.k_d, 1.0))
    else:
        ok = norm_len > 1e-15
        n = np.where(ok[:, None], normals / np.maximum(norm_len, 1e-30)[:, None], 0.0)
        to_cam = cam.position - centroids
        flip = (n * to_cam).sum(axis=1) < 0.0
        n[flip] *= -1.0
        light = np.asarray(job.illumination.direction, dtype=np.float64)
        lambert = np.maximum((n * light).sum(axis=1), 0.0)
        shade = np.clip(job.illumination.k_a + job.illumination.k_d * lambert, 0.0, 1.0)

    tri_colors = np.rint(colors[tri_face] * shade[:, None] * 255.0).astype(np.uint8)

    winner = _resolve_visibility(tris, sx, sy, inv_depth, depth, res)
    covered = winner >= 0
    coverage = covered.reshape(res, res)
    flat = image.reshape(res * res, channels)
    flat[covered] = tri_colors[winner[covered]]
    image = flat.reshape((res, res) if channels == 1 else (res, res, 3))
    return RenderedImage(image, job, coverage)


_CHUNK_CANDIDATES = 4_000_000


def _resolve_visibility(tris, sx, sy, inv_depth, depth, res):
    """Z-buffer resolve over all triangles at once.

    Returns, per pixel (flattened), the index of the visible triangle or -1.
    Every candidate pixel inside a triangle competes on screen-interpolated
    inverse depth; exact depth ties go to the lowest triangle index, matching
    sequential first-write-wins order.
    """
    front = np.nonzero(depth[tris].min(axis=1) > 1e-9)[0]
    winner = np.full(res * res, -1, dtype=np.int64)
    if len(front) == 0:
        return winner

    x = sx[tris[front]]        # (T, 3)
    y = sy[tris[front]]
    denom = (y[:, 1] - y[:, 2]) * (x[:, 0] - x[:, 2]) + \
            (x[:, 2] - x[:, 1]) * (y[:, 0] - y[:, 2])
    xa = np.clip(np.floor(x.min(axis=1)), 0, res).astype(np.int64)
    xb = np.clip(np.ceil(x.max(axis=1)) + 1, 0, res).astype(np.int64)
    ya = np.clip(np.floor(y.min(axis=1)), 0, res).astype(np.int64)
    yb = np.clip(np.ceil(y.max(axis=1)) + 1, 0, res).astype(np.int64)
    usable = (np.abs(denom) >= 1e-12) & (xb > xa) & (yb > ya)
    front, x, y, denom = front[usable], x[usable], y[usable], denom[usable]
    xa, xb, ya, yb = xa[usable], xb[usable], ya[usable], yb[usable]
    if len(front) == 0:
        return winner

    widths = xb - xa
    counts = widths * (yb - ya)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    iz_v = inv_depth[tris[front]]

    zbuf = np.zeros(res * res)
    pix_parts, iz_parts, tri_parts = [], [], []

    start_tri = 0
    while start_tri < len(front):
        end_tri = start_tri
        while end_tri < len(front) and \
                bounds[end_tri + 1] - bounds[start_tri] <= _CHUNK_CANDIDATES:
            end_tri += 1
        end_tri = max(end_tri, start_tri + 1)
        sel = slice(start_tri, end_tri)
        n = counts[sel]
        local = np.repeat(np.arange(start_tri, end_tri), n)
        offs = np.arange(int(n.sum())) - (bounds[start_tri:end_tri] - bounds[start_tri])[local - start_tri]
        pxi = xa[local] + offs % widths[local]
        pyi = ya[local] + offs // widths[local]
        px = pxi + 0.5
        py = pyi + 0.5

        l0 = ((y[local, 1] - y[local, 2]) * (px - x[local, 2])
              + (x[local, 2] - x[local, 1]) * (py - y[local, 2])) / denom[local]
        l1 = ((y[local, 2] - y[local, 0]) * (px - x[local, 2])
              + (x[local, 0] - x[local, 2]) * (py - y[local, 2])) / denom[local]
        l2 = 1.0 - l0 - l1
        inside = (l0 >= 0.0) & (l1 >= 0.0) & (l2 >= 0.0)
        if inside.any():
            iz = (l0 * iz_v[local, 0] + l1 * iz_v[local, 1] + l2 * iz_v[local, 2])[inside]
            pix = (pyi * res + pxi)[inside]
            np.maximum.at(zbuf, pix, iz)
            pix_parts.append(pix)
            iz_parts.append(iz)
            tri_parts.append(front[local[inside]])
        start_tri = end_tri

    if not pix_parts:
        return winner
    pix = np.concatenate(pix_parts)
    iz = np.concatenate(iz_parts)
    tri = np.concatenate(tri_parts)
    wins = iz == zbuf[pix]
    sentinel = np.full(res * res, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(sentinel, pix[wins], tri[wins])
    hit = sentinel != np.iinfo(np.int64).max
    winner[hit] = sentinel[hit]
    return winner


def sample_render_plan(
    class_seed: int,
    images_per_class: int,
    flat: bool,
    resolution: int = 256,
    color_mode: str = "gray",
    fov_deg: float = 40.0,
    elevation_range: tuple = (-30.0, 60.0),
    kd_range: tuple = (0.5, 0.9),
    k_a: float = 0.1,
    aniso_mode: str = "uniform-range",
    jitter_max: float = 0.05,
):
    """Deterministic render plan for one class.

    Non-flat jobs vary pose, light and anisotropic scale; flat jobs share the
    canonical pose and fixed illumination, differing only in the 2D
    augmentation parameters.
    """
    if images_per_class < 1:
        raise ParameterError("images_per_class must be >= 1")
    if aniso_mode not in ("uniform-range", "factor2"):
        raise ParameterError("aniso_mode must be uniform-range or factor2")
    rng = RngStream(class_seed, 0)
    jobs = []
    for _ in range(images_per_class):
        if flat:
            rot = float(rng.uniform(0.0, 360.0))
            jx = float(rng.uniform(-jitter_max, jitter_max))
            jy = float(rng.uniform(-jitter_max, jitter_max))
            jobs.append(RenderJob(
                mesh_ref="",
                pose=CameraPose(FLAT_AZIMUTH, FLAT_ELEVATION, 1.0, fov_deg),
                illumination=Illumination(**FLAT_ILLUM),
                aniso=None,
                resolution=resolution,
                color_mode=color_mode,
                flat=True,
                rot2d_deg=rot,
                jitter_frac=(jx, jy),
            ))
            continue
        azimuth = float(rng.uniform(0.0, 360.0))
        elevation = float(rng.uniform(*elevation_range))
        y = float(rng.uniform(0.0, 1.0))
        phi = float(rng.uniform(0.0, 2.0 * np.pi))
        r = float(np.sqrt(max(1.0 - y * y, 0.0)))
        direction = (r * np.cos(phi), y, r * np.sin(phi))
        k_d = float(rng.uniform(*kd_range))
        aniso = None
        if float(rng.uniform()) < 0.5:
            axis = "xyz"[int(rng.integers(0, 2))]
            factor = 2.0 if aniso_mode == "factor2" else float(rng.uniform(0.5, 2.0))
            aniso = (axis, factor)
        jobs.append(RenderJob(
            mesh_ref="",
            pose=CameraPose(azimuth, elevation, 1.0, fov_deg),
            illumination=Illumination(direction, k_d, k_a),
            aniso=aniso,
            resolution=resolution,
            color_mode=color_mode,
            flat=False,
        ))
    return jobs
