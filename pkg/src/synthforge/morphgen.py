"""Gaussian-process shape and albedo deformation of base meshes.

A base mesh is downsampled by uniform-grid vertex clustering; smooth
displacement and color-offset fields are drawn from squared-exponential GP
priors over the cluster centroids (low-rank, via eigendecomposition of the
kernel matrix) and pushed back to full resolution through the cluster
correspondence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, EmptyInputError, NumericError, ParameterError
from .geometry import Mesh
from .rng import RngStream


@dataclass
class GpDeformParams:
    """Kernel magnitudes/bandwidths for the shape and albedo processes."""

    b_s: float = 50.0       # shape magnitude (scene units^2)
    c_s: float = 300.0      # shape bandwidth (squared scene units)
    b_a: float = 0.05       # albedo magnitude
    c_a: float = 0.2        # albedo bandwidth
    rank: int = 50
    downsample_target: int = 2000
    seed: int = 0

    def validate(self) -> None:
        for name in ("b_s", "c_s", "b_a", "c_a"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0")
        if self.rank < 1:
            raise ParameterError("rank must be >= 1")
        if self.downsample_target < 4:
            raise ParameterError("downsample_target must be >= 4")

    def to_json(self) -> dict:
        return {
            "b_s": self.b_s, "c_s": self.c_s, "b_a": self.b_a, "c_a": self.c_a,
            "rank": self.rank, "downsample_target": self.downsample_target,
            "seed": self.seed,
        }


@dataclass
class DeformationField:
    """One GP draw over a set of control vertices."""

    displacement: np.ndarray     # (N, 3)
    albedo_offset: np.ndarray    # (N, 3)
    control_points: np.ndarray   # (N, 3)

    def __len__(self) -> int:
        return len(self.control_points)


def downsample(mesh: Mesh, target: int):
    """Cluster vertices on a uniform grid until at most `target` remain.

    Returns (downsampled mesh, correspondence) where correspondence[i] is the
    cluster index of original vertex i. Meshes already at or under the target
    pass through unchanged with an identity map.
    """
    if mesh.is_empty():
        raise EmptyInputError("cannot downsample an empty mesh")
    if target < 4:
        raise ParameterError("downsample target must be >= 4")
    nv = len(mesh.vertices)
    if nv <= target:
        return mesh.copy(), np.arange(nv, dtype=np.int64)

    lo = mesh.vertices.min(axis=0)
    extent = mesh.vertices.max(axis=0) - lo
    extent = np.where(extent > 0, extent, 1.0)

    def cluster_keys(res: int) -> np.ndarray:
        cell = np.minimum((mesh.vertices - lo) / extent * res, res - 1).astype(np.int64)
        return (cell[:, 0] * res + cell[:, 1]) * res + cell[:, 2]

    # Finest grid whose occupied-cell count still fits the target.
    res = 1
    keys = cluster_keys(res)
    while res < 128:
        nxt = cluster_keys(res + 1)
        if len(np.unique(nxt)) > target:
            break
        res += 1
        keys = nxt

    uniq, corr = np.unique(keys, return_inverse=True)
    k = len(uniq)
    centroids = np.zeros((k, 3))
    np.add.at(centroids, corr, mesh.vertices)
    sizes = np.bincount(corr, minlength=k).astype(np.float64)
    centroids /= sizes[:, None]

    albedo = None
    if mesh.albedo is not None:
        albedo = np.zeros((k, 3))
        np.add.at(albedo, corr, mesh.albedo)
        albedo = np.clip(albedo / sizes[:, None], 0.0, 1.0)

    faces = []
    for f in mesh.faces:
        remapped = tuple(int(corr[i]) for i in f)
        if len(set(remapped)) >= 3:
            faces.append(remapped)
    return Mesh(centroids, faces, albedo), corr


def _gp_basis(points: np.ndarray, magnitude: float, bandwidth: float, rank: int):
    """Top-`rank` eigenpairs of k(x,x') = magnitude * exp(-|x-x'|^2 / bandwidth)."""
    sq = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    kernel = magnitude * np.exp(-sq / bandwidth)
    if not np.all(np.isfinite(kernel)):
        raise NumericError("kernel matrix has non-finite entries")
    eigvals, eigvecs = np.linalg.eigh(kernel)
    if not np.all(np.isfinite(eigvals)):
        raise NumericError("kernel eigendecomposition failed")
    order = np.argsort(eigvals)[::-1][: min(rank, len(points))]
    lam = np.clip(eigvals[order], 0.0, None)
    return eigvecs[:, order], np.sqrt(lam)


class GpSampler:
    """Caches the per-control-set eigenbases so many variants sample cheaply."""

    def __init__(self, control_points: np.ndarray, params: GpDeformParams):
        params.validate()
        control_points = np.asarray(control_points, dtype=np.float64).reshape(-1, 3)
        if len(control_points) < 4:
            raise ParameterError("need at least 4 control points")
        self.control_points = control_points
        self.params = params
        self._shape_phi, self._shape_scale = _gp_basis(
            control_points, params.b_s, params.c_s, params.rank)
        self._albedo_phi, self._albedo_scale = _gp_basis(
            control_points, params.b_a, params.c_a, params.rank)

    def truncated_variance(self) -> np.ndarray:
        """Exact per-point variance of each shape-displacement dimension."""
        return (self._shape_phi ** 2 * self._shape_scale ** 2).sum(axis=1)

    def captured_variance_fraction(self, magnitude: float, bandwidth: float, rank: int) -> float:
        """Sum of kept eigenvalues over the kernel trace, for a given rank."""
        phi, scale = _gp_basis(self.control_points, magnitude, bandwidth, rank)
        total = magnitude * len(self.control_points)   # trace: k(x,x) = magnitude
        return float((scale ** 2).sum() / total)

    def sample(self, variant_index: int) -> DeformationField:
        rng = RngStream(self.params.seed, variant_index)
        xi_s = rng.normal((self._shape_phi.shape[1], 3))
        xi_a = rng.normal((self._albedo_phi.shape[1], 3))
        disp = self._shape_phi @ (self._shape_scale[:, None] * xi_s)
        offset = self._albedo_phi @ (self._albedo_scale[:, None] * xi_a)
        return DeformationField(disp, offset, self.control_points)


def sample_deformation(control_points, params: GpDeformParams, variant_index: int) -> DeformationField:
    """Draw one deformation field; deterministic in (params.seed, variant_index)."""
    return GpSampler(control_points, params).sample(variant_index)


def apply_deformation(mesh: Mesh, field: DeformationField, correspondence: np.ndarray) -> Mesh:
    """Displace every vertex by its cluster's field value; clamp albedo to [0,1].

    Meshes without albedo start from mid-gray before the offset is added.
    """
    correspondence = np.asarray(correspondence, dtype=np.int64)
    if len(correspondence) != len(mesh.vertices):
        raise ContractViolationError("correspondence does not cover every vertex")
    if len(correspondence) and correspondence.max() >= len(field):
        raise ContractViolationError("correspondence points past the control set")
    verts = mesh.vertices + field.displacement[correspondence]
    base = mesh.albedo if mesh.albedo is not None else np.full((len(mesh.vertices), 3), 0.5)
    albedo = np.clip(base + field.albedo_offset[correspondence], 0.0, 1.0)
    return Mesh(verts, [tuple(f) for f in mesh.faces], albedo)


def generate_morph_db(base_meshes, params: GpDeformParams, variants_per_base: int):
    """Deform each base mesh `variants_per_base` times; each variant is a class.

    Class (i, j) uses base mesh i with the combined variant index
    i * variants_per_base + j, so every class is independently replayable.
    """
    params.validate()
    base_meshes = list(base_meshes)
    if not base_meshes:
        raise EmptyInputError("no base meshes")
    if variants_per_base < 1:
        raise ParameterError("variants_per_base must be >= 1")

    out = []
    for i, base in enumerate(base_meshes):
        down, corr = downsample(base, params.downsample_target)
        sampler = GpSampler(down.vertices, params)
        for j in range(variants_per_base):
            index = i * variants_per_base + j
            field = sampler.sample(index)
            out.append((f"{index:04d}", apply_deformation(base, field, corr)))
    return out
