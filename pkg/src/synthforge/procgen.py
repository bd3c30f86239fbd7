"""Procedural class-mesh generation.

Each class mesh is assembled from randomly parameterized primitives
(optionally wireframed or subdivided), merged, and accepted only when its
bounding box stays inside the quality-control limit. Every sampled value is
kept in a generation record so the mesh can be rebuilt without the RNG.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .errors import GenerationExhaustedError, ParameterError
from .geometry import (
    Mesh,
    ModifierSpec,
    PrimitiveSpec,
    Tally,
    apply_subdivide,
    apply_wireframe,
    bounding_box,
    make_primitive,
    merge,
)
from .rng import RngStream

MAX_CONSECUTIVE_REJECTIONS = 1000

# Fixed tessellation: moderate resolution keeps meshes renderable at speed.
TESSELLATION = {
    "cube": {},
    "sphere": {"segments": 24, "rings": 16},
    "cone": {"segments": 24},
    "cylinder": {"segments": 24},
    "torus": {"major_segments": 24, "minor_segments": 12},
}

PRIMITIVE_ORDER = ("cube", "sphere", "cone", "cylinder", "torus")


@dataclass
class ProcGenConfig:
    """Knobs of the generation loop; defaults follow the reference protocol."""

    n: int
    seed: int = 0
    v: int = 3                       # max outer repetitions
    w: int = 5                       # max instances per primitive type per repetition
    max_size: float = 10.0           # QC bound on the largest bounding-box extent
    translation_range: tuple = (-3.0, 3.0)
    scale_range: tuple = (0.3, 2.0)
    size_range: tuple = (0.5, 2.0)
    thickness_range: tuple = (0.02, 0.15)
    subdivide_levels: tuple = (1, 2)

    def validate(self) -> None:
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if self.v < 1 or self.w < 1:
            raise ParameterError("v and w must be >= 1")
        if self.max_size <= 0:
            raise ParameterError("max_size must be > 0")

    def to_json(self) -> dict:
        return {
            "n": self.n, "seed": self.seed, "v": self.v, "w": self.w,
            "max_size": self.max_size,
            "translation_range": list(self.translation_range),
            "scale_range": list(self.scale_range),
            "size_range": list(self.size_range),
            "thickness_range": list(self.thickness_range),
            "subdivide_levels": list(self.subdivide_levels),
        }


@dataclass
class InstanceRecord:
    repetition: int
    spec: PrimitiveSpec
    modifier: Optional[ModifierSpec]

    def to_json(self) -> dict:
        return {
            "repetition": self.repetition,
            "spec": self.spec.to_json(),
            "modifier": None if self.modifier is None else self.modifier.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "InstanceRecord":
        return cls(
            repetition=d["repetition"],
            spec=PrimitiveSpec.from_json(d["spec"]),
            modifier=None if d["modifier"] is None else ModifierSpec.from_json(d["modifier"]),
        )


@dataclass
class GenRecord:
    """Everything sampled while producing one accepted class mesh."""

    class_index: int
    seed: int
    p: int
    counts: list                      # per repetition: instance count per primitive type
    instances: list = field(default_factory=list)
    rejections: int = 0
    warnings: int = 0
    vertex_count: int = 0
    face_count: int = 0

    @property
    def class_id(self) -> str:
        return f"{self.class_index:04d}"

    def to_json(self) -> dict:
        return {
            "class_id": self.class_id,
            "class_index": self.class_index,
            "seed": self.seed,
            "p": self.p,
            "counts": self.counts,
            "instances": [inst.to_json() for inst in self.instances],
            "rejections": self.rejections,
            "warnings": self.warnings,
            "vertex_count": self.vertex_count,
            "face_count": self.face_count,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GenRecord":
        return cls(
            class_index=d["class_index"],
            seed=d["seed"],
            p=d["p"],
            counts=d["counts"],
            instances=[InstanceRecord.from_json(i) for i in d["instances"]],
            rejections=d["rejections"],
            warnings=d["warnings"],
            vertex_count=d["vertex_count"],
            face_count=d["face_count"],
        )


def _sample_primitive_spec(kind: str, rng: RngStream, config: ProcGenConfig) -> PrimitiveSpec:
    lo, hi = config.size_range
    if kind == "cube":
        params = {"edge": float(rng.uniform(lo, hi))}
    elif kind == "sphere":
        params = {"radius": float(rng.uniform(lo, hi))}
    elif kind in ("cone", "cylinder"):
        params = {"radius": float(rng.uniform(lo, hi)), "height": float(rng.uniform(lo, hi))}
    else:
        major = float(rng.uniform(lo, hi))
        params = {"major_radius": major, "tube_radius": major * float(rng.uniform(0.2, 0.45))}
    translation = tuple(float(t) for t in rng.uniform(*config.translation_range, size=3))
    # Uniform rotation on SO(3): normalized 4D Gaussian quaternion.
    q = rng.normal(4)
    q = q / (q ** 2).sum() ** 0.5
    scale = float(rng.uniform(*config.scale_range))
    return PrimitiveSpec(
        kind=kind,
        params=params,
        segments=dict(TESSELLATION[kind]),
        translation=translation,
        rotation=tuple(float(c) for c in q),
        scale=scale,
    )


def _sample_modifier(rng: RngStream, config: ProcGenConfig) -> Optional[ModifierSpec]:
    branch = int(rng.integers(0, 2))
    if branch == 0:
        return None
    if branch == 1:
        return ModifierSpec("wireframe", thickness=float(rng.uniform(*config.thickness_range)))
    level = config.subdivide_levels[int(rng.integers(0, len(config.subdivide_levels) - 1))]
    return ModifierSpec("subdivide", levels=int(level))


def _build_instance(inst: InstanceRecord, tally: Tally) -> Mesh:
    mesh = make_primitive(inst.spec)
    if inst.modifier is None:
        return mesh
    if inst.modifier.kind == "wireframe":
        return apply_wireframe(mesh, inst.modifier.thickness, tally)
    return apply_subdivide(mesh, inst.modifier.levels, tally)


def replay_record(record: GenRecord) -> Mesh:
    """Rebuild the accepted mesh from its record, without any RNG."""
    tally = Tally()
    parts = [_build_instance(inst, tally) for inst in record.instances]
    return merge(parts, tally)


def generate_class_mesh(config: ProcGenConfig, class_index: int):
    """Generate the mesh for one class; returns (mesh, record).

    Deterministic in (config.seed, class_index): the class draws from its own
    counter-based stream, so classes can be generated in any order.
    """
    config.validate()
    if not 0 <= class_index < config.n:
        raise ParameterError("class_index out of range")
    rng = RngStream(config.seed, class_index)

    rejections = 0
    while True:
        if rejections >= MAX_CONSECUTIVE_REJECTIONS:
            raise GenerationExhaustedError(
                f"class {class_index}: {rejections} consecutive QC rejections "
                f"(max_size={config.max_size}); parameter ranges look pathological"
            )
        p = int(rng.integers(1, config.v))
        counts = []
        instances = []
        for rep in range(p):
            row = []
            for kind in PRIMITIVE_ORDER:
                cnt = int(rng.integers(0, config.w))
                row.append(cnt)
                for _ in range(cnt):
                    spec = _sample_primitive_spec(kind, rng, config)
                    modifier = _sample_modifier(rng, config)
                    instances.append(InstanceRecord(rep, spec, modifier))
            counts.append(row)

        if not instances:
            rejections += 1     # empty scene: resample, counted as a rejection
            continue

        tally = Tally()
        mesh = merge([_build_instance(inst, tally) for inst in instances], tally)
        if mesh.is_empty() or bounding_box(mesh).max_extent > config.max_size:
            rejections += 1
            continue

        record = GenRecord(
            class_index=class_index,
            seed=config.seed,
            p=p,
            counts=counts,
            instances=instances,
            rejections=rejections,
            warnings=tally.count,
            vertex_count=mesh.vertex_count,
            face_count=mesh.face_count,
        )
        return mesh, record


def _worker(args):
    config, index = args
    return generate_class_mesh(config, index)


def generate_db(config: ProcGenConfig, workers: int = 1, progress=None):
    """Generate all n class meshes; output ordered by class index.

    Returns a list of (class_id, mesh, record) triples. `progress`, when
    given, is called with each finished class index.
    """
    config.validate()
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, (mesh, record) in enumerate(
                pool.map(_worker, [(config, i) for i in range(config.n)])
            ):
                results.append((record.class_id, mesh, record))
                if progress:
                    progress(i)
    else:
        for i in range(config.n):
            mesh, record = generate_class_mesh(config, i)
            results.append((record.class_id, mesh, record))
            if progress:
                progress(i)
    return results
