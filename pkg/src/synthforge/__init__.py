"""synthforge: labeled image datasets from procedural meshes and 2D fractals."""

from .geometry import (
    Aabb,
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
from .rng import RngStream, hash64

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "Mesh",
    "ModifierSpec",
    "PrimitiveSpec",
    "RngStream",
    "Tally",
    "apply_subdivide",
    "apply_wireframe",
    "bounding_box",
    "hash64",
    "make_primitive",
    "merge",
    "__version__",
]
