import numpy as np
import pytest
from PIL import Image

from synthforge.geometry import PrimitiveSpec
from synthforge.rng import RngStream


def random_primitive_spec(rng: RngStream, kind=None) -> PrimitiveSpec:
    """A valid random spec over modest tessellations (shared by property tests)."""
    kinds = ("cube", "sphere", "cone", "cylinder", "torus")
    if kind is None:
        kind = kinds[int(rng.integers(0, len(kinds) - 1))]
    seg = int(rng.integers(3, 12))
    if kind == "cube":
        params, segments = {"edge": float(rng.uniform(0.5, 2.0))}, {}
    elif kind == "sphere":
        params = {"radius": float(rng.uniform(0.5, 2.0))}
        segments = {"segments": seg, "rings": int(rng.integers(3, 10))}
    elif kind in ("cone", "cylinder"):
        params = {"radius": float(rng.uniform(0.5, 2.0)), "height": float(rng.uniform(0.5, 2.0))}
        segments = {"segments": seg}
    else:
        major = float(rng.uniform(1.0, 2.0))
        params = {"major_radius": major, "tube_radius": major * float(rng.uniform(0.2, 0.45))}
        segments = {"major_segments": seg, "minor_segments": int(rng.integers(3, 10))}
    q = rng.normal(4)
    q = q / np.linalg.norm(q)
    return PrimitiveSpec(
        kind=kind, params=params, segments=segments,
        translation=tuple(float(t) for t in rng.uniform(-2.0, 2.0, 3)),
        rotation=tuple(float(c) for c in q),
        scale=float(rng.uniform(0.5, 1.5)),
    )


def make_image_db(root, classes: int, images: int, size: int = 32, value: int = 200):
    """A bare source database: class_XXXX/img_XXXX.png folders with flat PNGs."""
    root.mkdir(parents=True, exist_ok=True)
    for c in range(classes):
        cdir = root / f"class_{c:04d}"
        cdir.mkdir()
        for j in range(images):
            arr = np.full((size, size), value, dtype=np.uint8)
            arr[c % size, j % size] = 255 - value
            Image.fromarray(arr, mode="L").save(cdir / f"img_{j:04d}.png")
    return root


@pytest.fixture
def rng():
    return RngStream(20240901, 0)
