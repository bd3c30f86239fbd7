"""2D iterated-function-system fractals rendered via the chaos game.

One sampled system defines one class; per-class images come from perturbing
the system's matrices and rotating the rendered point cloud. Rendering is
point-splat (one pixel per visit) on the attractor's bounding square, which
keeps the fill-rate semantics exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParameterError
from .rng import RngStream

DIVERGENCE_LIMIT = 1e6
BURN_IN = 100
MIN_DET_WEIGHT = 0.01
DEFAULT_MIN_FILL = 0.2
MAX_AUGMENT_RETRIES = 20


@dataclass
class IfsSystem:
    """Affine contraction set with sampling weights; one system = one class."""

    matrices: np.ndarray     # (k, 2, 2)
    translations: np.ndarray  # (k, 2)
    weights: np.ndarray      # (k,), positive, sums to 1

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        self.translations = np.asarray(self.translations, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)

    @property
    def map_count(self) -> int:
        return len(self.weights)

    def validate(self) -> None:
        if self.map_count < 2:
            raise ParameterError("an IFS needs at least 2 maps")
        if not np.all(np.isfinite(self.matrices)):
            raise ParameterError("IFS matrix entries must be finite")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ParameterError("weights must be positive and sum to 1")

    def to_json(self) -> dict:
        return {
            "matrices": self.matrices.tolist(),
            "translations": self.translations.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "IfsSystem":
        return cls(np.array(d["matrices"]), np.array(d["translations"]), np.array(d["weights"]))


@dataclass
class FractalImage:
    pixels: np.ndarray    # (res, res) uint8
    fill_rate: float


def sample_ifs(rng: RngStream) -> IfsSystem:
    """Draw a system: 2-8 maps, entries in [-1,1], weights proportional to |det|."""
    k = int(rng.integers(2, 8))
    matrices = rng.uniform(-1.0, 1.0, (k, 2, 2))
    translations = rng.uniform(-1.0, 1.0, (k, 2))
    dets = np.abs(np.linalg.det(matrices))
    weights = np.maximum(dets, MIN_DET_WEIGHT)
    weights = weights / weights.sum()
    return IfsSystem(matrices, translations, weights)


def _orbit(system: IfsSystem, points: int, rng: RngStream) -> np.ndarray:
    """Chaos-game point cloud: BURN_IN discarded iterates, then `points` kept."""
    total = points + BURN_IN
    js = rng.choice(system.map_count, size=total, p=system.weights)
    coeffs = [
        (float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]), float(t[0]), float(t[1]))
        for m, t in zip(system.matrices, system.translations)
    ]
    xs = np.empty(total)
    ys = np.empty(total)
    x = 0.0
    y = 0.0
    for i, j in enumerate(js.tolist()):
        a, b, c, d, e, f = coeffs[j]
        x, y = a * x + b * y + e, c * x + d * y + f
        if x > DIVERGENCE_LIMIT or x < -DIVERGENCE_LIMIT or y > DIVERGENCE_LIMIT or y < -DIVERGENCE_LIMIT:
            raise DivergenceError(f"orbit escaped at iterate {i}")
        xs[i] = x
        ys[i] = y
    return np.column_stack([xs[BURN_IN:], ys[BURN_IN:]])


def _rasterize_points(pts: np.ndarray, resolution: int) -> FractalImage:
    """Splat points onto the pixel grid of their bounding square."""
    lo = pts.min(axis=0)
    side = float((pts.max(axis=0) - lo).max())
    grid = np.zeros((resolution, resolution), dtype=np.uint8)
    if side == 0.0:
        ix = np.full(len(pts), resolution // 2)
        iy = np.full(len(pts), resolution // 2)
    else:
        scaled = (pts - lo) / side * resolution
        ix = np.minimum(scaled[:, 0], resolution - 1).astype(np.int64)
        iy = np.minimum(scaled[:, 1], resolution - 1).astype(np.int64)
    grid[resolution - 1 - iy, ix] = 255
    fill = float(np.count_nonzero(grid)) / (resolution * resolution)
    return FractalImage(grid, fill)


def chaos_game(system: IfsSystem, points: int, resolution: int, rng: RngStream) -> FractalImage:
    """Render one system. Raises DivergenceError when the orbit escapes."""
    system.validate()
    if points < 1000:
        raise ParameterError("need at least 1000 points")
    if resolution < 32:
        raise ParameterError("resolution must be >= 32")
    return _rasterize_points(_orbit(system, points, rng), resolution)


def accept_system(image: FractalImage, min_fill: float = DEFAULT_MIN_FILL) -> bool:
    """Keep a system iff its rendered fill rate reaches min_fill (inclusive)."""
    return image.fill_rate >= min_fill


def augment_image(
    system: IfsSystem,
    rng: RngStream,
    points: int,
    resolution: int,
    perturb_range: tuple = (0.8, 1.2),
    rotation_max_deg: float = 360.0,
) -> FractalImage:
    """One augmented render: per-entry matrix scaling plus point-cloud rotation.

    Retries fresh perturbations (up to MAX_AUGMENT_RETRIES) when the
    perturbed system diverges.
    """
    perturb_rng = rng.spawn(0)
    for attempt in range(MAX_AUGMENT_RETRIES + 1):
        factors = perturb_rng.uniform(perturb_range[0], perturb_range[1],
                                      system.matrices.shape)
        theta = np.deg2rad(perturb_rng.uniform(0.0, rotation_max_deg))
        perturbed = IfsSystem(system.matrices * factors, system.translations, system.weights)
        try:
            pts = _orbit(perturbed, points, rng.spawn(1 + attempt))
        except DivergenceError:
            continue
        cos_t, sin_t = float(np.cos(theta)), float(np.sin(theta))
        rotated = np.column_stack([
            pts[:, 0] * cos_t - pts[:, 1] * sin_t,
            pts[:, 0] * sin_t + pts[:, 1] * cos_t,
        ])
        return _rasterize_points(rotated, resolution)
    raise DivergenceError(f"augmentation diverged {MAX_AUGMENT_RETRIES + 1} times")


def augment(
    system: IfsSystem,
    class_rng: RngStream,
    count: int,
    points: int = 100000,
    resolution: int = 256,
    perturb_range: tuple = (0.8, 1.2),
    rotation_max_deg: float = 360.0,
):
    """Produce `count` images for an accepted system, one per image index."""
    if count < 1:
        raise ParameterError("count must be >= 1")
    return [
        augment_image(system, class_rng.spawn(j), points, resolution,
                      perturb_range, rotation_max_deg)
        for j in range(count)
    ]


def sierpinski() -> IfsSystem:
    """The canonical three-map Sierpinski triangle system (test fixture)."""
    half = np.array([[0.5, 0.0], [0.0, 0.5]])
    return IfsSystem(
        np.stack([half, half, half]),
        np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    )
