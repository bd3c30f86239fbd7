"""Dataset access: manifest-backed image sets and the toy fine-tuning target.

The harness consumes the generator toolkit only through its on-disk
interface: `manifest.jsonl` plus the PNG files it points at.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import DataError, ParameterError


@dataclass
class ArrayDataset:
    """Images as a float tensor in [0,1], (N, 3, S, S), with integer labels."""

    images: torch.Tensor
    labels: torch.Tensor

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def class_count(self) -> int:
        return int(self.labels.max().item()) + 1


@dataclass
class SplitDataset:
    train: ArrayDataset
    test: ArrayDataset


def load_manifest_dataset(root, image_size: int = 64) -> ArrayDataset:
    """Load every image referenced by <root>/manifest.jsonl.

    Raises DataError for a missing/unreadable manifest, missing image files,
    or non-dense class ids.
    """
    root = Path(root)
    manifest = root / "manifest.jsonl"
    if not manifest.exists():
        raise DataError(f"no manifest.jsonl under {root}")
    entries = []
    try:
        for line in manifest.read_text().splitlines():
            if line.strip():
                entries.append(json.loads(line))
    except json.JSONDecodeError as exc:
        raise DataError(f"unparseable manifest: {exc}") from exc
    if not entries:
        raise DataError("manifest has no entries")

    ids = sorted({e["class_id"] for e in entries})
    if ids != list(range(len(ids))):
        raise DataError("class ids are not dense")

    images = np.empty((len(entries), 3, image_size, image_size), dtype=np.float32)
    labels = np.empty(len(entries), dtype=np.int64)
    for i, e in enumerate(sorted(entries, key=lambda e: (e["class_id"], e["image_index"]))):
        path = root / e["path"]
        if not path.exists():
            raise DataError(f"image missing: {e['path']}")
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB").resize((image_size, image_size),
                                                      Image.BILINEAR))
        images[i] = arr.transpose(2, 0, 1).astype(np.float32) / 255.0
        labels[i] = e["class_id"]
    return ArrayDataset(torch.from_numpy(images), torch.from_numpy(labels))


def split_dataset(data: ArrayDataset, test_fraction: float = 0.25,
                  seed: int = 0) -> SplitDataset:
    """Deterministic stratified split: per class, a seeded shuffle then a
    fixed fraction held out."""
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    labels = data.labels.numpy()
    for c in np.unique(labels):
        members = np.nonzero(labels == c)[0]
        members = members[rng.permutation(len(members))]
        k = max(1, int(round(len(members) * test_fraction)))
        test_idx.extend(members[:k].tolist())
        train_idx.extend(members[k:].tolist())
    train_idx, test_idx = sorted(train_idx), sorted(test_idx)
    return SplitDataset(
        ArrayDataset(data.images[train_idx], data.labels[train_idx]),
        ArrayDataset(data.images[test_idx], data.labels[test_idx]),
    )


def make_toy_target(classes: int = 10, images_per_class: int = 20,
                    image_size: int = 64, seed: int = 0) -> ArrayDataset:
    """Procedural stand-in for a small natural fine-tuning set.

    Each class is a colored oriented grating with class-specific frequency,
    orientation and palette; per-image phase, contrast and pixel noise give
    intra-class variation. No natural images are bundled or fetched.
    """
    if classes < 2 or images_per_class < 1:
        raise ParameterError("need >= 2 classes and >= 1 image per class")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:image_size, 0:image_size] / image_size
    images = np.empty((classes * images_per_class, 3, image_size, image_size),
                      dtype=np.float32)
    labels = np.repeat(np.arange(classes, dtype=np.int64), images_per_class)
    for c in range(classes):
        freq = rng.uniform(2.0, 9.0)
        theta = rng.uniform(0.0, np.pi)
        palette = rng.uniform(0.2, 1.0, (2, 3))
        u = np.cos(theta) * xx + np.sin(theta) * yy
        for j in range(images_per_class):
            phase = rng.uniform(0.0, 2.0 * np.pi)
            contrast = rng.uniform(0.6, 1.0)
            wave = 0.5 + 0.5 * contrast * np.sin(2.0 * np.pi * freq * u + phase)
            img = (palette[0][:, None, None] * wave
                   + palette[1][:, None, None] * (1.0 - wave))
            img += rng.normal(0.0, 0.03, img.shape)
            images[c * images_per_class + j] = np.clip(img, 0.0, 1.0)
    return ArrayDataset(torch.from_numpy(images), torch.from_numpy(labels))
