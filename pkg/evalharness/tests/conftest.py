import json
import shutil
import subprocess

import numpy as np
import pytest
from PIL import Image


def mean_preserving_rotation(dim: int, seed: int) -> np.ndarray:
    """Random orthogonal map with Q @ ones = ones (keeps rows centered)."""
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(np.column_stack([np.ones(dim),
                                          rng.standard_normal((dim, dim - 1))]))[0]
    sub = np.linalg.qr(rng.standard_normal((dim - 1, dim - 1)))[0]
    block = np.zeros((dim, dim))
    block[0, 0] = 1.0
    block[1:, 1:] = sub
    return basis @ block @ basis.T


def write_manifest_dataset(root, classes: int, images: int, size: int = 32,
                           seed: int = 0):
    """Small labeled image set in the generator toolkit's on-disk format."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for c in range(classes):
        cdir = root / f"class_{c:04d}"
        cdir.mkdir()
        base = rng.uniform(0.1, 0.9, (size, size, 3))
        for j in range(images):
            noisy = np.clip(base + rng.normal(0, 0.05, base.shape), 0, 1)
            arr = (noisy * 255).astype(np.uint8)
            Image.fromarray(arr, mode="RGB").save(cdir / f"img_{j:04d}.png")
            entries.append({"class_id": c, "image_index": j,
                            "path": f"class_{c:04d}/img_{j:04d}.png",
                            "source": "test"})
    with open(root / "manifest.jsonl", "w") as fh:
        for e in entries:
            fh.write(json.dumps(e) + "\n")
    return root


@pytest.fixture(scope="session")
def procsynth_mini(tmp_path_factory):
    """10-class ProcSynth mini built through the generator CLI (the external
    interface); skipped when the synthforge toolkit is not installed."""
    if shutil.which("synthforge") is None:
        pytest.skip("synthforge CLI not available")
    root = tmp_path_factory.mktemp("mini")
    def sh(*args):
        subprocess.run(args, check=True, capture_output=True)
    sh("synthforge", "gen-proc", "--n", "10", "--seed", "7", "--w", "2",
       "--out", str(root / "meshes"))
    sh("synthforge", "render", "--meshes", str(root / "meshes"),
       "--images-per-class", "20", "--seed", "11", "--res", "64",
       "--out", str(root / "imgs"))
    spec = {"components": [{"source": "ProcSynthDB", "path": str(root / "imgs"),
                            "classes": 10}],
            "images_per_class": 20, "seed": 0}
    (root / "mix.json").write_text(json.dumps(spec))
    sh("synthforge", "mix", "--spec", str(root / "mix.json"),
       "--out", str(root / "dataset"))
    return root / "dataset"
