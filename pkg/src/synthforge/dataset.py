"""Dataset assembly: mix source databases into one labeled image corpus.

A source database is any directory of `class_XXXX/img_XXXX.png` folders
(renderer or fractal output). Mixing selects the first k classes from each
source, interleaves global class ids round-robin across sources, links or
copies the images, and writes a JSON-lines manifest that records where every
image came from and the seeds that produced it.
"""
from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from PIL import Image

from .errors import CapacityError, EmptyInputError, ManifestError, ParameterError

MANIFEST_NAME = "manifest.jsonl"
SPEC_NAME = "spec.json"

SOURCE_NAMES = ("FractalDB", "ProcSynthDB", "MorphSynthDB", "FlatWorldDB")


@dataclass
class DatasetComponent:
    source: str          # FractalDB | ProcSynthDB | MorphSynthDB | FlatWorldDB
    path: str            # directory holding class_XXXX folders
    classes: int

    def to_json(self) -> dict:
        return {"source": self.source, "path": self.path, "classes": self.classes}


@dataclass
class DatasetSpec:
    components: list
    images_per_class: int = 1000
    seed: int = 0
    pad_to: Optional[int] = None

    def validate(self) -> None:
        if not self.components:
            raise ParameterError("dataset spec needs at least one component")
        for comp in self.components:
            if comp.classes < 1:
                raise ParameterError(f"component {comp.source}: class count must be >= 1")
        if self.images_per_class < 1:
            raise ParameterError("images_per_class must be >= 1")

    @property
    def total_classes(self) -> int:
        base = sum(c.classes for c in self.components)
        return self.pad_to if self.pad_to is not None else base

    def to_json(self) -> dict:
        return {
            "components": [c.to_json() for c in self.components],
            "images_per_class": self.images_per_class,
            "seed": self.seed,
            "pad_to": self.pad_to,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetSpec":
        return cls(
            components=[DatasetComponent(c["source"], c["path"], int(c["classes"]))
                        for c in d["components"]],
            images_per_class=int(d.get("images_per_class", 1000)),
            seed=int(d.get("seed", 0)),
            pad_to=d.get("pad_to"),
        )


@dataclass
class Finding:
    kind: str
    message: str


@dataclass
class ValidationReport:
    findings: list = field(default_factory=list)
    classes: int = 0
    images: int = 0

    @property
    def ok(self) -> bool:
        return not self.findings


def _class_dirs(root: Path):
    return sorted(p for p in Path(root).iterdir()
                  if p.is_dir() and p.name.startswith("class_"))


def _link_or_copy(src: Path, dst: Path) -> None:
    if dst.exists():
        dst.unlink()
    try:
        os.link(src, dst)
    except OSError:
        shutil.copyfile(src, dst)


def _load_source_logs(root: Path):
    """Per-image render jobs and per-class generator entries, when present."""
    per_image = {}
    per_class = {}
    seed = None
    spec_path = root / SPEC_NAME
    if spec_path.exists():
        try:
            seed = json.loads(spec_path.read_text()).get("args", {}).get("seed")
        except (json.JSONDecodeError, AttributeError):
            seed = None
    render_log = root / "renderlog.jsonl"
    if render_log.exists():
        for line in render_log.read_text().splitlines():
            rec = json.loads(line)
            per_image[(rec["class_index"], rec["image_index"])] = rec
    gen_log = root / "genlog.jsonl"
    if gen_log.exists():
        for line in gen_log.read_text().splitlines():
            rec = json.loads(line)
            per_class[rec["class_index"]] = rec
    return per_image, per_class, seed


def _round_robin(spec: DatasetSpec, available: list) -> list:
    """Assignment list [(component index, source class index)] in global-id order.

    Global class id g draws from source (g mod n) until that source's share is
    exhausted; with pad_to set, the rotation keeps going over whatever extra
    classes the sources actually have.
    """
    quotas = [c.classes for c in spec.components]
    assignment = []
    rounds = max(quotas)
    for r in range(rounds):
        for ci in range(len(spec.components)):
            if r < quotas[ci]:
                assignment.append((ci, r))
    if spec.pad_to is not None:
        r = 0
        while len(assignment) < spec.pad_to:
            progressed = False
            for ci in range(len(spec.components)):
                idx = quotas[ci] + r
                if len(assignment) >= spec.pad_to:
                    break
                if idx < len(available[ci]):
                    assignment.append((ci, idx))
                    progressed = True
            if len(assignment) >= spec.pad_to:
                break
            if not progressed:
                raise CapacityError(
                    f"cannot pad to {spec.pad_to} classes: all sources exhausted "
                    f"at {len(assignment)}")
            r += 1
    return assignment


def build_combination(spec: DatasetSpec, out_root) -> list:
    """Assemble the mixed dataset under out_root; returns the manifest entries."""
    spec.validate()
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    available = []
    logs = []
    for comp in spec.components:
        src = Path(comp.path)
        if not src.is_dir():
            raise CapacityError(f"source {comp.source}: directory {src} does not exist")
        dirs = _class_dirs(src)
        if len(dirs) < comp.classes:
            raise CapacityError(
                f"source {comp.source} has {len(dirs)} classes, {comp.classes} requested")
        available.append(dirs)
        logs.append(_load_source_logs(src))

    entries = []
    for gid, (ci, src_idx) in enumerate(_round_robin(spec, available)):
        comp = spec.components[ci]
        class_dir = available[ci][src_idx]
        images = sorted(class_dir.glob("img_*.png"))
        if len(images) < spec.images_per_class:
            raise CapacityError(
                f"source {comp.source} class {class_dir.name} has {len(images)} images, "
                f"{spec.images_per_class} requested")
        dst_dir = out_root / f"class_{gid:04d}"
        dst_dir.mkdir(exist_ok=True)
        per_image, per_class, src_seed = logs[ci]
        src_class_index = int(class_dir.name.split("_")[1])
        for j in range(spec.images_per_class):
            dst = dst_dir / f"img_{j:04d}.png"
            _link_or_copy(images[j], dst)
            image_rec = per_image.get((src_class_index, j))
            class_rec = per_class.get(src_class_index)
            ref = None
            if image_rec is not None and "mesh" in image_rec:
                ref = {"mesh": image_rec["mesh"]}
            elif class_rec is not None and "ifs" in class_rec:
                ref = {"ifs": class_rec["ifs"]}
            entries.append({
                "class_id": gid,
                "source": comp.source,
                "source_root": str(Path(comp.path)),
                "source_class": class_dir.name,
                "image_index": j,
                "path": f"class_{gid:04d}/img_{j:04d}.png",
                "ref": ref,
                "seed_chain": {
                    "source_seed": src_seed,
                    "class_index": src_class_index,
                    "image_index": j,
                },
            })

    entries.sort(key=lambda e: (e["class_id"], e["image_index"]))
    with open(out_root / MANIFEST_NAME, "w") as fh:
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    (out_root / SPEC_NAME).write_text(json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n")
    return entries


def read_manifest(root) -> list:
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise ManifestError(f"no {MANIFEST_NAME} under {root}")
    entries = []
    try:
        for line in path.read_text().splitlines():
            if line.strip():
                entries.append(json.loads(line))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"unparseable manifest line: {exc}") from exc
    return entries


def validate_manifest(root) -> ValidationReport:
    """Check file existence, image dimensions, class-id density and per-class
    image-count uniformity. A healthy dataset yields zero findings."""
    root = Path(root)
    entries = read_manifest(root)
    report = ValidationReport()
    if not entries:
        report.findings.append(Finding("empty", "manifest has no entries"))
        return report

    counts = {}
    ref_size = None
    for e in entries:
        img_path = root / e["path"]
        counts[e["class_id"]] = counts.get(e["class_id"], 0) + 1
        if not img_path.exists():
            report.findings.append(Finding("missing-file", f"{e['path']} does not exist"))
            continue
        with Image.open(img_path) as im:
            size = im.size
        if ref_size is None:
            ref_size = size
        elif size != ref_size:
            report.findings.append(Finding(
                "dimensions", f"{e['path']} is {size}, expected {ref_size}"))

    ids = sorted(counts)
    total = ids[-1] + 1
    for expect in range(total):
        if expect not in counts:
            report.findings.append(Finding("class-gap", f"class id {expect} missing"))
    if len(set(counts.values())) > 1:
        lo, hi = min(counts.values()), max(counts.values())
        report.findings.append(Finding(
            "count-uniformity", f"images per class vary between {lo} and {hi}"))

    report.classes = len(ids)
    report.images = len(entries)
    return report


@dataclass
class SourceStats:
    classes: int = 0
    images: int = 0
    mean_foreground: float = 0.0


@dataclass
class DatasetStats:
    class_count: int
    images_per_class: int
    per_source: dict
    total_bytes: int


def dataset_stats(root, foreground_sample: int = 200) -> DatasetStats:
    """Summarize a built dataset; foreground fraction is averaged over the
    first `foreground_sample` images of each source (deterministic)."""
    import numpy as np

    root = Path(root)
    entries = read_manifest(root)
    if not entries:
        raise EmptyInputError("dataset manifest is empty")

    per_source = {}
    sums = {}
    total_bytes = 0
    classes_by_source = {}
    for e in entries:
        src = e["source"]
        stats = per_source.setdefault(src, SourceStats())
        stats.images += 1
        classes_by_source.setdefault(src, set()).add(e["class_id"])
        img_path = root / e["path"]
        if img_path.exists():
            total_bytes += img_path.stat().st_size
            acc = sums.setdefault(src, [0.0, 0])
            if acc[1] < foreground_sample:
                arr = np.asarray(Image.open(img_path))
                acc[0] += float(np.count_nonzero(arr.reshape(arr.shape[0], arr.shape[1], -1)
                                                 .max(axis=2)) / (arr.shape[0] * arr.shape[1]))
                acc[1] += 1
    for src, stats in per_source.items():
        stats.classes = len(classes_by_source[src])
        acc = sums.get(src)
        stats.mean_foreground = acc[0] / acc[1] if acc and acc[1] else 0.0

    class_ids = {e["class_id"] for e in entries}
    return DatasetStats(
        class_count=len(class_ids),
        images_per_class=len(entries) // max(len(class_ids), 1),
        per_source=per_source,
        total_bytes=total_bytes,
    )
