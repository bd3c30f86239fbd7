"""Dataset reports: delimited stats, summary figures, preview contact sheets."""
from __future__ import annotations

import csv
import logging
from pathlib import Path

from PIL import Image

from .dataset import DatasetStats, read_manifest
from .errors import ParameterError

log = logging.getLogger(__name__)

THUMB = 96
PREVIEW_COLUMNS = 4


def write_stats_report(stats: DatasetStats, report_dir) -> list:
    """Write stats.csv plus per-source figures; returns the file paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = report_dir / "stats.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "classes", "images", "mean_foreground"])
        for src in sorted(stats.per_source):
            s = stats.per_source[src]
            writer.writerow([src, s.classes, s.images, f"{s.mean_foreground:.6f}"])
        writer.writerow(["TOTAL", stats.class_count,
                         stats.class_count * stats.images_per_class, ""])
    written.append(csv_path)

    sources = sorted(stats.per_source)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].bar(sources, [stats.per_source[s].classes for s in sources], color="#4878cf")
    axes[0].set_ylabel("classes")
    axes[0].set_title("Classes per source")
    axes[1].bar(sources, [stats.per_source[s].mean_foreground for s in sources],
                color="#6acc65")
    axes[1].set_ylabel("mean foreground fraction")
    axes[1].set_title("Foreground per source")
    for ax in axes:
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig_path = report_dir / "stats_summary.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    written.append(fig_path)
    return written


def build_preview(root, n: int) -> Image.Image:
    """Contact sheet: the first n classes x first 4 images, nearest-resized.

    n is clamped (with a warning) when it exceeds the class count.
    """
    if n < 1:
        raise ParameterError("preview needs n >= 1")
    root = Path(root)
    entries = read_manifest(root)
    by_class = {}
    for e in entries:
        by_class.setdefault(e["class_id"], []).append(e)
    class_ids = sorted(by_class)
    if n > len(class_ids):
        log.warning("preview: n=%d exceeds %d classes, clamping", n, len(class_ids))
        n = len(class_ids)

    sheet = Image.new("RGB", (PREVIEW_COLUMNS * THUMB, n * THUMB), (16, 16, 16))
    for row, cid in enumerate(class_ids[:n]):
        chosen = sorted(by_class[cid], key=lambda e: e["image_index"])[:PREVIEW_COLUMNS]
        for col, e in enumerate(chosen):
            with Image.open(root / e["path"]) as im:
                thumb = im.convert("RGB").resize((THUMB, THUMB), Image.NEAREST)
            sheet.paste(thumb, (col * THUMB, row * THUMB))
    return sheet
