from PIL import Image

import pytest

from synthforge.dataset import DatasetComponent, DatasetSpec, build_combination, dataset_stats
from synthforge.errors import ParameterError
from synthforge.report import PREVIEW_COLUMNS, THUMB, build_preview, write_stats_report

from conftest import make_image_db


@pytest.fixture
def built(tmp_path):
    src = make_image_db(tmp_path / "src", classes=5, images=6)
    spec = DatasetSpec(
        components=[DatasetComponent("ProcSynthDB", str(src), 5)],
        images_per_class=6)
    build_combination(spec, tmp_path / "ds")
    return tmp_path / "ds"


def test_stats_report_files(built, tmp_path):
    stats = dataset_stats(built)
    written = write_stats_report(stats, tmp_path / "report")
    names = {p.name for p in written}
    assert "stats.csv" in names and "stats_summary.png" in names
    csv_text = (tmp_path / "report" / "stats.csv").read_text()
    assert csv_text.splitlines()[0] == "source,classes,images,mean_foreground"
    assert "ProcSynthDB,5,30" in csv_text
    assert "TOTAL,5,30" in csv_text
    with Image.open(tmp_path / "report" / "stats_summary.png") as im:
        assert im.size[0] > 100


def test_preview_grid_shape_and_determinism(built, tmp_path):
    sheet = build_preview(built, 4)
    assert sheet.size == (PREVIEW_COLUMNS * THUMB, 4 * THUMB)
    p1, p2 = tmp_path / "s1.png", tmp_path / "s2.png"
    sheet.save(p1)
    build_preview(built, 4).save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_preview_clamps_n(built):
    sheet = build_preview(built, 50)
    assert sheet.size[1] == 5 * THUMB      # only 5 classes exist


def test_preview_rejects_zero(built):
    with pytest.raises(ParameterError):
        build_preview(built, 0)
