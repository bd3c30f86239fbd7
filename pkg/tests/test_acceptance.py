"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them on
success). Criteria are property-based plus desk-scale protocol runs; the
desk-scale pipeline artifacts are built once per module and shared.
"""
import json
import shutil
import time
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from synthforge import fractal2d, morphgen
from synthforge.cli import run, _fractal_class
from synthforge.dataset import read_manifest, validate_manifest
from synthforge.errors import DivergenceError
from synthforge.geometry import Mesh, bounding_box, make_primitive
from synthforge.objio import read_obj
from synthforge.render import CameraPose, Illumination, RenderJob, rasterize
from synthforge.rng import RngStream

from conftest import random_primitive_spec
from test_cli import dir_digest
from test_fractal2d import SIERPINSKI_ORACLE_FILL
from test_geometry import euler_characteristic


def _criterion(name: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. Algorithm 1 fidelity
# ---------------------------------------------------------------------------

def test_algorithm1_fidelity(tmp_path):
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    t0 = time.monotonic()
    code = run(["gen-proc", "--n", "50", "--seed", "7", "--out", str(out1)])
    elapsed = time.monotonic() - t0
    assert code == 0

    meshes = sorted((out1 / "meshes").glob("class_*.obj"))
    extents_ok = len(meshes) == 50 and all(
        bounding_box(read_obj(p)).max_extent <= 10.0 + 1e-9 for p in meshes)

    assert run(["gen-proc", "--n", "50", "--seed", "7", "--out", str(out2)]) == 0
    identical = dir_digest(out1) == dir_digest(out2)

    ranges_ok = True
    for line in (out1 / "genlog.jsonl").read_text().splitlines():
        rec = json.loads(line)
        if not 1 <= rec["p"] <= 3:
            ranges_ok = False
        for row in rec["counts"]:
            if any(not 0 <= c <= 5 for c in row):
                ranges_ok = False

    _criterion(
        "Algorithm 1 fidelity: 50 meshes < 60 s, QC bound 10, byte-identical "
        "re-run, p in [1,3], counts in [0,5]",
        elapsed < 60.0 and extents_ok and identical and ranges_ok,
        f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Geometry suite
# ---------------------------------------------------------------------------

def test_geometry_suite():
    failures = 0

    rng = RngStream(2024, 0)
    for kind in ("cube", "sphere", "cone", "cylinder", "torus"):
        expected = 0 if kind == "torus" else 2
        for i in range(40):
            mesh = make_primitive(random_primitive_spec(rng, kind))
            if euler_characteristic(mesh) != expected:
                failures += 1

    from synthforge.geometry import PrimitiveSpec, apply_subdivide
    cc = apply_subdivide(make_primitive(PrimitiveSpec("cube", {"edge": 2.0})), 1)
    if cc.vertex_count != 26 or cc.face_count != 24:
        failures += 1

    for i in range(100):
        mesh = make_primitive(random_primitive_spec(rng))
        corners = sum(len(f) for f in mesh.faces)
        if apply_subdivide(mesh, 1).face_count != corners:
            failures += 1

    _criterion(
        "Geometry suite: Euler characteristic over 200 tessellations, "
        "Catmull-Clark cube 26/24, subdivision face-count law on 100 meshes",
        failures == 0, f"{failures} failures")


# ---------------------------------------------------------------------------
# 3. GP deformation statistics
# ---------------------------------------------------------------------------

def test_gp_deformation_statistics():
    t0 = time.monotonic()
    draws_n = 10000

    # Rank-truncated variance: 80 control points, rank 50 (a real truncation).
    rng = np.random.default_rng(11)
    pts = rng.uniform(-5.0, 5.0, (80, 3))
    params = morphgen.GpDeformParams(seed=5)       # b_s=50, c_s=300, rank=50
    sampler = morphgen.GpSampler(pts, params)
    truncated = sampler.truncated_variance()
    draws = np.stack([sampler.sample(i).displacement for i in range(draws_n)])
    empirical = draws.var(axis=0).mean(axis=1)
    variance_ok = bool(np.all(np.abs(empirical - truncated) / truncated < 0.05))

    # Two-point correlation against exp(-d^2 / c_s) at two separations.
    corr_ok = True
    for d in (10.0, 20.0):
        cp = np.array([[0.0, 0.0, 0.0], [d, 0.0, 0.0],
                       [500.0, 0.0, 0.0], [0.0, 500.0, 0.0]])
        s = morphgen.GpSampler(cp, morphgen.GpDeformParams(seed=3))
        dd = np.stack([s.sample(i).displacement for i in range(draws_n)])
        expected = np.exp(-d * d / 300.0)
        measured = np.mean([np.corrcoef(dd[:, 0, k], dd[:, 1, k])[0, 1]
                            for k in range(3)])
        if abs(measured - expected) > 0.05:
            corr_ok = False

    elapsed = time.monotonic() - t0
    _criterion(
        "GP deformation statistics: variance within 5% of truncated kernel "
        "diagonal, two-point correlation within 0.05 of exp(-d^2/c_s), < 5 min",
        variance_ok and corr_ok and elapsed < 300.0, f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. Renderer analytic suite
# ---------------------------------------------------------------------------

def test_renderer_analytic_suite():
    pose = CameraPose(0.0, 0.0, 5.0, 40.0)
    tri = Mesh(np.array([[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]]),
               [(0, 1, 2)])

    head_on = rasterize(RenderJob("t", pose, Illumination((0, 0, 1.0), 0.9, 0.1),
                                  resolution=64), tri)
    ambient = rasterize(RenderJob("t", pose, Illumination((1.0, 0, 0), 0.9, 0.1),
                                  resolution=64), tri)
    lambert_ok = head_on.pixels[32, 32] == 255 and ambient.pixels[32, 32] == 26

    quads = Mesh(np.array([
        [-1, -1, 0], [1, -1, 0], [1, 1, 0], [-1, 1, 0],
        [-2, -2, -1], [2, -2, -1], [2, 2, -1], [-2, 2, -1]], float),
        [(0, 1, 2, 3), (4, 5, 6, 7)],
        albedo=np.array([[1, 0, 0]] * 4 + [[0, 1, 0]] * 4, float))
    z = rasterize(RenderJob("q", pose, Illumination((0, 0, 1.0), 0.0, 1.0),
                            resolution=64, color_mode="rgb"), quads)
    zbuffer_ok = tuple(z.pixels[32, 32]) == (255, 0, 0) and (z.pixels[..., 1] == 255).any()

    from synthforge.geometry import PrimitiveSpec
    cube = make_primitive(PrimitiveSpec("cube", {"edge": 1.0}))
    vary_pose = CameraPose(30.0, 20.0, 5.0, 40.0)
    lit_a = rasterize(RenderJob("c", vary_pose, Illumination((0, 1.0, 0), 0.9, 0.1),
                                resolution=96), cube)
    lit_b = rasterize(RenderJob("c", vary_pose, Illumination((1.0, 0, 0), 0.5, 0.1),
                                resolution=96), cube)
    silhouette_ok = np.array_equal(lit_a.coverage, lit_b.coverage)

    frames = []
    for k in range(100):
        job = RenderJob("c", CameraPose(float(k * 3 % 360), 10.0, 2.0, 40.0),
                        Illumination((0.0, 1.0, 0.0), 0.7, 0.1),
                        resolution=64, flat=True,
                        rot2d_deg=33.0, jitter_frac=(0.01, -0.02))
        frames.append(rasterize(job, cube).pixels)
    flat_ok = all(np.array_equal(frames[0], f) for f in frames[1:])

    _criterion(
        "Renderer analytic suite: Lambert 255/26, z-buffer occlusion, "
        "silhouette invariance, 100 flat renders bit-identical",
        lambert_ok and zbuffer_ok and silhouette_ok and flat_ok)


# ---------------------------------------------------------------------------
# 5. Fractal suite
# ---------------------------------------------------------------------------

def test_fractal_suite():
    img = fractal2d.chaos_game(fractal2d.sierpinski(), 100000, 256, RngStream(5, 0))
    sierpinski_ok = abs(img.fill_rate - SIERPINSKI_ORACLE_FILL) <= 0.05

    thresholds = (0.02, 0.05, 0.1, 0.2, 0.35)
    monotone_ok = True
    rng = RngStream(606, 0)
    rendered = 0
    for i in range(500):
        system = fractal2d.sample_ifs(rng.spawn(i))
        try:
            probe = fractal2d.chaos_game(system, 2000, 64, rng.spawn(100000 + i))
        except DivergenceError:
            continue
        rendered += 1
        decisions = [fractal2d.accept_system(probe, f) for f in thresholds]
        if decisions != sorted(decisions, reverse=True):
            monotone_ok = False
    monotone_ok = monotone_ok and rendered >= 400

    entry_a, pixels_a = _fractal_class(3, 0, 3, 0.2, 20000, 64)
    entry_b, pixels_b = _fractal_class(3, 0, 3, 0.2, 20000, 64)
    determinism_ok = entry_a == entry_b and all(
        np.array_equal(x, y) for x, y in zip(pixels_a, pixels_b))

    _criterion(
        "Fractal suite: Sierpinski fill within 0.05 of recorded oracle, "
        "acceptance monotone over 500 systems, end-to-end determinism",
        sierpinski_ok and monotone_ok and determinism_ok,
        f"fill={img.fill_rate:.4f} oracle={SIERPINSKI_ORACLE_FILL}")


# ---------------------------------------------------------------------------
# 6. Desk-scale dataset builds (six Table-style combinations)
# ---------------------------------------------------------------------------

RES = 96
IMAGES = 10


@pytest.fixture(scope="module")
def desk_sources(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    t0 = time.monotonic()
    assert run(["gen-proc", "--n", "10", "--seed", "7", "--w", "2",
                "--out", str(root / "proc_meshes")]) == 0
    assert run(["render", "--meshes", str(root / "proc_meshes"),
                "--images-per-class", str(IMAGES), "--seed", "11",
                "--res", str(RES), "--out", str(root / "proc")]) == 0
    assert run(["gen-morph", "--base", str(root / "proc_meshes"),
                "--n-base", "10", "--variants", "1", "--seed", "8",
                "--downsample", "400", "--out", str(root / "morph_meshes")]) == 0
    assert run(["render", "--meshes", str(root / "morph_meshes"),
                "--images-per-class", str(IMAGES), "--seed", "12",
                "--res", str(RES), "--out", str(root / "morph")]) == 0
    assert run(["gen-fractal", "--classes", "10", "--images", str(IMAGES),
                "--seed", "3", "--points", "20000", "--res", str(RES),
                "--out", str(root / "fractal")]) == 0
    return root, time.monotonic() - t0


def _combo_spec(root: Path, parts) -> dict:
    return {
        "components": [
            {"source": name, "path": str(root / folder), "classes": k}
            for name, folder, k in parts],
        "images_per_class": IMAGES,
        "seed": 0,
    }


def test_desk_scale_table_combinations(desk_sources, tmp_path):
    root, setup_elapsed = desk_sources
    t0 = time.monotonic()
    combos = {
        "fractal_only": [("FractalDB", "fractal", 10)],
        "proc_only": [("ProcSynthDB", "proc", 10)],
        "morph_only": [("MorphSynthDB", "morph", 10)],
        "proc_fractal": [("ProcSynthDB", "proc", 5), ("FractalDB", "fractal", 5)],
        "proc_morph": [("ProcSynthDB", "proc", 5), ("MorphSynthDB", "morph", 5)],
        "proc_morph_fractal": [("ProcSynthDB", "proc", 3), ("MorphSynthDB", "morph", 3),
                               ("FractalDB", "fractal", 3)],
    }
    all_ok = True
    for name, parts in combos.items():
        spec_path = tmp_path / f"{name}.json"
        spec_path.write_text(json.dumps(_combo_spec(root, parts)))
        out = tmp_path / name
        if run(["mix", "--spec", str(spec_path), "--out", str(out)]) != 0:
            all_ok = False
            continue
        report = validate_manifest(out)
        expected_classes = sum(k for _, _, k in parts)
        if not (report.ok and report.classes == expected_classes
                and report.images == expected_classes * IMAGES):
            all_ok = False

    # validate must catch an injected missing file and a class-id gap
    probe = tmp_path / "probe"
    shutil.copytree(tmp_path / "proc_fractal", probe)
    (probe / "class_0003" / "img_0004.png").unlink()
    manifest = probe / "manifest.jsonl"
    lines = []
    for line in manifest.read_text().splitlines():
        e = json.loads(line)
        if e["class_id"] == 1:
            e["class_id"] = 11
        lines.append(json.dumps(e, sort_keys=True))
    manifest.write_text("\n".join(lines) + "\n")
    findings = validate_manifest(probe).findings
    kinds = {f.kind for f in findings}
    catches_ok = "missing-file" in kinds and "class-gap" in kinds

    elapsed = setup_elapsed + (time.monotonic() - t0)
    _criterion(
        "Desk-scale dataset builds: six combinations (10 / 5+5 / 3+3+3) at "
        "10 images per class validate clean, injected defects caught, < 10 min",
        all_ok and catches_ok and elapsed < 600.0, f"{elapsed:.1f}s")


def test_seed_chain_replays_to_exact_image(desk_sources, tmp_path):
    """Manifest invariant: a sampled entry's seed chain reproduces its image."""
    root, _ = desk_sources
    spec_path = tmp_path / "replay.json"
    spec_path.write_text(json.dumps(_combo_spec(
        root, [("ProcSynthDB", "proc", 3), ("FractalDB", "fractal", 3)])))
    out = tmp_path / "replay_ds"
    assert run(["mix", "--spec", str(spec_path), "--out", str(out)]) == 0
    entries = read_manifest(out)
    picks = entries[:: max(len(entries) // 2, 1)]      # a few spread-out entries

    render_log = {}
    for line in (root / "proc" / "renderlog.jsonl").read_text().splitlines():
        rec = json.loads(line)
        render_log[(rec["class_index"], rec["image_index"])] = rec
    fractal_log = {}
    for line in (root / "fractal" / "genlog.jsonl").read_text().splitlines():
        rec = json.loads(line)
        fractal_log[rec["class_index"]] = rec

    for entry in picks:
        disk = np.asarray(Image.open(out / entry["path"]))
        chain = entry["seed_chain"]
        if entry["source"] == "ProcSynthDB":
            rec = render_log[(chain["class_index"], chain["image_index"])]
            job = RenderJob.from_json(rec["job"])
            mesh = read_obj(Path(rec["meshes_root"]) / rec["mesh"])
            assert np.array_equal(rasterize(job, mesh).pixels, disk)
        else:
            rec = fractal_log[chain["class_index"]]
            system = fractal2d.IfsSystem.from_json(rec["ifs"])
            stream = RngStream(rec["seed"], rec["class_index"])
            aug = stream.spawn(1000 + rec["attempt"]).spawn(chain["image_index"])
            img = fractal2d.augment_image(system, aug, rec["points"], rec["resolution"])
            assert np.array_equal(img.pixels, disk)
