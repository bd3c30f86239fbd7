"""synthforge command-line interface.

Subcommands: gen-proc, gen-morph, gen-fractal, render, mix, validate, stats,
preview. Exit codes: 0 success, 1 usage error, 2 generation or validation
failure. Every generating subcommand echoes its effective configuration to
<out>/spec.json; re-running with `--spec <that file>` reproduces the outputs
byte-identically.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import dataset as ds
from . import fractal2d, morphgen, objio, procgen, render, report
from .errors import CapacityError, GenerationExhaustedError, SynthforgeError
from .rng import RngStream, hash64

log = logging.getLogger("synthforge")

ENV_SEED = "SYNTHFORGE_SEED"


@dataclass
class GlobalConfig:
    seed: int
    workers: int
    verbosity: int
    progress_json: bool


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _workers_arg(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    return _positive_int(text)


def _add_common(sub, seed=True):
    if seed:
        sub.add_argument("--seed", type=int, default=None,
                         help=f"base seed (falls back to ${ENV_SEED}, then 0)")
    sub.add_argument("--workers", type=_workers_arg, default=1,
                     help="worker processes, or 'auto'")
    sub.add_argument("--progress-json", action="store_true",
                     help="emit machine-readable progress lines on stderr")
    sub.add_argument("-v", "--verbose", action="count", default=0)
    sub.add_argument("--spec", default=None,
                     help="load parameters from a previously written spec.json")


# Flags that must be present after defaults, saved-spec values and argv merge.
# (Not argparse-required so that --spec replay can supply them.)
_REQUIRED = {
    "gen-proc": ("n", "out"),
    "gen-morph": ("base", "out"),
    "gen-fractal": ("classes", "images", "out"),
    "render": ("meshes", "images_per_class", "out"),
    "mix": ("spec", "out"),
    "validate": ("root",),
    "stats": ("root",),
    "preview": ("root", "n", "out"),
}


def build_parser():
    parser = _Parser(prog="synthforge",
                     description="Synthetic datasets from procedural meshes and fractals")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)
    registry = {}

    p = subs.add_parser("gen-proc", help="generate procedural class meshes")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--out")
    p.add_argument("--v", type=_positive_int, default=3)
    p.add_argument("--w", type=_positive_int, default=5)
    p.add_argument("--max-size", type=float, default=10.0)
    _add_common(p)
    p.set_defaults(func=cmd_gen_proc)
    registry["gen-proc"] = p

    p = subs.add_parser("gen-morph", help="deform base meshes into new classes")
    p.add_argument("--base", help="gen-proc output directory")
    p.add_argument("--n-base", type=_positive_int, default=100)
    p.add_argument("--variants", type=_positive_int, default=10)
    p.add_argument("--out")
    p.add_argument("--b-s", type=float, default=50.0)
    p.add_argument("--c-s", type=float, default=300.0)
    p.add_argument("--b-a", type=float, default=0.05)
    p.add_argument("--c-a", type=float, default=0.2)
    p.add_argument("--rank", type=_positive_int, default=50)
    p.add_argument("--downsample", type=_positive_int, default=2000)
    _add_common(p)
    p.set_defaults(func=cmd_gen_morph)
    registry["gen-morph"] = p

    p = subs.add_parser("gen-fractal", help="generate IFS fractal image classes")
    p.add_argument("--classes", type=_positive_int)
    p.add_argument("--images", type=_positive_int)
    p.add_argument("--out")
    p.add_argument("--min-fill", type=float, default=0.2)
    p.add_argument("--points", type=_positive_int, default=100000)
    p.add_argument("--res", type=_positive_int, default=256)
    _add_common(p)
    p.set_defaults(func=cmd_gen_fractal)
    registry["gen-fractal"] = p

    p = subs.add_parser("render", help="render mesh classes to images")
    p.add_argument("--meshes", help="mesh db directory (or its meshes/)")
    p.add_argument("--images-per-class", type=_positive_int)
    p.add_argument("--out")
    p.add_argument("--flat", action="store_true", help="FlatWorld mode: no 3D variation")
    p.add_argument("--res", type=_positive_int, default=256)
    p.add_argument("--color", choices=["auto", "gray", "rgb"], default="auto")
    p.add_argument("--fov", type=float, default=40.0)
    p.add_argument("--aniso-mode", choices=["uniform-range", "factor2"],
                   default="uniform-range")
    _add_common(p)
    p.set_defaults(func=cmd_render)
    registry["render"] = p

    p = subs.add_parser("mix", help="combine source databases into one dataset")
    p.add_argument("--spec", help="dataset spec JSON file")
    p.add_argument("--out")
    p.add_argument("--workers", type=_workers_arg, default=1)
    p.add_argument("--progress-json", action="store_true")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_mix)
    registry["mix"] = p

    p = subs.add_parser("validate", help="check a built dataset against its manifest")
    p.add_argument("--root")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_validate)
    registry["validate"] = p

    p = subs.add_parser("stats", help="summarize a built dataset")
    p.add_argument("--root")
    p.add_argument("--report", default=None,
                   help="directory for stats.csv and summary figures")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_stats)
    registry["stats"] = p

    p = subs.add_parser("preview", help="contact sheet of the first classes")
    p.add_argument("--root")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_preview)
    registry["preview"] = p

    return parser, registry


def _resolve_seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get(ENV_SEED)
    return int(env) if env else 0


def _global_config(args) -> GlobalConfig:
    """Shared run options with defaults and the seed fallback resolved."""
    return GlobalConfig(
        seed=_resolve_seed(getattr(args, "seed", None)),
        workers=getattr(args, "workers", 1),
        verbosity=getattr(args, "verbose", 0),
        progress_json=getattr(args, "progress_json", False),
    )


def _progress(gc: GlobalConfig, **payload):
    if gc.progress_json:
        print(json.dumps(payload, sort_keys=True), file=sys.stderr, flush=True)


def _write_spec(out_dir: Path, command: str, params: dict) -> None:
    doc = {"command": command, "args": params}
    (out_dir / "spec.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _save_image(array: np.ndarray, path: Path) -> None:
    mode = "L" if array.ndim == 2 else "RGB"
    Image.fromarray(array, mode=mode).save(path)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_proc(args) -> int:
    gc = _global_config(args)
    seed = gc.seed
    out = Path(args.out)
    (out / "meshes").mkdir(parents=True, exist_ok=True)
    config = procgen.ProcGenConfig(n=args.n, seed=seed, v=args.v, w=args.w,
                                   max_size=args.max_size)
    results = procgen.generate_db(
        config, workers=gc.workers,
        progress=lambda i: _progress(gc, event="class", index=i))
    with open(out / "genlog.jsonl", "w") as fh:
        for class_id, mesh, record in results:
            objio.write_obj(mesh, out / "meshes" / f"class_{class_id}.obj")
            fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    _write_spec(out, "gen-proc", {"n": args.n, "seed": seed, "v": args.v,
                                  "w": args.w, "max_size": args.max_size})
    log.info("gen-proc: %d meshes under %s", len(results), out)
    return 0


def cmd_gen_morph(args) -> int:
    gc = _global_config(args)
    seed = gc.seed
    out = Path(args.out)
    (out / "meshes").mkdir(parents=True, exist_ok=True)

    base_dir = Path(args.base)
    mesh_dir = base_dir / "meshes" if (base_dir / "meshes").is_dir() else base_dir
    mesh_paths = sorted(mesh_dir.glob("class_*.obj"))
    if len(mesh_paths) < args.n_base:
        raise CapacityError(
            f"base db has {len(mesh_paths)} meshes, --n-base {args.n_base} requested")
    mesh_paths = mesh_paths[: args.n_base]
    bases = [objio.read_obj(p) for p in mesh_paths]

    params = morphgen.GpDeformParams(
        b_s=args.b_s, c_s=args.c_s, b_a=args.b_a, c_a=args.c_a,
        rank=args.rank, downsample_target=args.downsample, seed=seed)
    results = morphgen.generate_morph_db(bases, params, args.variants)

    with open(out / "genlog.jsonl", "w") as fh:
        for class_id, mesh in results:
            objio.write_obj(mesh, out / "meshes" / f"class_{class_id}.obj")
            index = int(class_id)
            entry = {
                "class_id": class_id,
                "class_index": index,
                "base_index": index // args.variants,
                "variant_index": index % args.variants,
                "base_mesh": mesh_paths[index // args.variants].name,
                "seed": seed,
                "params": params.to_json(),
            }
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        _progress(gc, event="morph-done", classes=len(results))
    _write_spec(out, "gen-morph", {
        "base": str(args.base), "n_base": args.n_base, "variants": args.variants,
        "seed": seed, "b_s": args.b_s, "c_s": args.c_s, "b_a": args.b_a,
        "c_a": args.c_a, "rank": args.rank, "downsample": args.downsample})
    log.info("gen-morph: %d classes under %s", len(results), out)
    return 0


MAX_IFS_ATTEMPTS = 100


def _fractal_class(seed: int, class_index: int, images: int, min_fill: float,
                   points: int, resolution: int):
    stream = RngStream(seed, class_index)
    system = None
    accepted_attempt = -1
    probe_fill = 0.0
    for attempt in range(MAX_IFS_ATTEMPTS):
        candidate = fractal2d.sample_ifs(stream.spawn(2 * attempt))
        try:
            probe = fractal2d.chaos_game(candidate, points, resolution,
                                         stream.spawn(2 * attempt + 1))
        except fractal2d.DivergenceError:
            continue
        if fractal2d.accept_system(probe, min_fill):
            system = candidate
            accepted_attempt = attempt
            probe_fill = probe.fill_rate
            break
    if system is None:
        raise GenerationExhaustedError(
            f"class {class_index}: no IFS accepted after {MAX_IFS_ATTEMPTS} attempts "
            f"(min_fill={min_fill})")
    aug_rng = stream.spawn(1000 + accepted_attempt)
    imgs = fractal2d.augment(system, aug_rng, images, points, resolution)
    entry = {
        "class_id": f"{class_index:04d}",
        "class_index": class_index,
        "seed": seed,
        "attempt": accepted_attempt,
        "probe_fill": probe_fill,
        "ifs": system.to_json(),
        "points": points,
        "resolution": resolution,
        "fill_rates": [im.fill_rate for im in imgs],
    }
    return entry, [im.pixels for im in imgs]


def _fractal_worker(packed):
    return _fractal_class(*packed)


def cmd_gen_fractal(args) -> int:
    gc = _global_config(args)
    seed = gc.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(seed, i, args.images, args.min_fill, args.points, args.res)
             for i in range(args.classes)]
    if gc.workers > 1:
        with ProcessPoolExecutor(max_workers=gc.workers) as pool:
            results = list(pool.map(_fractal_worker, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_fractal_class(*t))
            _progress(gc, event="class", index=t[1])
    with open(out / "genlog.jsonl", "w") as fh:
        for entry, pixel_list in results:
            class_dir = out / f"class_{entry['class_index']:04d}"
            class_dir.mkdir(exist_ok=True)
            for j, pixels in enumerate(pixel_list):
                _save_image(pixels, class_dir / f"img_{j:04d}.png")
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    _write_spec(out, "gen-fractal", {
        "classes": args.classes, "images": args.images, "seed": seed,
        "min_fill": args.min_fill, "points": args.points, "res": args.res})
    log.info("gen-fractal: %d classes under %s", args.classes, out)
    return 0


def _render_class(mesh_path: str, class_index: int, seed: int, images: int,
                  flat: bool, resolution: int, color: str, fov: float,
                  aniso_mode: str):
    mesh = objio.read_obj(mesh_path)
    color_mode = color if color != "auto" else ("rgb" if mesh.albedo is not None else "gray")
    class_seed = hash64(seed, class_index)
    jobs = render.sample_render_plan(
        class_seed, images, flat, resolution=resolution, color_mode=color_mode,
        fov_deg=fov, aniso_mode=aniso_mode)
    arrays = []
    lines = []
    for j, job in enumerate(jobs):
        job.mesh_ref = Path(mesh_path).name
        img = render.rasterize(job, mesh)
        arrays.append(img.pixels)
        lines.append({
            "class_index": class_index,
            "image_index": j,
            "mesh": Path(mesh_path).name,
            "meshes_root": str(Path(mesh_path).parent),
            "class_seed": class_seed,
            "job": job.to_json(),
        })
    return lines, arrays


def _render_worker(packed):
    return _render_class(*packed)


def cmd_render(args) -> int:
    gc = _global_config(args)
    seed = gc.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh_root = Path(args.meshes)
    mesh_dir = mesh_root / "meshes" if (mesh_root / "meshes").is_dir() else mesh_root
    mesh_paths = sorted(mesh_dir.glob("class_*.obj"))
    if not mesh_paths:
        raise CapacityError(f"no class_*.obj meshes under {mesh_dir}")

    tasks = [(str(p), i, seed, args.images_per_class, args.flat, args.res,
              args.color, args.fov, args.aniso_mode)
             for i, p in enumerate(mesh_paths)]
    if gc.workers > 1:
        with ProcessPoolExecutor(max_workers=gc.workers) as pool:
            results = list(pool.map(_render_worker, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_render_class(*t))
            _progress(gc, event="class", index=t[1])

    with open(out / "renderlog.jsonl", "w") as fh:
        for i, (lines, arrays) in enumerate(results):
            class_dir = out / f"class_{i:04d}"
            class_dir.mkdir(exist_ok=True)
            for j, pixels in enumerate(arrays):
                _save_image(pixels, class_dir / f"img_{j:04d}.png")
            for line in lines:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
    _write_spec(out, "render", {
        "meshes": str(args.meshes), "images_per_class": args.images_per_class,
        "seed": seed, "flat": args.flat, "res": args.res, "color": args.color,
        "fov": args.fov, "aniso_mode": args.aniso_mode})
    log.info("render: %d classes under %s", len(mesh_paths), out)
    return 0


def cmd_mix(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.exists():
        print(f"error: dataset spec file not found: {spec_path}", file=sys.stderr)
        return 2
    spec = ds.DatasetSpec.from_json(json.loads(spec_path.read_text()))
    entries = ds.build_combination(spec, args.out)
    classes = len({e["class_id"] for e in entries})
    print(f"built {classes} classes / {len(entries)} images under {args.out}")
    return 0


def cmd_validate(args) -> int:
    rep = ds.validate_manifest(args.root)
    for f in rep.findings:
        print(f"[{f.kind}] {f.message}")
    print(f"validate: {rep.classes} classes, {rep.images} images, "
          f"{len(rep.findings)} findings")
    return 0 if rep.ok else 2


def cmd_stats(args) -> int:
    stats = ds.dataset_stats(args.root)
    print(f"classes: {stats.class_count}")
    print(f"images per class: {stats.images_per_class}")
    print(f"total bytes: {stats.total_bytes}")
    for src in sorted(stats.per_source):
        s = stats.per_source[src]
        print(f"  {src}: {s.classes} classes, {s.images} images, "
              f"mean foreground {s.mean_foreground:.4f}")
    if args.report:
        written = report.write_stats_report(stats, args.report)
        for path in written:
            print(f"wrote {path}")
    return 0


def cmd_preview(args) -> int:
    sheet = report.build_preview(args.root, args.n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sheet.save(out)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run(argv) -> int:
    parser, registry = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            print("synthforge: a subcommand is required", file=sys.stderr)
            return 1
        if args.command in registry and args.command != "mix" and getattr(args, "spec", None):
            saved = json.loads(Path(args.spec).read_text())
            if saved.get("command") != args.command:
                print(f"error: spec file is for {saved.get('command')!r}, "
                      f"not {args.command!r}", file=sys.stderr)
                return 2
            registry[args.command].set_defaults(**saved["args"])
            args = parser.parse_args(argv)
        missing = [name for name in _REQUIRED[args.command]
                   if getattr(args, name, None) is None]
        if missing:
            raise _UsageError(
                "missing required arguments: "
                + ", ".join("--" + m.replace("_", "-") for m in missing))
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"synthforge: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:     # argparse --help
        return 0 if exc.code in (0, None) else 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SynthforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
