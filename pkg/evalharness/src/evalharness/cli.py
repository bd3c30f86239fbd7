"""evalharness command-line interface.

Subcommands (all driven by a JSON config): pretrain, finetune, predictivity,
rsa. Results are printed as JSON on stdout and written to results.json in the
output directory.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import load_manifest_dataset, make_toy_target, split_dataset
from .errors import HarnessError
from .models import extract_features
from .predictivity import neural_predictivity, synthetic_responses
from .rsa import rsa
from .training import TrainRun, finetune, load_checkpoint, pretrain


def _load_features(cfg: dict) -> np.ndarray:
    if "features" in cfg:
        return np.load(cfg["features"])
    model, state = load_checkpoint(cfg["checkpoint"])
    data = load_manifest_dataset(cfg["manifest"],
                                 cfg.get("image_size", state["image_size"]))
    return extract_features(model, data.images, cfg.get("layer"))


def _load_responses(cfg: dict, features: np.ndarray):
    if "responses" in cfg:
        return np.load(cfg["responses"]), None
    synth = cfg["synthetic"]
    return synthetic_responses(features, synth["channels"],
                               synth["noise_sigma"], synth.get("seed", 0))


def cmd_pretrain(cfg: dict) -> dict:
    run = TrainRun(
        manifest=cfg["manifest"],
        epochs=cfg["epochs"],
        checkpoint=cfg["checkpoint"],
        arch=cfg.get("arch", "resnet8"),
        optimizer=cfg.get("optimizer", "adam"),
        lr=cfg.get("lr", 0.002),
        schedule=cfg.get("schedule", "cosine"),
        batch_size=cfg.get("batch_size", 16),
        image_size=cfg.get("image_size", 64),
        seed=cfg.get("seed", 0),
    )
    return pretrain(run)


def _target_from_config(cfg: dict):
    target = cfg["target"]
    if target.get("kind") == "toy":
        data = make_toy_target(
            classes=target.get("classes", 10),
            images_per_class=target.get("images_per_class", 20),
            image_size=target.get("image_size", 64),
            seed=target.get("seed", 0))
    else:
        data = load_manifest_dataset(target["path"], target.get("image_size", 64))
    return split_dataset(data, cfg.get("test_fraction", 0.25),
                         cfg.get("split_seed", 0))


def cmd_finetune(cfg: dict) -> dict:
    result = finetune(
        cfg["checkpoint"],
        _target_from_config(cfg),
        epochs=cfg["epochs"],
        lr=cfg.get("lr", 0.002),
        schedule=cfg.get("schedule", "cosine"),
        batch_size=cfg.get("batch_size", 16),
        seed=cfg.get("seed", 0),
        optimizer=cfg.get("optimizer", "adam"),
    )
    out = result.to_json()
    arm = "pretrained" if result.pretrained_accuracy >= result.random_init_accuracy \
        else "random-init"
    out["comparison"] = (
        f"pretrained {result.pretrained_accuracy:.4f} vs "
        f"random-init {result.random_init_accuracy:.4f} ({arm} ahead)")
    return out


def cmd_predictivity(cfg: dict) -> dict:
    features = _load_features(cfg)
    responses, record = _load_responses(cfg, features)
    result = neural_predictivity(
        features, responses,
        folds=cfg.get("folds", 10),
        components=cfg.get("components", 25),
        seed=cfg.get("seed", 0))
    out = result.to_json()
    if record:
        out["synthetic_responses"] = record
    return out


def cmd_rsa(cfg: dict) -> dict:
    features = _load_features(cfg)
    responses, record = _load_responses(cfg, features)
    out = rsa(features, responses).to_json()
    if record:
        out["synthetic_responses"] = record
    return out


_COMMANDS = {
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "predictivity": cmd_predictivity,
    "rsa": cmd_rsa,
}


def run(argv) -> int:
    parser = argparse.ArgumentParser(
        prog="evalharness",
        description="Transfer-learning and neural-predictivity harness")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default=".", help="directory for results.json")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    try:
        cfg = json.loads(Path(args.config).read_text())
        result = _COMMANDS[args.command](cfg)
    except (HarnessError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc!r}", file=sys.stderr)
        return 2

    payload = {"command": args.command, "result": result}
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.json").write_text(text + "\n")
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
