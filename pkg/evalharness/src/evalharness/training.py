"""Supervised pre-training and fine-tuning at desk scale."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .data import ArrayDataset, SplitDataset, load_manifest_dataset
from .errors import DataError, ParameterError
from .models import build_model, replace_head


@dataclass
class TrainRun:
    manifest: str
    epochs: int
    checkpoint: str
    arch: str = "resnet8"
    optimizer: str = "adam"           # "adam" | "sgd"
    lr: float = 0.002
    schedule: str = "cosine"          # "cosine" | "constant"
    batch_size: int = 16
    image_size: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.schedule not in ("cosine", "constant"):
            raise ParameterError("schedule must be cosine or constant")
        if self.optimizer not in ("adam", "sgd"):
            raise ParameterError("optimizer must be adam or sgd")


def _set_determinism(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def _epoch_order(n: int, epochs: int, seed: int) -> list:
    """Shared batch-order source: the fine-tuned and random-init arms must
    consume identical shuffles, so the order depends only on (n, epochs, seed)."""
    rng = np.random.default_rng(seed)
    return [rng.permutation(n) for _ in range(epochs)]


def _lr_at(base: float, schedule: str, epoch: int, epochs: int) -> float:
    if schedule == "constant":
        return base
    return base * 0.5 * (1.0 + math.cos(math.pi * epoch / epochs))


def _train(model: nn.Module, data: ArrayDataset, epochs: int, lr: float,
           schedule: str, batch_size: int, order, optimizer: str = "adam") -> float:
    loss_fn = nn.CrossEntropyLoss()
    if optimizer == "sgd":
        opt = torch.optim.SGD(model.parameters(), lr=lr, momentum=0.9)
    else:
        opt = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    final_loss = 0.0
    for epoch in range(epochs):
        for group in opt.param_groups:
            group["lr"] = _lr_at(lr, schedule, epoch, epochs)
        perm = order[epoch]
        total = 0.0
        for i in range(0, len(perm), batch_size):
            idx = perm[i:i + batch_size]
            x = data.images[idx]
            y = data.labels[idx]
            opt.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        final_loss = total / len(perm)
    return final_loss


@torch.no_grad()
def _accuracy(model: nn.Module, data: ArrayDataset, batch_size: int = 64) -> float:
    model.eval()
    hits = 0
    for i in range(0, len(data), batch_size):
        logits = model(data.images[i:i + batch_size])
        hits += int((logits.argmax(dim=1) == data.labels[i:i + batch_size]).sum())
    return hits / len(data)


def pretrain(run: TrainRun) -> dict:
    """Train a classifier on a manifest dataset; returns the result record.

    The checkpoint (model weights + architecture + class count) is written to
    run.checkpoint and reloadable with load_checkpoint.
    """
    run.validate()
    data = load_manifest_dataset(run.manifest, run.image_size)
    if data.class_count < 2:
        raise DataError("pre-training needs at least 2 classes")

    _set_determinism(run.seed)
    model = build_model(run.arch, data.class_count)
    order = _epoch_order(len(data), run.epochs, run.seed)
    final_loss = _train(model, data, run.epochs, run.lr, run.schedule,
                        run.batch_size, order, run.optimizer)
    train_accuracy = _accuracy(model, data)

    Path(run.checkpoint).parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        "arch": run.arch,
        "classes": data.class_count,
        "image_size": run.image_size,
        "state_dict": model.state_dict(),
        "seed": run.seed,
        "epochs": run.epochs,
    }, run.checkpoint)
    return {
        "checkpoint": str(run.checkpoint),
        "final_train_loss": final_loss,
        "train_accuracy": train_accuracy,
        "classes": data.class_count,
        "images": len(data),
    }


def load_checkpoint(path):
    state = torch.load(path, map_location="cpu", weights_only=True)
    model = build_model(state["arch"], state["classes"])
    model.load_state_dict(state["state_dict"])
    return model, state


@dataclass
class FinetuneResult:
    pretrained_accuracy: float
    random_init_accuracy: float
    epochs: int
    target_classes: int
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "pretrained_accuracy": self.pretrained_accuracy,
            "random_init_accuracy": self.random_init_accuracy,
            "epochs": self.epochs,
            "target_classes": self.target_classes,
            **self.details,
        }


def finetune(checkpoint_path, target: SplitDataset, epochs: int,
             lr: float = 0.002, schedule: str = "cosine", batch_size: int = 16,
             seed: int = 0, arch: Optional[str] = None,
             optimizer: str = "adam") -> FinetuneResult:
    """Fine-tune a pretrained checkpoint on the target's train split and
    report held-out accuracy, alongside a random-initialization control that
    consumes the identical batch order and budget."""
    if epochs < 1:
        raise ParameterError("epochs must be >= 1")
    classes = target.train.class_count
    order = _epoch_order(len(target.train), epochs, seed)

    _set_determinism(seed)
    model, state = load_checkpoint(checkpoint_path)
    replace_head(model, classes)     # class-count mismatch is handled, never an error
    _train(model, target.train, epochs, lr, schedule, batch_size, order, optimizer)
    pretrained_acc = _accuracy(model, target.test)

    _set_determinism(seed)
    control = build_model(arch or state["arch"], classes)
    _train(control, target.train, epochs, lr, schedule, batch_size, order, optimizer)
    control_acc = _accuracy(control, target.test)

    return FinetuneResult(
        pretrained_accuracy=pretrained_acc,
        random_init_accuracy=control_acc,
        epochs=epochs,
        target_classes=classes,
        details={"train_images": len(target.train), "test_images": len(target.test)},
    )
