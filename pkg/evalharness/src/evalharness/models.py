"""Small residual classifiers and feature extraction."""
from __future__ import annotations

import torch
import torch.nn as nn

from .errors import ParameterError


class ResidualBlock(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or cin != cout:
            self.skip = nn.Sequential(nn.Conv2d(cin, cout, 1, stride, bias=False),
                                      nn.BatchNorm2d(cout))
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.skip(x))


class SmallResNet(nn.Module):
    """Stem conv + residual blocks + GAP + linear head.

    The default 3-block configuration has 8 weight layers (1 stem + 6 block
    convs + 1 head), the reduced-depth stand-in for a full ResNet-50.
    """

    def __init__(self, blocks, classes: int, width: int = 16):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(3, width, 3, 1, 1, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True))
        layers = []
        cin = width
        for cout, stride in blocks:
            layers.append(ResidualBlock(cin, cout, stride))
            cin = cout
        self.blocks = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(cin, classes)
        self.feature_dim = cin

    def features(self, x):
        """Final pre-classifier pooled features."""
        return self.pool(self.blocks(self.stem(x))).flatten(1)

    def forward(self, x):
        return self.head(self.features(x))


_ARCHS = {
    "resnet8": [(16, 1), (32, 2), (64, 2)],
    "resnet14": [(16, 1), (16, 1), (32, 2), (32, 1), (64, 2), (64, 1)],
}


def build_model(arch: str, classes: int) -> nn.Module:
    if arch in _ARCHS:
        return SmallResNet(_ARCHS[arch], classes)
    if arch == "resnet50":
        from torchvision.models import resnet50
        model = resnet50(weights=None, num_classes=classes)
        model.feature_dim = model.fc.in_features
        return model
    raise ParameterError(f"unknown architecture tag {arch!r}")


def replace_head(model: nn.Module, classes: int) -> nn.Module:
    if isinstance(model, SmallResNet):
        model.head = nn.Linear(model.feature_dim, classes)
    else:
        model.fc = nn.Linear(model.feature_dim, classes)
    return model


@torch.no_grad()
def extract_features(model: nn.Module, images: torch.Tensor, layer: str = None,
                     batch_size: int = 64):
    """Stimuli-by-dimension feature matrix from a named layer.

    Default layer is the final pre-classifier pooled representation.
    """
    model.eval()
    chunks = []
    if layer is None:
        for i in range(0, len(images), batch_size):
            batch = images[i:i + batch_size]
            if isinstance(model, SmallResNet):
                chunks.append(model.features(batch))
            else:
                modules = dict(model.named_children())
                x = batch
                for name, mod in modules.items():
                    if name == "fc":
                        break
                    x = mod(x)
                chunks.append(torch.flatten(x, 1))
        return torch.cat(chunks).numpy()

    modules = dict(model.named_modules())
    if layer not in modules:
        raise ParameterError(f"no layer named {layer!r}")
    grabbed = {}

    def hook(_mod, _inp, out):
        grabbed["value"] = out

    handle = modules[layer].register_forward_hook(hook)
    try:
        for i in range(0, len(images), batch_size):
            model(images[i:i + batch_size])
            chunks.append(torch.flatten(grabbed["value"], 1))
    finally:
        handle.remove()
    return torch.cat(chunks).numpy()
