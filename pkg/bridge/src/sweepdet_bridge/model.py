"""Classifier architectures.

"tiny" is a small convnet sized for desk-scale runs on synthetic chips.
The two full-scale architectures are available by name through
torchvision; pretrained initialization requires downloaded weights, so it
is opt-in via the recipe's weights field.
"""

from __future__ import annotations

import torch
from torch import nn

ARCHITECTURES = ("tiny", "resnet50", "densenet161")


class TinyConvNet(nn.Module):
    def __init__(self, num_classes: int, dropout: float = 0.6):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(32, 64, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(4),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Dropout(dropout),
            nn.Linear(64 * 4 * 4, 128),
            nn.ReLU(inplace=True),
            nn.Dropout(dropout),
            nn.Linear(128, num_classes),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


def build_model(architecture: str, num_classes: int, dropout: float = 0.6,
                weights: str = "none") -> nn.Module:
    if architecture == "tiny":
        return TinyConvNet(num_classes, dropout=dropout)
    if architecture == "resnet50":
        from torchvision.models import resnet50
        model = resnet50(weights="IMAGENET1K_V1" if weights == "imagenet"
                         else None)
        model.fc = nn.Sequential(nn.Dropout(dropout),
                                 nn.Linear(model.fc.in_features, num_classes))
        return model
    if architecture == "densenet161":
        from torchvision.models import densenet161
        model = densenet161(weights="IMAGENET1K_V1" if weights == "imagenet"
                            else None)
        model.classifier = nn.Sequential(
            nn.Dropout(dropout),
            nn.Linear(model.classifier.in_features, num_classes))
        return model
    raise ValueError(f"architecture must be one of {ARCHITECTURES}, "
                     f"got {architecture!r}")


def preprocess(pixels) -> torch.Tensor:
    """uint8 HxWx3 -> float CxHxW in [-1, 1]."""
    tensor = torch.from_numpy(pixels.copy()).float().permute(2, 0, 1) / 255.0
    return tensor * 2.0 - 1.0
