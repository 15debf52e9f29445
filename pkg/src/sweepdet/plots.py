"""Flag-gated plot outputs: confusion heat maps and detection overlays."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .metrics import ConfusionMatrix
from .nms import Detection

OVERLAY_COLOR = (255, 0, 0)


def save_confusion_heatmap(cm: ConfusionMatrix, path):
    """Render the row-normalized confusion matrix as a heat-map image."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = cm.row_normalized()
    names = cm.taxonomy.names
    side = max(4.0, 0.35 * len(names))
    fig, ax = plt.subplots(figsize=(side + 2, side))
    image = ax.imshow(data, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=7)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    fig.colorbar(image, ax=ax, fraction=0.046)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_detection_overlay(pixels: np.ndarray, detections: list[Detection], path):
    """Draw detection boxes (with class and probability) onto the scene."""
    img = Image.fromarray(pixels, mode="RGB")
    draw = ImageDraw.Draw(img)
    for det in detections:
        box = det.box
        draw.rectangle([box.x_min, box.y_min, box.x_max - 1, box.y_max - 1],
                       outline=OVERLAY_COLOR, width=2)
        draw.text((box.x_min + 2, max(0, box.y_min - 10)),
                  f"{det.label.name} {det.prob:.2f}", fill=OVERLAY_COLOR)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG")
