"""Shared synthetic-shapes fixtures.

Chips and scenes are drawn with numpy: filled disks for one target class,
thick crosses for the other, textured noise for background. The chipset
builder writes exactly the on-disk layout the detection engine prepares
(role/class directories, manifest.jsonl, class_weights.json), which is the
file-schema interface between the two packages.
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image

DISK_CLASS = {"id": 64, "name": "Excavator"}
CROSS_CLASS = {"id": 66, "name": "Ground Grader"}
BACKGROUND_CLASS = {"id": 0, "name": "False Detection"}


def noise_background(rng, side):
    return rng.integers(20, 70, size=(side, side, 3)).astype(np.uint8)


def draw_disk(pixels, cx, cy, radius, value):
    side = pixels.shape[0]
    yy, xx = np.mgrid[0:side, 0:side]
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
    pixels[mask] = value


def draw_cross(pixels, cx, cy, arm, thickness, value):
    pixels[max(0, cy - thickness):cy + thickness,
           max(0, cx - arm):cx + arm] = value
    pixels[max(0, cy - arm):cy + arm,
           max(0, cx - thickness):cx + thickness] = value


def make_chip(kind, rng, side=64):
    pixels = noise_background(rng, side)
    center = side // 2 + int(rng.integers(-4, 5))
    value = int(rng.integers(190, 256))
    if kind == "disk":
        draw_disk(pixels, center, center, side // 2 - 10 + int(rng.integers(-3, 4)),
                  value)
    elif kind == "cross":
        draw_cross(pixels, center, center, side // 2 - 6, side // 8, value)
    elif kind != "background":
        raise ValueError(kind)
    return pixels


def build_chipset(root: Path, per_class=200, side=64, seed=0,
                  classes=(DISK_CLASS, CROSS_CLASS, BACKGROUND_CLASS),
                  train_fraction=0.8):
    """Write a synthetic 3-class chip dataset in the prepared-dataset
    layout and return the manifest path."""
    rng = np.random.default_rng(seed)
    kinds = {"Excavator": "disk", "Ground Grader": "cross",
             "False Detection": "background"}
    entries = []
    for cls in classes:
        kind = kinds[cls["name"]]
        n_train = int(train_fraction * per_class)
        for index in range(per_class):
            role = "train" if index < n_train else "validation"
            rel = f"{role}/{cls['name'].replace('/', '_')}/chip_{index}.png"
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(make_chip(kind, rng, side), mode="RGB").save(path)
            entries.append({
                "path": rel,
                "role": role,
                "class_id": cls["id"],
                "class_name": cls["name"],
                "image_id": f"synthetic_{index}.png",
                "box": [0, 0, side, side],
                "augment_index": 0,
            })
    manifest = root / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    with open(root / "class_weights.json", "w", encoding="utf-8") as fh:
        json.dump({cls["name"]: 1.0 for cls in classes}, fh, indent=2)
    return manifest
