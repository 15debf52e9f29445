"""Reader for the chip-dataset layout the detection engine prepares.

The dataset root holds ``manifest.jsonl`` (one JSON record per chip with
path, role, class id/name, source image and box), ``class_weights.json``
(class name to positive weight) and the chip PNGs themselves under
``<role>/<class>/``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class ChipRecord:
    path: Path
    role: str
    class_id: int
    class_name: str
    image_id: str
    augment_index: int = 0

    def load_pixels(self) -> np.ndarray:
        with Image.open(self.path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)


def read_chip_dataset(manifest_path) -> list[ChipRecord]:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    records = []
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                records.append(ChipRecord(
                    path=root / raw["path"],
                    role=str(raw["role"]),
                    class_id=int(raw["class_id"]),
                    class_name=str(raw["class_name"]),
                    image_id=str(raw["image_id"]),
                    augment_index=int(raw.get("augment_index", 0)),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(
                    f"{manifest_path}:{lineno}: bad manifest line: {exc}"
                ) from exc
    if not records:
        raise ValueError(f"{manifest_path}: manifest holds no chips")
    return records


def read_class_weights(path) -> dict[str, float]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not raw:
        raise ValueError(f"{path}: class weights must be a non-empty object")
    weights = {str(name): float(value) for name, value in raw.items()}
    if any(value <= 0 for value in weights.values()):
        raise ValueError(f"{path}: class weights must be positive")
    return weights
