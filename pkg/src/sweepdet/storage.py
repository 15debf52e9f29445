"""File formats and atomic persistence.

Everything written here is deterministic for fixed inputs: JSON is emitted
with sorted keys and no timestamps (logs carry those), and files land via
write-temp-then-rename so readers never observe partial output.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .boxes import BoundingBox
from .calibration import CalibrationStats
from .errors import DataError
from .nms import Detection
from .taxonomy import ClassLabel, Taxonomy

DETECTION_CSV_HEADER = ("image_id", "x_min", "y_min", "x_max", "y_max",
                        "class_id", "prob")


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path, payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_png(path, pixels: np.ndarray):
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def safe_class_dirname(name: str) -> str:
    """Class names may contain path separators (e.g. slash-joined names);
    flatten them for use as directory names."""
    return name.replace("/", "_").replace("\\", "_")


# -- chip-set manifest -------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str          # chip image path relative to the dataset root
    role: str          # "train" | "validation"
    class_id: int
    class_name: str
    image_id: str
    box: BoundingBox   # source box in the origin scene
    augment_index: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "path": self.path,
            "role": self.role,
            "class_id": self.class_id,
            "class_name": self.class_name,
            "image_id": self.image_id,
            "box": list(self.box.as_tuple()),
            "augment_index": self.augment_index,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        raw = json.loads(line)
        return cls(path=raw["path"], role=raw["role"],
                   class_id=int(raw["class_id"]), class_name=raw["class_name"],
                   image_id=raw["image_id"], box=BoundingBox(*raw["box"]),
                   augment_index=int(raw.get("augment_index", 0)))

    @property
    def label(self) -> ClassLabel:
        return ClassLabel(self.class_id, self.class_name)


def write_manifest(path, entries: Iterable[ManifestEntry]):
    atomic_write_text(path, "".join(e.to_json() + "\n" for e in entries))


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(ManifestEntry.from_json(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
    return entries


# -- class weights -----------------------------------------------------------

def write_class_weights(path, weights: Mapping[ClassLabel, float]):
    payload = {label.name: weight for label, weight in weights.items()}
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_class_weights(path) -> dict[str, float]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return {str(name): float(w) for name, w in raw.items()}


# -- calibration thresholds --------------------------------------------------

def write_thresholds(path, stats_by_name: Mapping[str, CalibrationStats]):
    payload = {name: stats.as_dict() for name, stats in stats_by_name.items()}
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_thresholds(path) -> dict[str, CalibrationStats]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        return {name: CalibrationStats.from_dict(entry)
                for name, entry in raw.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad thresholds file: {exc}") from exc


# -- validation probability logs ---------------------------------------------

def read_probability_log(path) -> dict[str, list[float]]:
    """Per-class winning probabilities, the calibrate command's alternative
    input (and the format training backends log)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DataError(f"{path}: probability log must map class name to a list")
    return {str(name): [float(p) for p in probs] for name, probs in raw.items()}


def write_probability_log(path, probs_by_name: Mapping[str, Sequence[float]]):
    payload = {name: list(map(float, probs)) for name, probs in probs_by_name.items()}
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- detection CSV -----------------------------------------------------------

def detections_to_csv(rows: Iterable[tuple[str, Detection]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DETECTION_CSV_HEADER)
    for image_id, det in rows:
        writer.writerow([image_id, det.box.x_min, det.box.y_min,
                         det.box.x_max, det.box.y_max, det.label.id,
                         f"{det.prob:.6f}"])
    return buf.getvalue()


def detections_from_csv(text: str, taxonomy: Taxonomy) -> list[tuple[str, Detection]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != DETECTION_CSV_HEADER:
        raise DataError(f"unexpected detection CSV header: {header}")
    out = []
    for row in reader:
        if not row:
            continue
        image_id, x_min, y_min, x_max, y_max, class_id, prob = row
        out.append((image_id, Detection(
            box=BoundingBox(int(x_min), int(y_min), int(x_max), int(y_max)),
            label=taxonomy.by_id(int(class_id)), prob=float(prob))))
    return out
