"""Dataset preparation pipeline.

Turns xView-style annotations plus raster scenes into a balanced,
augmented, stratified chip dataset on disk:

    <out>/train/<class>/<image_id>_<n>.png
    <out>/validation/<class>/<image_id>_<n>.png
    <out>/manifest.jsonl
    <out>/class_weights.json
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .augment import augment
from .chips import extract_chip
from .dataset import (AnnotatedScene, cap_and_weight, load_scene,
                      sample_false_detections, split_dataset)
from .errors import DataError
from .geojson_io import AnnotationRecord
from .storage import (ManifestEntry, safe_class_dirname, write_class_weights,
                      write_manifest, write_png)
from .taxonomy import ClassLabel, Taxonomy

log = logging.getLogger("sweepdet.prepare")

AUGMENT_MODES = ("none", "deterministic", "randomized")
SCENE_SUFFIXES = (".tif", ".tiff", ".png")


@dataclass
class PrepareConfig:
    ratio: float = 0.8
    cap: int = 10_000
    chip_size: int = 224
    augment_mode: str = "none"
    #: background samples to synthesize in total; None means "equal to the
    #: mean real-class size"
    false_detections: int | None = None
    #: side length of sampled background boxes; None derives the mean
    #: ground-truth box size
    false_detection_box_size: int | None = None
    seed: int = 0


@dataclass
class PrepareSummary:
    class_counts_before_cap: dict[str, int] = field(default_factory=dict)
    class_counts_after_cap: dict[str, int] = field(default_factory=dict)
    train_chips: int = 0
    validation_chips: int = 0
    dropped_degenerate: int = 0
    dropped_unknown_class: int = 0
    missing_images: list[str] = field(default_factory=list)
    saturated_scenes: list[str] = field(default_factory=list)
    weights: dict[str, float] = field(default_factory=dict)

    @property
    def warning_count(self) -> int:
        return len(self.missing_images) + len(self.saturated_scenes)


def find_scene_files(image_dir) -> dict[str, Path]:
    """Map image_id (file name) to path for every raster in a directory."""
    image_dir = Path(image_dir)
    out: dict[str, Path] = {}
    for path in sorted(image_dir.iterdir()):
        if path.suffix.lower() in SCENE_SUFFIXES:
            out[path.name] = path
    return out


def _mean_class_size(records: Sequence[AnnotationRecord]) -> int:
    counts: dict[ClassLabel, int] = {}
    for rec in records:
        counts[rec.label] = counts.get(rec.label, 0) + 1
    return max(1, round(sum(counts.values()) / len(counts)))


def _mean_box_size(records: Sequence[AnnotationRecord]) -> int:
    sizes = [rec.box.size for rec in records]
    return max(8, round(sum(sizes) / len(sizes)))


def synthesize_false_detections(scenes: Sequence[AnnotatedScene], total: int,
                                box_size: int, fd_label: ClassLabel,
                                seed: int = 0
                                ) -> tuple[list[AnnotationRecord], list[str]]:
    """Spread ``total`` background samples across scenes, skipping scenes
    too small for the box and flagging the ones that saturate."""
    eligible = [s for s in scenes if min(s.width, s.height) >= box_size]
    if not eligible or total <= 0:
        return [], []
    per_scene = [total // len(eligible)] * len(eligible)
    for i in range(total % len(eligible)):
        per_scene[i] += 1

    records: list[AnnotationRecord] = []
    saturated: list[str] = []
    for offset, (scene, count) in enumerate(zip(eligible, per_scene)):
        if count == 0:
            continue
        boxes, hit_limit = sample_false_detections(
            scene, count, box_size, seed=seed + offset)
        if hit_limit:
            saturated.append(scene.image_id)
        records.extend(AnnotationRecord(scene.image_id, box, fd_label)
                       for box in boxes)
    return records, saturated


def prepare_chip_dataset(records: Sequence[AnnotationRecord],
                         scene_paths: Mapping[str, Path], out_dir,
                         taxonomy: Taxonomy,
                         config: PrepareConfig | None = None) -> PrepareSummary:
    """Build the on-disk chip dataset. See the module docstring for layout."""
    config = config or PrepareConfig()
    if config.augment_mode not in AUGMENT_MODES:
        raise ValueError(f"augment_mode must be one of {AUGMENT_MODES}")
    if not records:
        raise DataError("no usable annotation records")
    out_dir = Path(out_dir)
    summary = PrepareSummary()

    referenced = sorted({rec.image_id for rec in records})
    summary.missing_images = [iid for iid in referenced if iid not in scene_paths]
    for missing in summary.missing_images:
        log.warning("annotations reference missing image %s", missing)
    usable = [rec for rec in records if rec.image_id in scene_paths]
    if not usable:
        raise DataError("every annotated image is missing from the image directory")

    scenes: dict[str, AnnotatedScene] = {}
    for image_id in sorted({rec.image_id for rec in usable}):
        scenes[image_id] = load_scene(scene_paths[image_id], image_id, usable)

    # Rebuild records from the clamped scene boxes so chips and manifest
    # agree with what the scenes actually hold.
    clamped: list[AnnotationRecord] = []
    for image_id in sorted(scenes):
        for box, label in scenes[image_id].boxes:
            clamped.append(AnnotationRecord(image_id, box, label))

    fd_label = taxonomy.false_detection
    total_fd = config.false_detections
    if total_fd is None:
        total_fd = _mean_class_size(clamped)
    box_size = config.false_detection_box_size or _mean_box_size(clamped)
    fd_records, summary.saturated_scenes = synthesize_false_detections(
        [scenes[i] for i in sorted(scenes)], total_fd, box_size, fd_label,
        seed=config.seed)

    pool = clamped + fd_records
    train, validation = split_dataset(pool, config.ratio, seed=config.seed)

    for rec in train:
        name = rec.label.name
        summary.class_counts_before_cap[name] = \
            summary.class_counts_before_cap.get(name, 0) + 1
    train, weights = cap_and_weight(train, config.cap, seed=config.seed)
    for rec in train:
        name = rec.label.name
        summary.class_counts_after_cap[name] = \
            summary.class_counts_after_cap.get(name, 0) + 1
    summary.weights = {label.name: w for label, w in weights.items()}

    entries: list[ManifestEntry] = []
    counters: dict[tuple[str, str], int] = {}
    for role, subset in (("train", train), ("validation", validation)):
        for rec in sorted(subset, key=lambda r: (r.label.id, r.image_id,
                                                 r.box.as_tuple())):
            scene = scenes[rec.image_id]
            chip = extract_chip(scene, rec.box, config.chip_size)
            if role == "train" and config.augment_mode != "none":
                variants = augment(chip, mode=config.augment_mode,
                                   seed=config.seed)
            else:
                variants = [chip]
            for augment_index, variant in enumerate(variants):
                key = (role, rec.label.name)
                index = counters.get(key, 0)
                counters[key] = index + 1
                rel = (f"{role}/{safe_class_dirname(rec.label.name)}/"
                       f"{safe_class_dirname(rec.image_id)}_{index}.png")
                write_png(out_dir / rel, variant.pixels)
                entries.append(ManifestEntry(
                    path=rel, role=role, class_id=rec.label.id,
                    class_name=rec.label.name, image_id=rec.image_id,
                    box=rec.box, augment_index=augment_index))
                if role == "train":
                    summary.train_chips += 1
                else:
                    summary.validation_chips += 1

    write_manifest(out_dir / "manifest.jsonl", entries)
    write_class_weights(out_dir / "class_weights.json", weights)
    return summary
