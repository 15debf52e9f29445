"""GeoJSON ingestion and emission.

Ground truth arrives as an xView-style FeatureCollection where each feature
carries ``properties.image_id``, ``properties.type_id`` (integer class id)
and ``properties.bounds_imcoords`` ("x_min,y_min,x_max,y_max" in pixels).
Detections leave as a FeatureCollection of pixel-space polygons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .boxes import BoundingBox
from .errors import AnnotationParseError
from .taxonomy import ClassLabel, Taxonomy

REQUIRED_PROPERTIES = ("image_id", "type_id", "bounds_imcoords")


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    box: BoundingBox
    label: ClassLabel


@dataclass
class ParseResult:
    records: list[AnnotationRecord] = field(default_factory=list)
    dropped_degenerate: int = 0
    dropped_unknown_class: int = 0
    feature_errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def drop_count(self) -> int:
        return self.dropped_degenerate + self.dropped_unknown_class

    def __add__(self, other: "ParseResult") -> "ParseResult":
        """Associative merge, for per-scene parallel ingestion."""
        return ParseResult(
            records=self.records + other.records,
            dropped_degenerate=self.dropped_degenerate + other.dropped_degenerate,
            dropped_unknown_class=(self.dropped_unknown_class
                                   + other.dropped_unknown_class),
            feature_errors=self.feature_errors + other.feature_errors)


def _parse_bounds(raw: str) -> tuple[int, int, int, int]:
    parts = [p.strip() for p in str(raw).split(",")]
    if len(parts) != 4:
        raise ValueError(f"bounds_imcoords must have 4 components, got {raw!r}")
    return tuple(int(round(float(p))) for p in parts)  # type: ignore[return-value]


def parse_annotations(geojson_text: str, taxonomy: Taxonomy) -> ParseResult:
    """Parse an xView-style FeatureCollection into annotation records.

    Features whose type_id is not in the taxonomy are dropped and counted,
    as are boxes with non-positive area or negative-only extents. Features
    missing a required property are recorded as feature-level errors and
    skipped. Malformed JSON raises AnnotationParseError with the byte
    offset of the syntax error.
    """
    try:
        doc = json.loads(geojson_text)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(
            f"malformed JSON at byte offset {exc.pos}: {exc.msg}", offset=exc.pos
        ) from exc

    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise AnnotationParseError("document is not a GeoJSON FeatureCollection")

    result = ParseResult()
    for idx, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        missing = [name for name in REQUIRED_PROPERTIES if name not in props]
        if missing:
            result.feature_errors.append(
                (idx, f"feature {idx} missing required properties: {', '.join(missing)}"))
            continue
        try:
            x_min, y_min, x_max, y_max = _parse_bounds(props["bounds_imcoords"])
            type_id = int(props["type_id"])
        except (ValueError, TypeError) as exc:
            result.feature_errors.append((idx, f"feature {idx}: {exc}"))
            continue

        if x_min >= x_max or y_min >= y_max or x_max <= 0 or y_max <= 0:
            result.dropped_degenerate += 1
            continue
        if not taxonomy.has_id(type_id):
            result.dropped_unknown_class += 1
            continue
        # Negative corners are clipped here; full clamping to the scene
        # happens at scene-attachment time when dimensions are known.
        box = BoundingBox(max(0, x_min), max(0, y_min), x_max, y_max)
        result.records.append(AnnotationRecord(
            image_id=str(props["image_id"]), box=box, label=taxonomy.by_id(type_id)))
    return result


def annotations_to_geojson(records) -> str:
    """Inverse of parse_annotations, used to persist synthesized classes."""
    features = []
    for rec in records:
        box = rec.box
        features.append({
            "type": "Feature",
            "properties": {
                "image_id": rec.image_id,
                "type_id": rec.label.id,
                "bounds_imcoords": f"{box.x_min},{box.y_min},{box.x_max},{box.y_max}",
            },
            "geometry": _box_polygon(box),
        })
    return json.dumps({"type": "FeatureCollection", "features": features},
                      indent=2, sort_keys=True)


def _box_polygon(box: BoundingBox) -> dict:
    ring = [
        [box.x_min, box.y_min],
        [box.x_max, box.y_min],
        [box.x_max, box.y_max],
        [box.x_min, box.y_max],
        [box.x_min, box.y_min],
    ]
    return {"type": "Polygon", "coordinates": [ring]}


def detections_to_geojson(image_id: str, detections) -> str:
    """Serialize detections for one scene as a FeatureCollection."""
    features = []
    for det in detections:
        features.append({
            "type": "Feature",
            "properties": {
                "image_id": image_id,
                "class_name": det.label.name,
                "class_id": det.label.id,
                "prob": det.prob,
                "scale_index": det.scale_index,
            },
            "geometry": _box_polygon(det.box),
        })
    return json.dumps({"type": "FeatureCollection", "features": features},
                      indent=2, sort_keys=True)


def detections_from_geojson(text: str, taxonomy: Taxonomy):
    """Read a detections FeatureCollection back into (image_id, Detection) pairs."""
    from .nms import Detection  # local import to avoid a cycle

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(
            f"malformed JSON at byte offset {exc.pos}: {exc.msg}", offset=exc.pos
        ) from exc
    pairs = []
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        ring = feature["geometry"]["coordinates"][0]
        xs = [pt[0] for pt in ring]
        ys = [pt[1] for pt in ring]
        box = BoundingBox(int(min(xs)), int(min(ys)), int(max(xs)), int(max(ys)))
        label = taxonomy.by_id(int(props["class_id"]))
        if label.name != props.get("class_name", label.name):
            raise AnnotationParseError(
                f"class id {label.id} is named {label.name!r} in the taxonomy "
                f"but {props['class_name']!r} in the detections file")
        pairs.append((str(props["image_id"]),
                      Detection(box=box, label=label, prob=float(props["prob"]),
                                scale_index=int(props.get("scale_index", 0)))))
    return pairs
