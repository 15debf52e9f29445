"""Sliding-window detection engine and evaluation toolkit for satellite
imagery: dataset preparation, pluggable window classification, threshold
calibration, non-maximal suppression and precision/recall/F1 evaluation.
"""

from .augment import augment, dihedral_variants
from .backends import ClassifierBackend, OracleBackend, PixelStatBackend
from .boxes import BoundingBox, iou
from .calibration import CalibrationStats, calibrate_threshold
from .chips import Chip, extract_chip
from .dataset import (AnnotatedScene, cap_and_weight, load_scene,
                      sample_false_detections, split_dataset)
from .detector import SlidingWindowDetector, detect, score_windows
from .errors import (AnnotationParseError, BackendError, CalibrationError,
                     ConfigError, DataError, HandshakeError, ProtocolError,
                     SweepdetError, TransportError)
from .evaluate import EvaluationResult, evaluate_detections
from .geojson_io import AnnotationRecord, ParseResult, parse_annotations
from .metrics import (ConfusionMatrix, CountTable, MetricsReport,
                      check_reported_percentages, f1, match_detections,
                      percent_half_up, precision_recall)
from .nms import Detection, ScoredWindow, nms
from .remote import RemoteBackend
from .taxonomy import (FALSE_DETECTION_ID, FALSE_DETECTION_NAME, ClassLabel,
                       Taxonomy)
from .windows import WindowGrid, generate_windows, window_sizes_from_boxes

__version__ = "0.1.0"

__all__ = [
    "AnnotatedScene", "AnnotationRecord", "AnnotationParseError",
    "BackendError", "BoundingBox", "CalibrationError", "CalibrationStats",
    "Chip", "ClassLabel", "ClassifierBackend", "ConfigError",
    "ConfusionMatrix", "CountTable", "DataError", "Detection",
    "EvaluationResult", "FALSE_DETECTION_ID", "FALSE_DETECTION_NAME",
    "HandshakeError", "MetricsReport", "OracleBackend", "ParseResult",
    "PixelStatBackend", "ProtocolError", "RemoteBackend", "ScoredWindow",
    "SlidingWindowDetector", "SweepdetError", "Taxonomy", "TransportError",
    "WindowGrid", "augment", "calibrate_threshold", "cap_and_weight",
    "check_reported_percentages", "detect", "dihedral_variants",
    "evaluate_detections", "extract_chip", "f1", "generate_windows", "iou",
    "load_scene", "match_detections", "nms", "parse_annotations",
    "percent_half_up", "precision_recall", "sample_false_detections",
    "score_windows", "split_dataset", "window_sizes_from_boxes",
]
