"""Command-line surface binding the pipeline end to end.

    sweepdet prepare   annotations + imagery -> chip dataset + weights
    sweepdet calibrate chip dataset + backend -> per-class thresholds
    sweepdet detect    imagery + thresholds + backend -> detections
    sweepdet evaluate  detections + ground truth -> metrics report

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 backend or
transport error. The SWEEPDET_LOG environment variable sets the log level.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from ._validation import check_fraction
from .backends import ClassifierBackend, OracleBackend, PixelStatBackend
from .calibration import calibrate_threshold
from .chips import Chip, resize_pixels
from .dataset import load_scene
from .detector import detect
from .errors import (AnnotationParseError, BackendError, CalibrationError,
                     ConfigError, DataError, SweepdetError)
from .evaluate import evaluate_detections
from .geojson_io import (detections_from_geojson, detections_to_geojson,
                         parse_annotations)
from .metrics import check_reported_percentages
from .prepare import (PrepareConfig, find_scene_files, prepare_chip_dataset,
                      SCENE_SUFFIXES)
from .remote import RemoteBackend
from .storage import (atomic_write_text, detections_from_csv,
                      detections_to_csv, read_manifest, read_probability_log,
                      read_thresholds, write_thresholds)
from .taxonomy import Taxonomy
from .windows import window_sizes_from_boxes

log = logging.getLogger("sweepdet.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

WINDOW_SCHEME_ALIASES = {"mean": "mean", "mean+p75": "mean_and_p75",
                         "mean_and_p75": "mean_and_p75"}


def _setup_logging():
    level = os.environ.get("SWEEPDET_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _attach_sidecar_log(out_dir: Path):
    """Timestamps live here, never in the data outputs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter(
        "%(asctime)s %(name)s %(levelname)s %(message)s"))
    handler.setLevel(logging.INFO)
    root = logging.getLogger("sweepdet")
    root.addHandler(handler)
    if root.level > logging.INFO or root.level == logging.NOTSET:
        root.setLevel(logging.INFO)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return raw


def _option(value, config: dict, key: str, default):
    """CLI flag wins, then the config file, then the built-in default."""
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _load_taxonomy(path, config: dict) -> Taxonomy:
    path = _option(path, config, "taxonomy", None)
    if path is None:
        return Taxonomy.default()
    try:
        return Taxonomy.from_file(path)
    except OSError as exc:
        raise DataError(f"cannot read taxonomy file: {exc}") from exc


def _read_text(path, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {what}: {exc}") from exc


def _load_truth(path, taxonomy: Taxonomy):
    """Group ground-truth records by image id."""
    result = parse_annotations(_read_text(path, "ground truth"), taxonomy)
    for _, message in result.feature_errors:
        log.warning("%s", message)
    truth: dict[str, list] = {}
    for rec in result.records:
        truth.setdefault(rec.image_id, []).append((rec.box, rec.label))
    return truth


def _build_backend(spec: str, taxonomy: Taxonomy, truth_path, intervals_path,
                   chip_size: int) -> ClassifierBackend:
    if spec == "oracle":
        if truth_path is None:
            raise ConfigError("the oracle backend requires --truth <geojson>")
        truth = _load_truth(truth_path, taxonomy)
        return OracleBackend(truth, chip_size=chip_size)
    if spec in ("pixel-stat", "pixel_stat"):
        if intervals_path is None:
            raise ConfigError(
                "the pixel-stat backend requires --intervals <json>")
        raw = json.loads(_read_text(intervals_path, "intervals file"))
        intervals = {str(k): (float(v[0]), float(v[1])) for k, v in raw.items()}
        labels = [taxonomy.false_detection]
        for name in intervals:
            if not taxonomy.has_name(name):
                raise ConfigError(f"interval class {name!r} is not in the taxonomy")
            labels.append(taxonomy.by_name(name))
        return PixelStatBackend(intervals, taxonomy=Taxonomy(labels),
                                chip_size=chip_size)
    if spec.startswith("remote:"):
        # Resolve advertised class names against the taxonomy so detections
        # carry the real class ids.
        return RemoteBackend(spec[len("remote:"):], taxonomy=taxonomy)
    raise ConfigError(
        f"unknown backend {spec!r}; expected oracle, pixel-stat or "
        "remote:<host:port>")


def _resolve_window_sizes(windows_spec: str, train_annotations, taxonomy):
    scheme = WINDOW_SCHEME_ALIASES.get(windows_spec)
    if scheme is None:
        try:
            sizes = [int(part) for part in windows_spec.split(",") if part.strip()]
        except ValueError:
            raise ConfigError(
                f"--windows must be mean, mean+p75 or a size list, got "
                f"{windows_spec!r}") from None
        if not sizes or any(s < 1 for s in sizes):
            raise ConfigError("explicit window sizes must be positive integers")
        return sizes
    if train_annotations is None:
        raise ConfigError(
            f"--windows {windows_spec} needs --train-annotations to derive "
            "sizes from training boxes")
    result = parse_annotations(
        _read_text(train_annotations, "training annotations"), taxonomy)
    boxes = [rec.box for rec in result.records]
    if not boxes:
        raise DataError("training annotations contain no usable boxes")
    return window_sizes_from_boxes(boxes, scheme)


@click.group()
def cli():
    """Sliding-window detection and evaluation for satellite imagery."""


@cli.command("prepare")
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--images", "image_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True))
@click.option("--ratio", type=float, default=None, help="Train fraction (0.8).")
@click.option("--cap", type=int, default=None,
              help="Per-class training-example cap (10000).")
@click.option("--chip-size", type=int, default=None, help="Chip side (224).")
@click.option("--augment", "augment_mode",
              type=click.Choice(["none", "deterministic", "randomized"]),
              default=None, help="Training-chip augmentation (deterministic).")
@click.option("--false-detections", type=str, default=None,
              help="Background samples to synthesize: a count or 'auto'.")
@click.option("--fd-box-size", type=int, default=None,
              help="Side of sampled background boxes (auto: mean box size).")
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
def cmd_prepare(annotations, image_dir, out_dir, taxonomy_path, ratio, cap,
                chip_size, augment_mode, false_detections, fd_box_size, seed,
                config_path):
    """Build a balanced, augmented, split chip dataset from annotations."""
    config = _load_config(config_path)
    taxonomy = _load_taxonomy(taxonomy_path, config)
    out_dir = Path(out_dir)

    fd_count = _option(false_detections, config, "false_detections", "auto")
    prep = PrepareConfig(
        ratio=float(_option(ratio, config, "ratio", 0.8)),
        cap=int(_option(cap, config, "cap", 10_000)),
        chip_size=int(_option(chip_size, config, "chip_size", 224)),
        augment_mode=_option(augment_mode, config, "augment", "deterministic"),
        false_detections=None if str(fd_count) == "auto" else int(fd_count),
        false_detection_box_size=_option(fd_box_size, config,
                                         "fd_box_size", None),
        seed=int(_option(seed, config, "seed", 0)),
    )

    result = parse_annotations(_read_text(annotations, "annotations"), taxonomy)
    for _, message in result.feature_errors:
        click.echo(f"warning: {message}", err=True)
    if not result.records:
        raise DataError("annotations contain no usable records")

    _attach_sidecar_log(out_dir)
    summary = prepare_chip_dataset(result.records, find_scene_files(image_dir),
                                   out_dir, taxonomy, prep)

    click.echo("per-class training counts (before -> after cap):")
    for name in sorted(summary.class_counts_before_cap):
        before = summary.class_counts_before_cap[name]
        after = summary.class_counts_after_cap.get(name, 0)
        click.echo(f"  {name}: {before} -> {after}")
    click.echo(f"train chips: {summary.train_chips}")
    click.echo(f"validation chips: {summary.validation_chips}")
    for missing in summary.missing_images:
        click.echo(f"warning: missing image {missing}", err=True)
    for saturated in summary.saturated_scenes:
        click.echo(f"warning: background sampling saturated in {saturated}",
                   err=True)
    if summary.warning_count:
        click.echo(f"{summary.warning_count} warning(s)", err=True)


@cli.command("calibrate")
@click.option("--manifest", type=click.Path(exists=True))
@click.option("--backend", "backend_spec", type=str, default=None)
@click.option("--truth", "truth_path", type=click.Path(exists=True))
@click.option("--intervals", "intervals_path", type=click.Path(exists=True))
@click.option("--from-probs", "probs_path", type=click.Path(exists=True),
              help="Calibrate from a per-class probability log instead of "
                   "running a backend.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--chip-size", type=int, default=None,
              help="Chip side for reference backends (64).")
@click.option("--batch-size", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
def cmd_calibrate(manifest, backend_spec, truth_path, intervals_path,
                  probs_path, out_path, chip_size, batch_size, config_path):
    """Derive per-class acceptance thresholds (mean minus three sigmas)."""
    config = _load_config(config_path)
    taxonomy = _load_taxonomy(None, config)

    if probs_path is not None:
        per_class = read_probability_log(probs_path)
    else:
        if manifest is None:
            raise ConfigError("calibrate needs --manifest or --from-probs")
        spec = _option(backend_spec, config, "backend", None)
        if spec is None:
            raise ConfigError("calibrate needs --backend or --from-probs")
        backend = _build_backend(spec, taxonomy,
                                 _option(truth_path, config, "truth", None),
                                 _option(intervals_path, config, "intervals",
                                         None),
                                 int(_option(chip_size, config, "chip_size",
                                             64)))
        per_class = _collect_validation_probs(
            manifest, backend, int(_option(batch_size, config, "batch_size",
                                           64)))

    stats = {}
    for name in sorted(per_class):
        if name == taxonomy.false_detection.name:
            continue
        probs = per_class[name]
        if not probs:
            click.echo(f"warning: no correct validation predictions for "
                       f"{name}; threshold omitted", err=True)
            continue
        stats[name] = calibrate_threshold(probs)
    if not stats:
        raise CalibrationError("no class produced a calibration threshold")
    write_thresholds(out_path, stats)
    for name in sorted(stats):
        entry = stats[name]
        click.echo(f"{name}: mu={entry.mu:.6f} sigma={entry.sigma:.6f} "
                   f"threshold={entry.threshold:.6f}")


def _collect_validation_probs(manifest_path, backend: ClassifierBackend,
                              batch_size: int) -> dict[str, list[float]]:
    entries = [e for e in read_manifest(manifest_path) if e.role == "validation"]
    if not entries:
        raise DataError("manifest holds no validation chips")
    taxonomy = backend.taxonomy()
    root = Path(manifest_path).parent
    per_class: dict[str, list[float]] = {}

    from PIL import Image
    import numpy as np
    for start in range(0, len(entries), batch_size):
        batch = entries[start:start + batch_size]
        chips = []
        for entry in batch:
            with Image.open(root / entry.path) as img:
                pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
            chips.append(Chip(pixels=resize_pixels(pixels, backend.chip_size),
                              image_id=entry.image_id, source_box=entry.box))
        for entry, probs in zip(batch, backend.classify_batch(chips)):
            predicted, best_prob = taxonomy.argmax(probs)
            per_class.setdefault(entry.class_name, [])
            if predicted.name == entry.class_name:
                per_class[entry.class_name].append(best_prob)
    return per_class


@cli.command("detect")
@click.option("--images", "images_path", required=True,
              type=click.Path(exists=True))
@click.option("--thresholds", "thresholds_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--backend", "backend_spec", type=str, default=None)
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True))
@click.option("--truth", "truth_path", type=click.Path(exists=True))
@click.option("--intervals", "intervals_path", type=click.Path(exists=True))
@click.option("--windows", "windows_spec", type=str, default=None,
              help="mean, mean+p75, or explicit sizes like 64,96.")
@click.option("--train-annotations", type=click.Path(exists=True),
              help="Boxes used to derive window sizes for mean schemes.")
@click.option("--overlap", type=float, default=None)
@click.option("--nms-iou", type=float, default=None)
@click.option("--per-class-nms", is_flag=True, default=False)
@click.option("--chip-size", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--plot", is_flag=True, default=False,
              help="Also write detection overlays.")
@click.option("--config", "config_path", type=click.Path(exists=True))
def cmd_detect(images_path, thresholds_path, out_dir, backend_spec,
               taxonomy_path, truth_path, intervals_path, windows_spec,
               train_annotations, overlap, nms_iou, per_class_nms, chip_size,
               batch_size, jobs, seed, plot, config_path):
    """Run sliding-window detection over one image or a directory."""
    config = _load_config(config_path)
    taxonomy = _load_taxonomy(taxonomy_path, config)
    out_dir = Path(out_dir)
    _attach_sidecar_log(out_dir)

    spec = _option(backend_spec, config, "backend", None)
    if spec is None:
        raise ConfigError("detect needs --backend (or backend in --config)")
    backend = _build_backend(spec, taxonomy,
                             _option(truth_path, config, "truth", None),
                             _option(intervals_path, config, "intervals", None),
                             int(_option(chip_size, config, "chip_size", 64)))

    sizes = _resolve_window_sizes(
        _option(windows_spec, config, "windows", "mean_and_p75"),
        _option(train_annotations, config, "train_annotations", None),
        taxonomy)
    overlap = float(_option(overlap, config, "overlap", 0.5))
    nms_iou = float(_option(nms_iou, config, "nms_iou", 0.3))
    batch_size = int(_option(batch_size, config, "batch_size", 64))
    jobs = int(_option(jobs, config, "jobs", 1))
    try:
        check_fraction("overlap", overlap, 0.0, 1.0, inclusive_high=False)
        check_fraction("nms_iou", nms_iou, 0.0, 1.0, inclusive_low=False)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    named = read_thresholds(thresholds_path)
    backend_tax = backend.taxonomy()
    thresholds = {}
    for name, stats in named.items():
        if backend_tax.has_name(name):
            thresholds[name] = stats
        else:
            log.warning("threshold for %r ignored: class not in backend "
                        "taxonomy", name)

    images_path = Path(images_path)
    if images_path.is_dir():
        files = [p for p in sorted(images_path.iterdir())
                 if p.suffix.lower() in SCENE_SUFFIXES]
    else:
        files = [images_path]
    if not files:
        raise DataError(f"no images found under {images_path}")

    def run_one(path: Path):
        scene = load_scene(path)
        detections = detect(scene, backend, window_sizes=sizes,
                            thresholds=thresholds, overlap=overlap,
                            nms_iou=nms_iou, per_class_nms=per_class_nms,
                            batch_size=batch_size,
                            n_jobs=1 if len(files) > 1 else jobs)
        return scene, detections

    results = []
    failures = 0
    if jobs > 1 and len(files) > 1 and not backend.single_consumer:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [(path, pool.submit(run_one, path)) for path in files]
            for path, fut in futures:
                try:
                    results.append(fut.result())
                except (OSError, DataError, ValueError) as exc:
                    failures += 1
                    click.echo(f"error: {path}: {exc}", err=True)
    else:
        for path in files:
            try:
                results.append(run_one(path))
            except (OSError, DataError, ValueError) as exc:
                failures += 1
                click.echo(f"error: {path}: {exc}", err=True)

    csv_rows = []
    for scene, detections in results:
        stem = Path(scene.image_id).stem
        atomic_write_text(out_dir / f"{stem}_detections.geojson",
                          detections_to_geojson(scene.image_id, detections))
        if plot:
            from .plots import save_detection_overlay
            save_detection_overlay(scene.pixels, detections,
                                   out_dir / f"{stem}_overlay.png")
        csv_rows.extend((scene.image_id, det) for det in detections)
        click.echo(f"{scene.image_id}: {len(detections)} detection(s)")
    atomic_write_text(out_dir / "detections.csv", detections_to_csv(csv_rows))
    if failures:
        click.echo(f"{failures} image(s) failed", err=True)


@cli.command("evaluate")
@click.option("--detections", "detections_path", required=True,
              type=click.Path(exists=True))
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True))
@click.option("--match-iou", type=float, default=None)
@click.option("--expect-percent", "expect_percent", type=str, default=None,
              help="Printed 'precision,recall' percentages to cross-check.")
@click.option("--plot", is_flag=True, default=False,
              help="Also render the confusion heat map.")
@click.option("--config", "config_path", type=click.Path(exists=True))
def cmd_evaluate(detections_path, truth_path, out_dir, taxonomy_path,
                 match_iou, expect_percent, plot, config_path):
    """Score detections against ground truth and emit reports."""
    config = _load_config(config_path)
    taxonomy = _load_taxonomy(taxonomy_path, config)
    out_dir = Path(out_dir)
    _attach_sidecar_log(out_dir)
    match_iou = float(_option(match_iou, config, "match_iou", 0.5))

    detections_by_image: dict[str, list] = {}
    try:
        for image_id, det in _read_detections(Path(detections_path), taxonomy):
            detections_by_image.setdefault(image_id, []).append(det)
    except ValueError as exc:
        raise DataError(f"taxonomy mismatch between files: {exc}") from exc

    truth = _load_truth(truth_path, taxonomy)
    try:
        result = evaluate_detections(detections_by_image, truth, taxonomy,
                                     match_iou=match_iou)
    except ValueError as exc:
        raise DataError(f"taxonomy mismatch between files: {exc}") from exc

    report = result.as_dict()
    if expect_percent is not None:
        try:
            expected_p, expected_r = (int(v) for v in expect_percent.split(","))
        except ValueError:
            raise ConfigError(
                "--expect-percent must look like '92,96'") from None
        check = check_reported_percentages(result.aggregate, expected_p,
                                           expected_r)
        report["printed_check"] = check.as_dict()
        if check.verdict == "transposed":
            click.echo(
                "note: printed percentages match the computed values only "
                "with the precision/recall labels transposed", err=True)

    atomic_write_text(out_dir / "report.json",
                      json.dumps(report, indent=2, sort_keys=True) + "\n")
    text = result.render_text()
    atomic_write_text(out_dir / "report.txt", text)
    atomic_write_text(out_dir / "confusion.csv", result.confusion.to_csv())
    if plot:
        from .plots import save_confusion_heatmap
        save_confusion_heatmap(result.confusion, out_dir / "confusion.png")
    click.echo(text)


def _read_detections(path: Path, taxonomy: Taxonomy):
    if path.is_dir():
        pairs = []
        for child in sorted(path.iterdir()):
            if child.suffix == ".geojson":
                pairs.extend(detections_from_geojson(
                    _read_text(child, "detections"), taxonomy))
        return pairs
    text = _read_text(path, "detections")
    if path.suffix == ".csv":
        return detections_from_csv(text, taxonomy)
    return detections_from_geojson(text, taxonomy)


def main(argv=None) -> int:
    _setup_logging()
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_CONFIG
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    except (AnnotationParseError, CalibrationError, DataError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except BackendError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_BACKEND
    except SweepdetError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
