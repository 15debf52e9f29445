"""Full pipeline on synthetic scenes: prepare -> train -> calibrate ->
detect -> evaluate, consuming the detection engine strictly through its
CLI and file formats, with inference served over the wire protocol."""

import json
import subprocess
import sys

import numpy as np
from PIL import Image

from sweepdet_bridge import ProtocolServer, TrainingRecipe, train

from conftest import draw_cross, draw_disk

SCENE_SIDE = 512
TARGET_SIDE = 64
# Lattice positions are multiples of the detection stride (32), so every
# target has a perfectly aligned window.
LATTICE = [32 + 160 * i for i in range(3)]

DISK_ID = 64      # "Excavator"
CROSS_ID = 66     # "Ground Grader"


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "sweepdet.cli", *map(str, args)],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, \
        f"sweepdet {args[0]} failed ({proc.returncode}):\n{proc.stdout}\n{proc.stderr}"
    return proc


def paint_target(pixels, x, y, kind, rng):
    cx = x + TARGET_SIDE // 2
    cy = y + TARGET_SIDE // 2
    value = int(rng.integers(200, 256))
    if kind == "disk":
        draw_disk(pixels, cx, cy, TARGET_SIDE // 2 - 10, value)
    else:
        draw_cross(pixels, cx, cy, TARGET_SIDE // 2 - 6, TARGET_SIDE // 8,
                   value)


def build_scene(rng, image_id):
    pixels = rng.integers(20, 70, size=(SCENE_SIDE, SCENE_SIDE, 3)
                          ).astype(np.uint8)
    cells = [(x, y) for x in LATTICE for y in LATTICE]
    picks = rng.choice(len(cells), size=int(rng.integers(4, 7)), replace=False)
    features = []
    for pick in picks:
        x, y = cells[pick]
        kind = "disk" if rng.uniform() < 0.5 else "cross"
        paint_target(pixels, x, y, kind, rng)
        features.append({
            "type": "Feature",
            "properties": {
                "image_id": image_id,
                "type_id": DISK_ID if kind == "disk" else CROSS_ID,
                "bounds_imcoords":
                    f"{x},{y},{x + TARGET_SIDE},{y + TARGET_SIDE}",
            },
            "geometry": {"type": "Point", "coordinates": [0, 0]},
        })
    return pixels, features


def write_collection(path, features):
    path.write_text(json.dumps(
        {"type": "FeatureCollection", "features": features}))


def test_prepare_train_calibrate_detect_evaluate(tmp_path):
    rng = np.random.default_rng(424242)

    train_images = tmp_path / "train_images"
    test_images = tmp_path / "test_images"
    train_images.mkdir()
    test_images.mkdir()

    train_features = []
    for index in range(4):
        image_id = f"train_{index}.png"
        pixels, features = build_scene(rng, image_id)
        Image.fromarray(pixels, mode="RGB").save(train_images / image_id)
        train_features.extend(features)
    test_features = []
    for index in range(2):
        image_id = f"test_{index}.png"
        pixels, features = build_scene(rng, image_id)
        Image.fromarray(pixels, mode="RGB").save(test_images / image_id)
        test_features.extend(features)

    train_truth = tmp_path / "train_truth.geojson"
    test_truth = tmp_path / "test_truth.geojson"
    write_collection(train_truth, train_features)
    write_collection(test_truth, test_features)

    # 1. prepare (engine CLI): chips + manifest + class weights
    chipset = tmp_path / "chipset"
    run_cli("prepare", "--annotations", train_truth, "--images", train_images,
            "--out", chipset, "--chip-size", TARGET_SIDE,
            "--augment", "deterministic", "--false-detections", "24",
            "--fd-box-size", TARGET_SIDE, "--seed", "5")

    # 2. train (this package) on the prepared dataset
    recipe = TrainingRecipe(architecture="tiny", epochs=2, seed=1)
    model_path = tmp_path / "model.pt"
    probs_path = tmp_path / "validation_probs.json"
    result = train(chipset / "manifest.jsonl", chipset / "class_weights.json",
                   recipe, model_path, probs_path)
    assert result.validation_accuracy > 0.9

    # 3. calibrate (engine CLI) from the training run's probability log
    thresholds = tmp_path / "thresholds.json"
    run_cli("calibrate", "--from-probs", probs_path, "--out", thresholds)
    named = json.loads(thresholds.read_text())
    assert set(named) == {"Excavator", "Ground Grader"}

    # 4. detect (engine CLI) against the served model
    detections = tmp_path / "detections"
    with ProtocolServer(model_path).start_background() as server:
        run_cli("detect", "--images", test_images, "--thresholds", thresholds,
                "--backend", f"remote:127.0.0.1:{server.port}",
                "--windows", str(TARGET_SIDE), "--overlap", "0.5",
                "--out", detections)

    # 5. evaluate (engine CLI): aggregate F1 at match IoU 0.5
    evaluation = tmp_path / "evaluation"
    run_cli("evaluate", "--detections", detections, "--truth", test_truth,
            "--match-iou", "0.5", "--out", evaluation)
    report = json.loads((evaluation / "report.json").read_text())
    aggregate = report["aggregate"]
    print("pipeline aggregate:", aggregate)
    assert aggregate["f1"] >= 0.9
