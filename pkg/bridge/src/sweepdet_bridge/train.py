"""Training: fine-tune a classifier on a prepared chip dataset.

The run follows the published regime: weighted cross-entropy with
per-class weights from the dataset's weights file, two epochs at learning
rate 0.0005, dropout 0.6, batch size 16. The optimizer is Adam at a fixed
rate (the regime does not pin one down; the choice is recorded in the
artifact metadata). Alongside the model artifact, the run writes a JSON
log of per-validation-example winning-class probabilities for correctly
classified examples, which is exactly the calibration input the detection
engine consumes.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .manifest import ChipRecord, read_chip_dataset, read_class_weights
from .model import build_model, preprocess

log = logging.getLogger("sweepdet_bridge.train")

FALSE_DETECTION_NAME = "False Detection"


@dataclass
class TrainingRecipe:
    architecture: str = "tiny"
    weights: str = "none"          # "none" | "imagenet"
    epochs: int = 2
    learning_rate: float = 0.0005
    dropout: float = 0.6
    batch_size: int = 16
    augment: str = "none"          # "none" | "flips"
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "weights": self.weights,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "dropout": self.dropout,
            "batch_size": self.batch_size,
            "augment": self.augment,
            "seed": self.seed,
            "optimizer": "adam (fixed rate)",
        }


@dataclass
class TrainingResult:
    validation_accuracy: float
    classes: list[dict]
    chip_size: int
    probability_log: dict[str, list[float]] = field(repr=False, default=None)


def _seed_everything(seed: int):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def _dihedral(pixels: np.ndarray, variant: int) -> np.ndarray:
    out = np.rot90(pixels, variant % 4)
    if variant >= 4:
        out = np.fliplr(out)
    return np.ascontiguousarray(out)


def _load_split(records: list[ChipRecord], class_index: dict[str, int],
                augment: str, rng: random.Random):
    xs, ys = [], []
    for record in records:
        pixels = record.load_pixels()
        if augment == "flips":
            pixels = _dihedral(pixels, rng.randrange(8))
        xs.append(preprocess(pixels))
        ys.append(class_index[record.class_name])
    return torch.stack(xs), torch.tensor(ys, dtype=torch.long)


def train(manifest_path, weights_path, recipe: TrainingRecipe,
          model_out, probs_out) -> TrainingResult:
    """Train on the chip dataset and write the artifact plus the
    validation probability log. Returns per-run statistics."""
    records = read_chip_dataset(manifest_path)
    class_weights = read_class_weights(weights_path)

    names = sorted({r.class_name for r in records})
    missing = [name for name in names if name not in class_weights]
    if missing:
        raise ValueError(
            "classes present in the manifest but absent from the weights "
            "file: " + ", ".join(missing))
    if len(names) < 2:
        raise ValueError(
            "training needs at least two classes (a target class plus "
            f"{FALSE_DETECTION_NAME}); manifest has only {names}")

    train_records = [r for r in records if r.role == "train"]
    val_records = [r for r in records if r.role == "validation"]
    if not train_records or not val_records:
        raise ValueError("manifest must hold both train and validation chips")

    id_by_name = {r.class_name: r.class_id for r in records}
    class_index = {name: i for i, name in enumerate(names)}
    chip_size = train_records[0].load_pixels().shape[0]

    _seed_everything(recipe.seed)
    rng = random.Random(recipe.seed)
    model = build_model(recipe.architecture, num_classes=len(names),
                        dropout=recipe.dropout, weights=recipe.weights)
    weight_vec = torch.tensor([class_weights[name] for name in names],
                              dtype=torch.float32)
    criterion = nn.CrossEntropyLoss(weight=weight_vec)
    optimizer = torch.optim.Adam(model.parameters(), lr=recipe.learning_rate)

    x_train, y_train = _load_split(train_records, class_index,
                                   recipe.augment, rng)
    x_val, y_val = _load_split(val_records, class_index, "none", rng)

    model.train()
    n = len(train_records)
    for epoch in range(recipe.epochs):
        order = torch.randperm(n)
        epoch_loss = 0.0
        for start in range(0, n, recipe.batch_size):
            idx = order[start:start + recipe.batch_size]
            optimizer.zero_grad()
            logits = model(x_train[idx])
            loss = criterion(logits, y_train[idx])
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(idx)
        log.info("epoch %d/%d: mean loss %.4f", epoch + 1, recipe.epochs,
                 epoch_loss / n)

    # Inference is deterministic: dropout off.
    model.eval()
    probability_log: dict[str, list[float]] = {name: [] for name in names}
    correct = 0
    with torch.no_grad():
        for start in range(0, len(val_records), recipe.batch_size):
            stop = start + recipe.batch_size
            probs = torch.softmax(model(x_val[start:stop]), dim=1)
            top_prob, top_idx = probs.max(dim=1)
            for row, record in enumerate(val_records[start:stop]):
                predicted = names[int(top_idx[row])]
                if predicted == record.class_name:
                    correct += 1
                    probability_log[record.class_name].append(
                        float(top_prob[row]))
    accuracy = correct / len(val_records)
    log.info("validation accuracy: %.4f over %d chips", accuracy,
             len(val_records))

    classes = [{"id": id_by_name[name], "name": name} for name in names]
    torch.save({
        "format": "sweepdet-bridge-model",
        "state_dict": model.state_dict(),
        "classes": classes,
        "chip_size": chip_size,
        "recipe": recipe.as_dict(),
        "validation_accuracy": accuracy,
    }, model_out)

    with open(probs_out, "w", encoding="utf-8") as fh:
        json.dump({name: probs for name, probs in probability_log.items()
                   if probs}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return TrainingResult(validation_accuracy=accuracy, classes=classes,
                          chip_size=chip_size,
                          probability_log=probability_log)
