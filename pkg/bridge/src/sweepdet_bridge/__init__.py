"""CNN classifier backend for the sliding-window detection engine.

Trains an image classifier on a prepared chip dataset and serves it over
the newline-delimited JSON wire protocol (version "1") that the detection
engine speaks. The engine is consumed only through its published file
schemas (chip manifest, class weights, probability log) and the wire
protocol; there is no code dependency on it.
"""

from .manifest import ChipRecord, read_chip_dataset, read_class_weights
from .model import build_model
from .serve import ProtocolServer
from .train import TrainingRecipe, train

__version__ = "0.1.0"

__all__ = [
    "ChipRecord", "ProtocolServer", "TrainingRecipe", "build_model",
    "read_chip_dataset", "read_class_weights", "train",
]
