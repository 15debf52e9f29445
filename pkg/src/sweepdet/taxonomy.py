"""Class labels and taxonomies.

A taxonomy is an ordered list of labels; probability vectors produced by
classifier backends are aligned to this order. The shipped default holds
the 60 xView mobile-target classes plus the synthesized background class
"False Detection", which keeps the reserved id 0 (all xView type_ids are
11 or greater).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator

import numpy as np

FALSE_DETECTION_NAME = "False Detection"
FALSE_DETECTION_ID = 0


@dataclass(frozen=True, order=True)
class ClassLabel:
    id: int
    name: str


class Taxonomy:
    """Ordered, duplicate-free collection of class labels."""

    def __init__(self, labels: Iterable[ClassLabel]):
        self._labels = tuple(labels)
        if not self._labels:
            raise ValueError("taxonomy must contain at least one label")
        ids = [lab.id for lab in self._labels]
        names = [lab.name for lab in self._labels]
        if len(set(ids)) != len(ids):
            raise ValueError("class ids must be unique within a taxonomy")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique within a taxonomy")
        self._index = {lab: i for i, lab in enumerate(self._labels)}
        self._by_id = {lab.id: lab for lab in self._labels}
        self._by_name = {lab.name: lab for lab in self._labels}

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[ClassLabel]:
        return iter(self._labels)

    def __contains__(self, label: ClassLabel) -> bool:
        return label in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Taxonomy) and self._labels == other._labels

    def __repr__(self) -> str:
        return f"Taxonomy({len(self._labels)} classes)"

    @property
    def labels(self) -> tuple[ClassLabel, ...]:
        return self._labels

    @property
    def names(self) -> list[str]:
        return [lab.name for lab in self._labels]

    def index_of(self, label: ClassLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValueError(f"{label!r} is not in this taxonomy") from None

    def by_id(self, class_id: int) -> ClassLabel:
        try:
            return self._by_id[class_id]
        except KeyError:
            raise ValueError(f"no class with id {class_id} in this taxonomy") from None

    def by_name(self, name: str) -> ClassLabel:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValueError(f"no class named {name!r} in this taxonomy") from None

    def has_id(self, class_id: int) -> bool:
        return class_id in self._by_id

    def has_name(self, name: str) -> bool:
        return name in self._by_name

    @property
    def false_detection(self) -> ClassLabel:
        return self.by_name(FALSE_DETECTION_NAME)

    @property
    def has_false_detection(self) -> bool:
        return self.has_name(FALSE_DETECTION_NAME)

    def argmax(self, probs) -> tuple[ClassLabel, float]:
        """Winning label of a probability vector; ties break to the lowest id."""
        vec = np.asarray(probs, dtype=np.float64)
        if vec.shape != (len(self._labels),):
            raise ValueError(
                f"probability vector length {vec.shape} does not match "
                f"taxonomy size {len(self._labels)}")
        best = max(range(len(vec)), key=lambda i: (vec[i], -self._labels[i].id))
        return self._labels[best], float(vec[best])

    def to_json(self) -> str:
        return json.dumps([{"id": lab.id, "name": lab.name} for lab in self._labels],
                          indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Taxonomy":
        raw = json.loads(text)
        return cls(ClassLabel(int(item["id"]), str(item["name"])) for item in raw)

    @classmethod
    def from_file(cls, path) -> "Taxonomy":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @classmethod
    def default(cls) -> "Taxonomy":
        """The shipped 61-class taxonomy (60 xView classes + False Detection)."""
        text = resources.files("sweepdet.data").joinpath(
            "xview_taxonomy.json").read_text(encoding="utf-8")
        return cls.from_json(text)
