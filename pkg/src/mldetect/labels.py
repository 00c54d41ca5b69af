"""Label PowerSet codec: each observed label set becomes one class id."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ArgumentError, ClassRangeError, UnknownClassError


def set_key(labels):
    return tuple(sorted(labels))


class PowersetCodec:
    """Bijection between registered label sets and ``0..n_classes-1``.

    Class ids follow the lexicographic order of the sorted-label keys, so two
    fits on the same data always agree.
    """

    def __init__(self, classes):
        given = [set_key(c) for c in classes]
        keys = sorted(set(given))
        if len(keys) != len(given):
            raise ArgumentError("codec classes must be pairwise distinct")
        self.classes = tuple(keys)
        self.index = {k: i for i, k in enumerate(self.classes)}

    def __len__(self):
        return len(self.classes)

    def __contains__(self, labels):
        return set_key(labels) in self.index

    def __eq__(self, other):
        return isinstance(other, PowersetCodec) and self.classes == other.classes

    def __repr__(self):
        return f"PowersetCodec(n_classes={len(self)})"

    def encode(self, labels):
        try:
            return self.index[set_key(labels)]
        except KeyError:
            raise UnknownClassError(labels) from None

    def decode(self, class_id):
        class_id = int(class_id)
        if not 0 <= class_id < len(self.classes):
            raise ClassRangeError(f"class id {class_id} outside [0, {len(self.classes)})")
        return frozenset(self.classes[class_id])

    def encode_many(self, label_sets):
        return [self.encode(y) for y in label_sets]

    def unseen(self, label_sets):
        """Label sets that this codec can never emit."""
        return sorted({set_key(y) for y in label_sets if set_key(y) not in self.index})

    def to_json(self):
        return json.dumps([list(c) for c in self.classes])

    @classmethod
    def from_json(cls, text):
        return cls([tuple(c) for c in json.loads(text)])

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def fit_codec(data) -> PowersetCodec:
    labels = data.labels if hasattr(data, "labels") else data
    if not len(labels):
        raise ArgumentError("cannot fit a codec on an empty dataset")
    return PowersetCodec({set_key(y) for y in labels})


def encode(codec, labels):
    return codec.encode(labels)


def decode(codec, class_id):
    return codec.decode(class_id)
