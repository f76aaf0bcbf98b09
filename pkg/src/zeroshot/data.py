"""Datasets, class splits, and on-disk formats.

Images live in a fixed visual feature space and carry integer class
labels.  Text lives in a per-class corpus with exactly one document per
class.  Classifiers operate on augmented feature vectors (a constant 1
appended) so the bias term folds into the weight vector.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

MATRIX_MAGIC = b"CFMX"


def augment(points):
    """Append a column of ones to a matrix of row vectors.

    A single 1-d vector is also accepted and gets a trailing 1.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        return np.concatenate([points, [1.0]])
    if points.ndim != 2:
        raise ValueError("expected a vector or a matrix of row vectors")
    ones = np.ones((points.shape[0], 1))
    return np.hstack([points, ones])


def is_augmented(points, tol=0.0):
    """True when the trailing entry (or column) is identically 1."""
    points = np.asarray(points, dtype=float)
    trailing = points[..., -1]
    return bool(np.all(np.abs(trailing - 1.0) <= tol))


@dataclass
class VisualDataset:
    """Image features plus dense integer class labels.

    features : (n_images, d_v) float array
    labels   : (n_images,) int array with values in 1..n_classes
    class_names : id -> human-readable name
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array (one row per image)")
        if self.labels.ndim != 1 or len(self.labels) != len(self.features):
            raise DataError(
                "labels must be a 1-d array with one entry per feature row "
                f"(got {self.labels.shape} labels for {len(self.features)} rows)"
            )
        if len(self.labels) == 0:
            raise DataError("dataset is empty")
        present = set(int(v) for v in np.unique(self.labels))
        n_classes = max(present)
        if min(present) < 1:
            raise DataError(f"labels must be >= 1, found {min(present)}")
        missing = set(range(1, n_classes + 1)) - present
        if missing:
            raise DataError(
                f"class ids must be dense 1..{n_classes}; no images for {sorted(missing)}"
            )
        if not self.class_names:
            self.class_names = {j: str(j) for j in sorted(present)}
        unknown = present - set(self.class_names)
        if unknown:
            raise DataError(f"labels reference unnamed class ids {sorted(unknown)}")

    @property
    def n_images(self):
        return self.features.shape[0]

    @property
    def d_v(self):
        return self.features.shape[1]

    @property
    def class_ids(self):
        return sorted(set(int(v) for v in np.unique(self.labels)))

    @property
    def n_classes(self):
        return len(self.class_ids)

    def images_of_class(self, class_id):
        """Feature rows belonging to one class."""
        if class_id not in set(self.class_ids):
            raise DataError(f"unknown class id {class_id}")
        return self.features[self.labels == class_id]

    def augmented(self):
        """Features with the bias column of ones appended."""
        return augment(self.features)


@dataclass
class TextCorpus:
    """One text document per class id."""

    documents: dict

    def __post_init__(self):
        if not self.documents:
            raise DataError("corpus is empty")
        cleaned = {}
        for key, doc in self.documents.items():
            cid = int(key)
            if not isinstance(doc, str) or not doc.strip():
                raise DataError(f"document for class {cid} is empty")
            if cid in cleaned:
                raise DataError(f"duplicate document for class {cid}")
            cleaned[cid] = doc
        self.documents = cleaned

    @property
    def class_ids(self):
        return sorted(self.documents)

    def document(self, class_id):
        if class_id not in self.documents:
            raise DataError(f"corpus has no document for class {class_id}")
        return self.documents[class_id]


@dataclass(frozen=True)
class ClassSplit:
    """Partition of class ids into seen (train) and unseen (test) sets."""

    seen: frozenset
    unseen: frozenset

    def __init__(self, seen, unseen):
        object.__setattr__(self, "seen", frozenset(int(c) for c in seen))
        object.__setattr__(self, "unseen", frozenset(int(c) for c in unseen))
        if self.seen & self.unseen:
            raise DataError(
                f"seen and unseen classes overlap: {sorted(self.seen & self.unseen)}"
            )
        if len(self.seen) < 2:
            raise DataError("need at least 2 seen classes")
        if len(self.unseen) < 1:
            raise DataError("need at least 1 unseen class")

    def validate_covers(self, class_ids):
        """Check the split covers exactly the given class ids."""
        universe = set(int(c) for c in class_ids)
        if self.seen | self.unseen != universe:
            raise DataError(
                "split does not cover the class ids: "
                f"split has {sorted(self.seen | self.unseen)}, expected {sorted(universe)}"
            )

    @property
    def seen_sorted(self):
        return sorted(self.seen)

    @property
    def unseen_sorted(self):
        return sorted(self.unseen)


def make_folds(class_ids, n_folds, seed=0):
    """Cross-validation splits: every class unseen in exactly one fold.

    Class ids are shuffled once with the given seed and cut into
    ``n_folds`` contiguous chunks whose sizes differ by at most one.
    Fold k uses chunk k as the unseen classes and the rest as seen.
    """
    class_ids = [int(c) for c in class_ids]
    if n_folds < 2:
        raise DataError("need at least 2 folds")
    if n_folds > len(class_ids):
        raise DataError(
            f"cannot make {n_folds} folds from {len(class_ids)} classes"
        )
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(class_ids))
    chunks = [list(part) for part in np.array_split(order, n_folds)]
    folds = []
    for k in range(n_folds):
        unseen = chunks[k]
        seen = [c for c in order if c not in set(unseen)]
        folds.append(ClassSplit(seen=seen, unseen=unseen))
    return folds


def save_split(path, split):
    payload = {"seen": split.seen_sorted, "unseen": split.unseen_sorted}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_split(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read split file {path}: {exc}") from exc
    if not isinstance(payload, dict) or "seen" not in payload or "unseen" not in payload:
        raise DataError(f'split file {path} must contain "seen" and "unseen" lists')
    return ClassSplit(seen=payload["seen"], unseen=payload["unseen"])


def save_matrix(path, matrix):
    """Write a float64 matrix in the binary on-disk format.

    Layout: magic ``CFMX``, u32 rows, u32 cols (little endian), then
    row-major float64 little-endian payload.
    """
    matrix = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise DataError("only 2-d matrices can be saved")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(matrix.tobytes(order="C"))


def load_matrix(path):
    """Read a matrix written by :func:`save_matrix`."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read matrix file {path}: {exc}") from exc
    if len(raw) < 12 or raw[:4] != MATRIX_MAGIC:
        raise DataError(f"{path}: bad magic, not a matrix file")
    rows, cols = struct.unpack("<II", raw[4:12])
    expected = 12 + rows * cols * 8
    if len(raw) != expected:
        raise DataError(
            f"{path}: truncated matrix payload ({len(raw)} bytes, expected {expected})"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=12, count=rows * cols)
    return flat.reshape(rows, cols).astype(float)


def load_features_csv(path):
    """Read a headerless CSV of floats, one image per row."""
    try:
        matrix = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot parse feature CSV {path}: {exc}") from exc
    return matrix


def load_features(path):
    """Load features from either the binary format or headerless CSV.

    The binary format is detected by its magic bytes.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MATRIX_MAGIC:
        return load_matrix(path)
    return load_features_csv(path)


def load_labels(path):
    """Read labels, one integer per line."""
    labels = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    labels.append(int(line))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: label {line!r} is not an integer"
                    ) from None
    except OSError as exc:
        raise DataError(f"cannot read label file {path}: {exc}") from exc
    if not labels:
        raise DataError(f"{path}: no labels found")
    return np.asarray(labels, dtype=int)


def load_dataset(features_path, labels_path, class_names=None):
    """Assemble a :class:`VisualDataset` from feature and label files."""
    features = load_features(features_path)
    labels = load_labels(labels_path)
    if len(labels) != len(features):
        raise DataError(
            f"{labels_path} has {len(labels)} labels but {features_path} "
            f"has {len(features)} rows"
        )
    return VisualDataset(features=features, labels=labels,
                         class_names=dict(class_names or {}))


def load_corpus(path):
    """Read a class corpus from JSON mapping class id -> document text."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path}: corpus JSON must map class id to text")
    return TextCorpus(documents=payload)


def save_corpus(path, corpus):
    payload = {str(cid): corpus.documents[cid] for cid in corpus.class_ids}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
