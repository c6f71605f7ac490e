"""Binary-labeled dataset container, CSV ingestion, subsampling, scaling.

The whole workbench operates on :class:`Dataset`: an immutable, ordered
collection of feature vectors with labels in {-1, +1} and a provenance flag
telling original training rows apart from inserted poisons.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NEGATIVE = -1
POSITIVE = 1


class Provenance(str, Enum):
    ORIGINAL = "original"
    POISONED = "poisoned"


class CsvFormatError(ValueError):
    """CSV ingestion problem, located by 1-based data row and column name."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class Instance:
    """One labeled feature vector."""

    id: int
    features: np.ndarray
    label: int
    provenance: Provenance = Provenance.ORIGINAL


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of labeled instances.

    Attributes
    ----------
    X : (n, d) float64 feature matrix.
    y : (n,) int labels, each -1 or +1.
    ids : (n,) unique integer identifiers.
    provenance : (n,) array of "original"/"poisoned" markers.
    feature_names : one name per column.
    feature_means, feature_stds : per-feature standardization statistics,
        present only after :func:`standardize`. Zero-variance features are
        recorded with std 1 so the transform is always invertible.
    source_ids : mapping new id -> pre-subsample id, set by
        :func:`stratified_subsample`.
    """

    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray
    provenance: np.ndarray
    feature_names: tuple[str, ...]
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None
    source_ids: dict[int, int] | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64)
        ids = np.asarray(self.ids, dtype=np.int64)
        prov = np.asarray(self.provenance, dtype=object)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        n, d = X.shape
        if y.shape != (n,) or ids.shape != (n,) or prov.shape != (n,):
            raise ValueError("X, y, ids and provenance lengths disagree")
        if not np.all(np.isin(y, (NEGATIVE, POSITIVE))):
            raise ValueError("labels must be -1 or +1")
        if len(np.unique(ids)) != n:
            raise ValueError("instance ids must be unique")
        if len(self.feature_names) != d:
            raise ValueError("feature_names length must equal dimensionality")
        if self.feature_means is not None:
            means = np.asarray(self.feature_means, dtype=np.float64)
            stds = np.asarray(self.feature_stds, dtype=np.float64)
            if means.shape != (d,) or stds.shape != (d,):
                raise ValueError("standardization vectors must have length d")
            if np.any(stds <= 0):
                raise ValueError("standardization stds must be positive")
            object.__setattr__(self, "feature_means", means)
            object.__setattr__(self, "feature_stds", stds)
            means.setflags(write=False)
            stds.setflags(write=False)
        for arr, name in ((X, "X"), (y, "y"), (ids, "ids"), (prov, "provenance")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def is_standardized(self) -> bool:
        return self.feature_means is not None

    def instance(self, instance_id: int) -> Instance:
        row = self.row_of(instance_id)
        return Instance(
            id=int(self.ids[row]),
            features=self.X[row].copy(),
            label=int(self.y[row]),
            provenance=Provenance(self.provenance[row]),
        )

    def row_of(self, instance_id: int) -> int:
        rows = np.nonzero(self.ids == instance_id)[0]
        if len(rows) == 0:
            raise KeyError(f"unknown instance id {instance_id}")
        return int(rows[0])

    def poison_mask(self) -> np.ndarray:
        return np.array([p == Provenance.POISONED.value for p in self.provenance], dtype=bool)

    def class_counts(self) -> dict[int, int]:
        return {NEGATIVE: int(np.sum(self.y == NEGATIVE)), POSITIVE: int(np.sum(self.y == POSITIVE))}

    def fingerprint(self) -> str:
        """Hash of instance ids and provenance, identifying the training set."""
        h = hashlib.sha256()
        for i, p in zip(self.ids.tolist(), self.provenance.tolist()):
            h.update(f"{i}:{p};".encode())
        return h.hexdigest()

    def to_raw(self, features: np.ndarray) -> np.ndarray:
        """Map standardized feature vectors back to the raw input space."""
        features = np.asarray(features, dtype=np.float64)
        if not self.is_standardized:
            return features.copy()
        return features * self.feature_stds + self.feature_means

    def with_poisons(self, vectors: Iterable[np.ndarray], label: int) -> "Dataset":
        """Return a new dataset with poison rows appended.

        Poison vectors are expected in this dataset's current feature space
        (standardized when the dataset is). Ids continue after the current
        maximum.
        """
        vecs = [np.asarray(v, dtype=np.float64) for v in vectors]
        if not vecs:
            return self
        next_id = int(self.ids.max()) + 1
        X = np.vstack([self.X] + [v.reshape(1, -1) for v in vecs])
        y = np.concatenate([self.y, np.full(len(vecs), label, dtype=np.int64)])
        ids = np.concatenate([self.ids, np.arange(next_id, next_id + len(vecs), dtype=np.int64)])
        prov = np.concatenate(
            [self.provenance, np.array([Provenance.POISONED.value] * len(vecs), dtype=object)]
        )
        return replace(self, X=X, y=y, ids=ids, provenance=prov)

    def without_row(self, row: int) -> "Dataset":
        keep = np.ones(self.n, dtype=bool)
        keep[row] = False
        return replace(
            self, X=self.X[keep], y=self.y[keep], ids=self.ids[keep], provenance=self.provenance[keep]
        )

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "ids": self.ids.tolist(),
            "provenance": list(self.provenance),
            "feature_means": None if self.feature_means is None else self.feature_means.tolist(),
            "feature_stds": None if self.feature_stds is None else self.feature_stds.tolist(),
            "source_ids": None
            if self.source_ids is None
            else {str(k): v for k, v in self.source_ids.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Dataset":
        return cls(
            X=np.asarray(payload["X"], dtype=np.float64),
            y=np.asarray(payload["y"], dtype=np.int64),
            ids=np.asarray(payload["ids"], dtype=np.int64),
            provenance=np.asarray(payload["provenance"], dtype=object),
            feature_names=tuple(payload["feature_names"]),
            feature_means=None
            if payload.get("feature_means") is None
            else np.asarray(payload["feature_means"], dtype=np.float64),
            feature_stds=None
            if payload.get("feature_stds") is None
            else np.asarray(payload["feature_stds"], dtype=np.float64),
            source_ids=None
            if payload.get("source_ids") is None
            else {int(k): int(v) for k, v in payload["source_ids"].items()},
        )


def from_arrays(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str] | None = None,
) -> Dataset:
    """Build an unstandardized original-provenance dataset from arrays."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(d))
    return Dataset(
        X=X,
        y=np.asarray(y, dtype=np.int64),
        ids=np.arange(n, dtype=np.int64),
        provenance=np.array([Provenance.ORIGINAL.value] * n, dtype=object),
        feature_names=tuple(feature_names),
    )


def load_csv(
    path: str | Path,
    label_column: str,
    positive_value: str,
    negative_value: str,
) -> Dataset:
    """Read a headered CSV into a dataset.

    The label column is mapped to +1/-1 via the two given strings, every
    other column is parsed as a float feature, and ids are assigned 0..n-1
    in row order. One exception keeps export/ingest a closed loop: when the
    header carries both an "id" and a "provenance" column (the pair
    :func:`export_csv` writes), those are read back as instance metadata
    rather than features. Raises :class:`CsvFormatError` with the offending
    row and column on malformed input.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("empty CSV: header row required") from None
        if label_column not in header:
            raise CsvFormatError(f"label column {label_column!r} not in header")
        label_idx = header.index(label_column)
        meta_idx: dict[str, int] = {}
        if "id" in header and "provenance" in header and label_column not in ("id", "provenance"):
            meta_idx = {"id": header.index("id"), "provenance": header.index("provenance")}
        skip = {label_idx, *meta_idx.values()}
        feature_names = [c for i, c in enumerate(header) if i not in skip]
        rows: list[list[float]] = []
        labels: list[int] = []
        read_ids: list[int] = []
        read_prov: list[str] = []
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"expected {len(header)} columns, found {len(row)}", row=row_no
                )
            raw_label = row[label_idx]
            if raw_label == positive_value:
                labels.append(POSITIVE)
            elif raw_label == negative_value:
                labels.append(NEGATIVE)
            else:
                raise CsvFormatError(
                    f"unknown label value {raw_label!r}", row=row_no, column=label_column
                )
            if meta_idx:
                try:
                    read_ids.append(int(row[meta_idx["id"]]))
                except ValueError:
                    raise CsvFormatError(
                        f"non-integer id {row[meta_idx['id']]!r}", row=row_no, column="id"
                    ) from None
                prov_cell = row[meta_idx["provenance"]]
                try:
                    read_prov.append(Provenance(prov_cell).value)
                except ValueError:
                    raise CsvFormatError(
                        f"unknown provenance {prov_cell!r}", row=row_no, column="provenance"
                    ) from None
            feats = []
            for i, cell in enumerate(row):
                if i in skip:
                    continue
                col = header[i]
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"non-numeric feature value {cell!r}", row=row_no, column=col
                    ) from None
            rows.append(feats)
    if len(rows) < 2:
        raise CsvFormatError(f"need at least 2 data rows, found {len(rows)}")
    X = np.array(rows, dtype=np.float64)
    y = np.array(labels)
    if not meta_idx:
        return from_arrays(X, y, feature_names)
    return Dataset(
        X=X,
        y=y,
        ids=np.array(read_ids, dtype=np.int64),
        provenance=np.array(read_prov, dtype=object),
        feature_names=tuple(feature_names),
    )


def export_csv(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset as CSV with id/label/provenance columns prepended.

    Feature values are written in raw space (standardization inverted) using
    full-precision repr, so a load/export cycle round-trips exactly.
    """
    path = Path(path)
    raw = dataset.to_raw(dataset.X)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "provenance", *dataset.feature_names])
        for i in range(dataset.n):
            writer.writerow(
                [
                    int(dataset.ids[i]),
                    int(dataset.y[i]),
                    dataset.provenance[i],
                    *[repr(float(v)) for v in raw[i]],
                ]
            )


def stratified_subsample(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Uniform within-class subsample of exactly ``n`` instances.

    Per-class seat counts are floor(n * class_fraction); leftover seats go to
    the majority class (ties favor the negative class). Selected rows keep
    their original relative order; ids are remapped to 0..n-1 with the
    original ids recorded in ``source_ids``.
    """
    if n > dataset.n:
        raise ValueError(f"cannot subsample {n} from {dataset.n} instances")
    counts = dataset.class_counts()
    if counts[NEGATIVE] == 0 or counts[POSITIVE] == 0:
        raise ValueError("both classes must be present before subsampling")
    total = dataset.n
    seats = {c: int(np.floor(n * counts[c] / total)) for c in (NEGATIVE, POSITIVE)}
    majority = NEGATIVE if counts[NEGATIVE] >= counts[POSITIVE] else POSITIVE
    seats[majority] += n - sum(seats.values())
    if seats[NEGATIVE] == 0 or seats[POSITIVE] == 0:
        raise ValueError(f"subsample of {n} would leave a class empty: {seats}")
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for cls in (NEGATIVE, POSITIVE):
        rows = np.nonzero(dataset.y == cls)[0]
        chosen.extend(rng.choice(rows, size=seats[cls], replace=False).tolist())
    chosen.sort()
    rows = np.array(chosen, dtype=np.int64)
    source = {new: int(dataset.ids[r]) for new, r in enumerate(rows)}
    return Dataset(
        X=dataset.X[rows],
        y=dataset.y[rows],
        ids=np.arange(n, dtype=np.int64),
        provenance=dataset.provenance[rows],
        feature_names=dataset.feature_names,
        feature_means=dataset.feature_means,
        feature_stds=dataset.feature_stds,
        source_ids=source,
    )


def standardize(dataset: Dataset) -> Dataset:
    """Transform each feature to zero mean / unit variance.

    Zero-variance features pass through unchanged with std recorded as 1.
    The statistics are kept on the dataset for inverse transforms and for
    mapping poison vectors back to raw space in exports.
    """
    if dataset.n == 0:
        raise ValueError("cannot standardize an empty dataset")
    if dataset.is_standardized:
        raise ValueError("dataset is already standardized")
    means = dataset.X.mean(axis=0)
    stds = dataset.X.std(axis=0)
    stds = np.where(stds == 0.0, 1.0, stds)
    return replace(dataset, X=(dataset.X - means) / stds, feature_means=means, feature_stds=stds)
