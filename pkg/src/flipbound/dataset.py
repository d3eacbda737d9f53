"""Dataset types, CSV ingestion, binarization and train/test splitting."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .seeds import make_rng

__all__ = [
    "DatasetError",
    "Dataset",
    "RawDataset",
    "TestTarget",
    "SplitSpec",
    "load_csv",
    "load_raw_csv",
    "save_csv",
    "binarize",
    "split",
    "split_indices",
    "standardize",
    "load_targets",
    "save_targets",
]


class DatasetError(ValueError):
    """Malformed or invalid input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.labels, dtype=np.int64, copy=True).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DatasetError("dataset needs m >= 1 rows and d >= 1 features")
        if y.size != X.shape[0]:
            raise DatasetError(f"{X.shape[0]} feature rows but {y.size} labels")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DatasetError(f"non-finite feature at row {r}, column {c}")
        if not np.all((y == 1) | (y == -1)):
            raise DatasetError("labels must be +1 or -1")
        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != X.shape[1]:
                raise DatasetError("feature_names length must equal d")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.m

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(list(indices), dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.feature_names)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.feature_names)

    def flipped(self, indices) -> "Dataset":
        y = self.labels.copy()
        idx = np.asarray(list(indices), dtype=np.int64)
        y[idx] = -y[idx]
        return self.with_labels(y)

    def metadata(self) -> dict:
        counts = Counter(int(v) for v in self.labels)
        return {"m": self.m, "d": self.d, "class_counts": {"+1": counts.get(1, 0), "-1": counts.get(-1, 0)}}

    def to_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True)


@dataclass(frozen=True, eq=False)
class RawDataset:
    """Features with arbitrary class labels, before binarization."""

    features: np.ndarray
    labels: tuple
    feature_names: tuple[str, ...] | None = None


@dataclass(frozen=True)
class TestTarget:
    __test__ = False  # keep pytest from collecting it

    x_t: np.ndarray
    y_t: int

    def __post_init__(self):
        x = np.array(self.x_t, dtype=np.float64, copy=True).ravel()
        if x.size < 1 or not np.all(np.isfinite(x)):
            raise DatasetError("target features must be finite")
        if int(self.y_t) not in (1, -1):
            raise DatasetError("target label must be +1 or -1")
        x.setflags(write=False)
        object.__setattr__(self, "x_t", x)
        object.__setattr__(self, "y_t", int(self.y_t))

    def check_dim(self, d: int) -> None:
        if self.x_t.size != d:
            raise DatasetError(f"target has dimension {self.x_t.size}, dataset has {d}")

    def to_dict(self) -> dict:
        return {"x": [float(v) for v in self.x_t], "y": self.y_t}

    @classmethod
    def from_dict(cls, d: dict) -> "TestTarget":
        return cls(np.asarray(d["x"], dtype=float), int(d["y"]))


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.1
    seed: int = 0

    def sizes(self, m: int) -> tuple[int, int]:
        if not 0.0 < self.test_fraction < 1.0:
            raise DatasetError("test_fraction must lie in (0, 1)")
        n_test = math.ceil(m * self.test_fraction)
        if n_test < 1 or m - n_test < 1:
            raise DatasetError(f"test_fraction {self.test_fraction} leaves an empty side for m={m}")
        return m - n_test, n_test


def _label_to_pm1(cell: str, row: int, col: int) -> int:
    try:
        v = float(cell)
    except ValueError:
        raise DatasetError(f"row {row}, column {col}: label {cell!r} is not numeric") from None
    if v == 1:
        return 1
    if v in (0, -1):
        return -1
    raise DatasetError(f"row {row}, column {col}: label {cell!r} not in {{+1, -1, 1, 0}}")


def _read_rows(path):
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise DatasetError(f"{path} has no data rows")
    return rows[0], rows[1:]


def _resolve_label_column(header: Sequence[str], label_column) -> int:
    if label_column is None:
        return len(header) - 1
    if isinstance(label_column, int):
        idx = label_column if label_column >= 0 else len(header) + label_column
    elif label_column in header:
        idx = list(header).index(label_column)
    else:
        try:
            idx = int(label_column)
        except ValueError:
            raise DatasetError(f"no column named {label_column!r}") from None
    if not 0 <= idx < len(header):
        raise DatasetError(f"label column {label_column!r} out of range")
    return idx


def _parse_features(header, body, label_idx):
    ncol = len(header)
    feat_cols = [j for j in range(ncol) if j != label_idx]
    if not feat_cols:
        raise DatasetError("no feature columns")
    X = np.empty((len(body), len(feat_cols)))
    for i, row in enumerate(body, start=2):
        if len(row) != ncol:
            raise DatasetError(f"row {i}: expected {ncol} cells, got {len(row)}")
        for k, j in enumerate(feat_cols):
            try:
                v = float(row[j])
            except ValueError:
                raise DatasetError(f"row {i}, column {header[j]!r}: cannot parse {row[j]!r}") from None
            if not math.isfinite(v):
                raise DatasetError(f"row {i}, column {header[j]!r}: non-finite value {row[j]!r}")
            X[i - 2, k] = v
    names = tuple(header[j] for j in feat_cols)
    return X, names


def load_csv(path, label_column=None) -> Dataset:
    """Read a header-first CSV; labels 1/+1 map to +1 and 0/-1 to -1.

    Row numbers in error messages count the header as row 1.
    """
    header, body = _read_rows(path)
    label_idx = _resolve_label_column(header, label_column)
    X, names = _parse_features(header, body, label_idx)
    y = np.array([_label_to_pm1(row[label_idx].strip(), i, header[label_idx])
                  for i, row in enumerate(body, start=2)])
    return Dataset(X, y, names)


def load_raw_csv(path, label_column=None) -> RawDataset:
    """Like :func:`load_csv` but keeps class labels as written."""
    header, body = _read_rows(path)
    label_idx = _resolve_label_column(header, label_column)
    X, names = _parse_features(header, body, label_idx)
    return RawDataset(X, tuple(row[label_idx].strip() for row in body), names)


def save_csv(data: Dataset, path, label_name: str = "label") -> None:
    names = data.feature_names or tuple(f"x{j}" for j in range(data.d))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [label_name])
        for row, lab in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def _class_key(v):
    try:
        f = float(v)
    except (TypeError, ValueError):
        return str(v).strip()
    return f


def binarize(raw, pos_class, neg_class) -> Dataset:
    """Keep rows of the two classes; ``pos_class`` becomes +1, ``neg_class`` -1."""
    pos, neg = _class_key(pos_class), _class_key(neg_class)
    keys = [_class_key(v) for v in raw.labels]
    for cls in (pos, neg):
        if cls not in keys:
            raise DatasetError(f"class {cls!r} does not occur in the data")
    keep = [i for i, k in enumerate(keys) if k == pos or k == neg]
    y = np.array([1 if keys[i] == pos else -1 for i in keep])
    return Dataset(np.asarray(raw.features)[keep], y, raw.feature_names)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded disjoint train/test partition with ``ceil(m * fraction)`` test rows.

    Both sides keep the original relative row order.
    """
    train_idx, test_idx = split_indices(data.m, spec)
    return data.subset(train_idx), data.subset(test_idx)


def split_indices(m: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    _, n_test = spec.sizes(m)
    perm = make_rng(spec.seed, "split").permutation(m)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def standardize(train: Dataset, *others):
    """Z-score every feature with statistics from ``train`` only.

    ``others`` may be Datasets or TestTargets; constant features are centred only.
    """
    mu = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd[sd == 0] = 1.0
    out = [Dataset((train.features - mu) / sd, train.labels, train.feature_names)]
    for o in others:
        if isinstance(o, TestTarget):
            out.append(TestTarget((o.x_t - mu) / sd, o.y_t))
        else:
            out.append(Dataset((o.features - mu) / sd, o.labels, o.feature_names))
    return out


def load_targets(path, label_column=None) -> list[TestTarget]:
    """Targets from a CSV (label column = desired label) or a JSON object/list."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read targets from {path}: {exc}") from exc
        items = obj if isinstance(obj, list) else [obj]
        try:
            return [TestTarget.from_dict(t) for t in items]
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"malformed target entry in {path}") from exc
    data = load_csv(path, label_column)
    return [TestTarget(x, y) for x, y in zip(data.features, data.labels)]


def save_targets(targets, path) -> None:
    items = [t.to_dict() for t in targets]
    Path(path).write_text(json.dumps(items[0] if len(items) == 1 else items) + "\n", encoding="utf-8")
