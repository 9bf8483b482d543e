"""Synthetic benchmark generators and the bundled UCI-format datasets."""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import ColumnSchema, Dataset, Item, binarize_labels, parse_dataset

__all__ = ["BUNDLED", "SYNTHETIC_KINDS", "bundled_dataset", "generate", "synthetic_dataset", "write_csv"]

SYNTHETIC_KINDS = ("separable", "overlap", "imbalanced")

# file name and binarization policy of each bundled dataset
BUNDLED = {
    "iris": ("iris.csv", (["Iris-virginica"], ["Iris-setosa", "Iris-versicolor"])),
    "wine": ("wine.csv", "majority"),
    "wdbc": ("wdbc_200.csv", "majority"),
}

_MARGIN = 0.3
_SQRT2 = np.sqrt(2.0)


def _separable(rng, n):
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    X = np.empty((n, 2))
    for i, lab in enumerate(labels):
        sign = 1.0 if lab else -1.0
        while True:
            x = rng.normal(sign * 1.0, 1.0, size=2)
            # keep points at least _MARGIN from the line x1 + x2 = 0 on their own side
            if sign * (x[0] + x[1]) / _SQRT2 >= _MARGIN:
                break
        X[i] = x
    return X, labels


def _overlap(rng, n):
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    centers = np.where(labels[:, None] == 1, 0.75, -0.75)
    return centers + rng.normal(0.0, 1.0, size=(n, 2)), labels


def _imbalanced(rng, n):
    n_minority = int(round(0.1 * n))
    labels = np.zeros(n, dtype=int)
    labels[:n_minority] = 1
    rng.shuffle(labels)
    centers = np.where(labels[:, None] == 1, 2.0, 0.0)
    return centers + rng.normal(0.0, 1.0, size=(n, 2)), labels


_GENERATORS = {"separable": _separable, "overlap": _overlap, "imbalanced": _imbalanced}


def generate(kind: str, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, y)`` for one of :data:`SYNTHETIC_KINDS`.

    separable: two unit Gaussians at +-(1, 1), points closer than 0.3 to the
    diagonal separator (or on the wrong side) redrawn.
    overlap: unit Gaussians at +-(0.75, 0.75), no redraws.
    imbalanced: 10% of points (class 1) around (2, 2), the rest around the origin.
    """
    if kind not in _GENERATORS:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    if n < 4:
        raise ValueError("n must be >= 4")
    rng = np.random.default_rng(seed)
    X, y = _GENERATORS[kind](rng, n)
    return X, np.asarray(y, dtype=int)


def write_csv(path: str | Path, X: np.ndarray, y: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(X.shape[1])] + ["class"])
        for row, lab in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def synthetic_dataset(kind: str, n: int, seed: int) -> Dataset:
    """Generated dataset, already binarized with class "1" as label 1."""
    X, y = generate(kind, n, seed)
    items = []
    for i, (row, lab) in enumerate(zip(X, y)):
        row = row.copy()
        row.setflags(write=False)
        items.append(Item(id=i, features=row))
    ds = Dataset(
        items=tuple(items),
        dimension=X.shape[1],
        raw_labels=tuple(str(int(v)) for v in y),
        feature_names=tuple(f"x{j + 1}" for j in range(X.shape[1])),
        name=f"{kind}-{n}-{seed}",
    )
    return binarize_labels(ds, (["1"], ["0"]))


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValueError(f"unknown bundled dataset {name!r}; expected one of {sorted(BUNDLED)}")
    return Path(str(resources.files("crowdal") / "data" / BUNDLED[name][0]))


def bundled_dataset(name: str, binarize: bool = True) -> Dataset:
    ds = parse_dataset(bundled_path(name), ColumnSchema(label="class"))
    ds = Dataset(ds.items, ds.dimension, ds.raw_labels, ds.feature_names, name)
    return binarize_labels(ds, BUNDLED[name][1]) if binarize else ds
