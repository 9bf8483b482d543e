"""Dataset loading, label binarization, subgroup assignment and pool splits."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for

__all__ = [
    "ColumnSchema",
    "Dataset",
    "DatasetError",
    "FeatureTypeError",
    "Item",
    "ParseError",
    "PoolSplit",
    "assign_subgroups",
    "binarize_labels",
    "labeled_arrays",
    "parse_dataset",
    "split_pools",
]

MAX_SPLIT_RETRIES = 100


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FeatureTypeError(ParseError):
    """A feature cell could not be read as a finite real number."""


@dataclass(frozen=True, eq=False)
class Item:
    id: int
    features: np.ndarray
    gold_label: int | None = None
    subgroup: int | None = None

    def __repr__(self) -> str:
        return f"Item(id={self.id}, gold={self.gold_label}, subgroup={self.subgroup})"


@dataclass(frozen=True)
class ColumnSchema:
    """Which CSV columns hold the label, the subgroup and the features.

    ``features=None`` means every column that is neither label nor subgroup.
    """

    label: str = "class"
    subgroup: str | None = None
    features: tuple[str, ...] | None = None

    @classmethod
    def from_designations(cls, designations: Iterable[str]) -> "ColumnSchema":
        """Build a schema from ``label:<name>`` / ``subgroup:<name>`` strings."""
        kwargs: dict = {}
        for spec in designations:
            role, _, name = spec.partition(":")
            if role not in ("label", "subgroup") or not name:
                raise DatasetError(f"bad column designation {spec!r}")
            kwargs[role] = name
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class Dataset:
    items: tuple[Item, ...]
    dimension: int
    raw_labels: tuple[str | None, ...]
    feature_names: tuple[str, ...] = ()
    name: str = ""
    _matrix: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def class_counts(self) -> Counter:
        return Counter(label for label in self.raw_labels if label is not None)

    @property
    def X(self) -> np.ndarray:
        if self._matrix is None:
            matrix = np.vstack([item.features for item in self.items])
            matrix.setflags(write=False)
            object.__setattr__(self, "_matrix", matrix)
        return self._matrix

    @property
    def gold(self) -> np.ndarray:
        return np.array([-1 if it.gold_label is None else it.gold_label for it in self.items])

    def with_items(self, items: Sequence[Item]) -> "Dataset":
        return replace(self, items=tuple(items), _matrix=None)


def parse_dataset(path: str | Path, schema: ColumnSchema | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Item ids follow file order starting at 0.  Subgroup values are mapped to
    small integers in order of first appearance.  Gold labels stay unset
    until :func:`binarize_labels` maps the raw class names to ``{0, 1}``.
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if schema.label not in header:
            raise ParseError(f"label column {schema.label!r} not in header", line=1)
        if schema.subgroup is not None and schema.subgroup not in header:
            raise ParseError(f"subgroup column {schema.subgroup!r} not in header", line=1)
        if schema.features is None:
            feature_cols = [h for h in header if h not in (schema.label, schema.subgroup)]
        else:
            missing = [f for f in schema.features if f not in header]
            if missing:
                raise ParseError(f"feature columns {missing} not in header", line=1)
            feature_cols = list(schema.features)
        if not feature_cols:
            raise ParseError("no feature columns", line=1)
        feat_idx = [header.index(c) for c in feature_cols]
        label_idx = header.index(schema.label)
        group_idx = header.index(schema.subgroup) if schema.subgroup else None

        items: list[Item] = []
        raw_labels: list[str | None] = []
        group_codes: dict[str, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            values = np.empty(len(feat_idx))
            for j, col in enumerate(feat_idx):
                cell = row[col].strip()
                try:
                    values[j] = float(cell)
                except ValueError:
                    raise FeatureTypeError(
                        f"non-numeric value {cell!r} in feature column {header[col]!r}", line=lineno
                    ) from None
                if not math.isfinite(values[j]):
                    raise FeatureTypeError(
                        f"non-finite value {cell!r} in feature column {header[col]!r}", line=lineno
                    )
            values.setflags(write=False)
            label = row[label_idx].strip() or None
            subgroup = None
            if group_idx is not None:
                subgroup = group_codes.setdefault(row[group_idx].strip(), len(group_codes))
            items.append(Item(id=len(items), features=values, subgroup=subgroup))
            raw_labels.append(label)
    if not items:
        raise ParseError(f"{path} has a header but no rows")
    return Dataset(
        items=tuple(items),
        dimension=len(feat_idx),
        raw_labels=tuple(raw_labels),
        feature_names=tuple(feature_cols),
        name=path.stem,
    )


def binarize_labels(
    dataset: Dataset,
    policy: str | tuple[Iterable[str], Iterable[str]] = "majority",
) -> Dataset:
    """Map raw class names onto ``{0, 1}``.

    ``policy="majority"`` sends the most frequent raw class to 1 and every
    other class to 0 (frequency ties go to the lexicographically first
    name).  An explicit ``(positive, negative)`` pair of class-name
    collections must cover every raw class exactly once.  The mapping always
    starts from the raw names, so applying the same policy twice is a no-op.
    """
    counts = dataset.class_counts
    if len(counts) < 2:
        raise DatasetError(f"need at least 2 raw classes, found {sorted(counts)}")
    if policy == "majority":
        top = min(counts, key=lambda name: (-counts[name], name))
        positive = {top}
    elif isinstance(policy, str):
        raise DatasetError(f"unknown binarization policy {policy!r}")
    else:
        pos, neg = (set(map(str, part)) for part in policy)
        if pos & neg:
            raise DatasetError(f"classes {sorted(pos & neg)} appear on both sides of the partition")
        uncovered = set(counts) - pos - neg
        if uncovered:
            raise DatasetError(f"partition does not cover raw classes {sorted(uncovered)}")
        if not pos or not neg:
            raise DatasetError("both sides of the partition must be non-empty")
        positive = pos
    items = [
        replace(item, gold_label=None if raw is None else int(raw in positive))
        for item, raw in zip(dataset.items, dataset.raw_labels)
    ]
    return dataset.with_items(items)


def assign_subgroups(dataset: Dataset, num_groups: int, *, overwrite: bool = False) -> Dataset:
    """Hash-bucket item ids into ``num_groups`` subgroups.

    Items that already carry a subgroup keep it unless ``overwrite`` is set.
    """
    if num_groups < 1:
        raise DatasetError("num_groups must be >= 1")
    items = [
        item
        if item.subgroup is not None and not overwrite
        else replace(item, subgroup=derive_seed(0, "subgroup", item.id) % num_groups)
        for item in dataset.items
    ]
    return dataset.with_items(items)


@dataclass(frozen=True, eq=False)
class PoolSplit:
    initial_labeled: tuple[tuple[Item, int], ...]
    unlabeled: tuple[Item, ...]
    test: tuple[tuple[Item, int], ...] = ()

    def __post_init__(self):
        ids = [it.id for it, _ in self.initial_labeled]
        ids += [it.id for it in self.unlabeled]
        ids += [it.id for it, _ in self.test]
        if len(ids) != len(set(ids)):
            raise DatasetError("pools overlap")
        if {lab for _, lab in self.initial_labeled} != {0, 1}:
            raise DatasetError("initial labeled pool must contain both classes")

    def __len__(self) -> int:
        return len(self.initial_labeled) + len(self.unlabeled) + len(self.test)


def split_pools(
    dataset: Dataset,
    initial_fraction: float = 0.03,
    test_fraction: float = 0.0,
    seed: int = 0,
) -> PoolSplit:
    """Randomly split a binarized dataset into initial-labeled, unlabeled and test pools.

    Pool sizes are ``round(fraction * n)`` (half rounds up), with at least two
    initial items.  The draw is repeated with a fresh derived stream until
    the initial pool holds both classes, at most ``MAX_SPLIT_RETRIES`` times.
    Items without a gold label can only land in the unlabeled pool.
    """
    if not 0 < initial_fraction < 1:
        raise DatasetError("initial_fraction must lie in (0, 1)")
    if not 0 <= test_fraction < 1:
        raise DatasetError("test_fraction must lie in [0, 1)")
    if initial_fraction + test_fraction >= 1:
        raise DatasetError("initial_fraction + test_fraction must be < 1")
    n = len(dataset)
    n_init = max(2, math.floor(initial_fraction * n + 0.5))
    n_test = math.floor(test_fraction * n + 0.5)
    labeled_ids = [it.id for it in dataset.items if it.gold_label is not None]
    if n_init + n_test > len(labeled_ids) or n_init + n_test >= n:
        raise DatasetError(f"dataset of {n} items is too small for the requested pools")
    if len({it.gold_label for it in dataset.items if it.gold_label is not None}) < 2:
        raise DatasetError("dataset has a single class; initial pool cannot hold both")

    by_id = {it.id: it for it in dataset.items}
    for attempt in range(MAX_SPLIT_RETRIES):
        rng = rng_for(seed, "split", attempt)
        order = rng.permutation(len(labeled_ids))
        chosen = [labeled_ids[i] for i in order]
        test_ids = sorted(chosen[:n_test])
        init_ids = sorted(chosen[n_test:n_test + n_init])
        if len({by_id[i].gold_label for i in init_ids}) == 2:
            break
    else:
        raise DatasetError(
            f"could not draw an initial pool with both classes after {MAX_SPLIT_RETRIES} tries"
        )
    taken = set(test_ids) | set(init_ids)
    return PoolSplit(
        initial_labeled=tuple((by_id[i], by_id[i].gold_label) for i in init_ids),
        unlabeled=tuple(it for it in dataset.items if it.id not in taken),
        test=tuple((by_id[i], by_id[i].gold_label) for i in test_ids),
    )


def labeled_arrays(labeled: Sequence[tuple[Item, int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a labeled sequence into ``(ids, X, y)`` arrays, keeping order."""
    if not labeled:
        raise DatasetError("labeled set is empty")
    ids = np.fromiter((it.id for it, _ in labeled), dtype=np.int64, count=len(labeled))
    X = np.vstack([it.features for it, _ in labeled])
    y = np.fromiter((lab for _, lab in labeled), dtype=np.int64, count=len(labeled))
    return ids, X, y


def items_matrix(items: Sequence[Item]) -> np.ndarray:
    return np.vstack([it.features for it in items]) if items else np.empty((0, 0))


def gold_map(items: Iterable[Item]) -> Mapping[int, int]:
    return {it.id: it.gold_label for it in items if it.gold_label is not None}
