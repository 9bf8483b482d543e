from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from crowdal.dataset import Dataset, Item


def raw_dataset(X, raw_labels, name="fixture") -> Dataset:
    """Unbinarized dataset with the given raw class names."""
    X = np.asarray(X, dtype=float)
    items = []
    for i, row in enumerate(X):
        row = row.copy()
        row.setflags(write=False)
        items.append(Item(i, row))
    return Dataset(tuple(items), X.shape[1], tuple(raw_labels), name=name)


def make_dataset(X, labels, subgroups=None, name="fixture") -> Dataset:
    """Dataset with gold labels already in {0, 1} (raw names "0"/"1")."""
    labels = [int(v) for v in labels]
    ds = raw_dataset(X, [str(v) for v in labels], name)
    items = [
        replace(it, gold_label=lab, subgroup=None if subgroups is None else int(subgroups[it.id]))
        for it, lab in zip(ds.items, labels)
    ]
    return ds.with_items(items)


def labeled_pairs(X, y, start_id=0):
    out = []
    for i, (row, lab) in enumerate(zip(np.asarray(X, dtype=float), y)):
        out.append((Item(start_id + i, row, int(lab)), int(lab)))
    return out


@pytest.fixture
def write_csv(tmp_path):
    def _write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
