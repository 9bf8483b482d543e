import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdal.dataset import (
    ColumnSchema,
    DatasetError,
    FeatureTypeError,
    ParseError,
    assign_subgroups,
    binarize_labels,
    parse_dataset,
    split_pools,
)
from crowdal.synth import bundled_dataset, bundled_path

from conftest import make_dataset, raw_dataset


def test_parse_small_csv(write_csv):
    path = write_csv("a,b,class\n1,2,x\n3,4,y\n5,6,x\n")
    ds = parse_dataset(path)
    assert len(ds) == 3
    assert ds.dimension == 2
    assert [it.id for it in ds.items] == [0, 1, 2]
    assert ds.class_counts == {"x": 2, "y": 1}
    np.testing.assert_array_equal(ds.X, [[1, 2], [3, 4], [5, 6]])


def test_non_numeric_feature_names_line(write_csv):
    path = write_csv("a,b,class\n1,2,x\n3,abc,y\n")
    with pytest.raises(FeatureTypeError) as exc:
        parse_dataset(path)
    assert exc.value.line == 3
    assert "3" in str(exc.value)


def test_malformed_row_names_line(write_csv):
    path = write_csv("a,b,class\n1,2,x\n3,y\n")
    with pytest.raises(ParseError) as exc:
        parse_dataset(path)
    assert exc.value.line == 3


def test_empty_file(write_csv):
    with pytest.raises(ParseError):
        parse_dataset(write_csv(""))


def test_subgroup_column(write_csv):
    path = write_csv("g,a,class\nred,1,x\nblue,2,y\nred,3,y\n")
    ds = parse_dataset(path, ColumnSchema.from_designations(["label:class", "subgroup:g"]))
    assert ds.dimension == 1
    assert [it.subgroup for it in ds.items] == [0, 1, 0]


def test_bundled_iris_shape():
    # the file on disk has 151 lines: a header and 150 rows
    assert len(bundled_path("iris").read_text().strip().splitlines()) == 151
    ds = bundled_dataset("iris", binarize=False)
    assert len(ds) == 150
    assert ds.dimension == 4
    assert len(ds.class_counts) == 3


def _raw(counts):
    labels = [name for name, k in counts.items() for _ in range(k)]
    return raw_dataset(np.zeros((len(labels), 1)), labels)


def test_majority_vs_rest():
    ds = binarize_labels(_raw({"A": 60, "B": 30, "C": 10}), "majority")
    assert int(ds.gold.sum()) == 60
    assert len(ds) - int(ds.gold.sum()) == 40


def test_explicit_partition():
    ds = binarize_labels(_raw({"A": 60, "B": 30, "C": 10}), (["A", "B"], ["C"]))
    assert int(ds.gold.sum()) == 90


def test_partition_must_cover_every_class():
    with pytest.raises(DatasetError):
        binarize_labels(_raw({"A": 60, "B": 30, "C": 10}), (["A"], ["B"]))


def test_binarize_is_idempotent():
    once = binarize_labels(_raw({"A": 3, "B": 5}), "majority")
    twice = binarize_labels(once, "majority")
    np.testing.assert_array_equal(once.gold, twice.gold)


def test_assign_subgroups_deterministic():
    ds = make_dataset(np.zeros((50, 1)), [0, 1] * 25)
    a = assign_subgroups(ds, 4)
    b = assign_subgroups(ds, 4)
    assert [it.subgroup for it in a.items] == [it.subgroup for it in b.items]
    assert {it.subgroup for it in a.items} <= {0, 1, 2, 3}


def test_split_sizes():
    ds = make_dataset(np.arange(100.0)[:, None], [i % 2 for i in range(100)])
    pools = split_pools(ds, 0.1, 0.0, seed=3)
    assert len(pools.initial_labeled) == 10
    assert len(pools.unlabeled) == 90
    ids = {it.id for it, _ in pools.initial_labeled}
    assert ids.isdisjoint(it.id for it in pools.unlabeled)


def test_split_same_seed_identical():
    ds = make_dataset(np.arange(40.0)[:, None], [i % 2 for i in range(40)])
    a = split_pools(ds, 0.2, 0.2, seed=9)
    b = split_pools(ds, 0.2, 0.2, seed=9)
    assert [it.id for it, _ in a.initial_labeled] == [it.id for it, _ in b.initial_labeled]
    assert [it.id for it in a.unlabeled] == [it.id for it in b.unlabeled]
    assert [it.id for it, _ in a.test] == [it.id for it, _ in b.test]


def test_split_single_class_errors():
    with pytest.raises(DatasetError):
        binarize_labels(raw_dataset(np.zeros((10, 1)), ["A"] * 10), "majority")
    ones = make_dataset(np.arange(10.0)[:, None], [1] * 10)
    with pytest.raises(DatasetError):
        split_pools(ones, 0.2, 0.0, seed=0)


def test_split_retries_until_both_classes():
    # one positive in twenty: most draws of 2 miss it, the retry loop must find it
    ds = make_dataset(np.arange(20.0)[:, None], [1] + [0] * 19)
    pools = split_pools(ds, 0.1, 0.0, seed=5)
    assert {lab for _, lab in pools.initial_labeled} == {0, 1}


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(20, 120),
    f_init=st.floats(0.05, 0.4),
    f_test=st.floats(0.0, 0.4),
    seed=st.integers(0, 2**31),
)
def test_split_partition_property(n, f_init, f_test, seed):
    ds = make_dataset(np.arange(float(n))[:, None], [i % 3 == 0 for i in range(n)])
    pools = split_pools(ds, f_init, f_test, seed=seed)
    ids = [it.id for it, _ in pools.initial_labeled] + [it.id for it in pools.unlabeled]
    ids += [it.id for it, _ in pools.test]
    assert sorted(ids) == list(range(n))


def test_different_seeds_differ():
    ds = make_dataset(np.arange(40.0)[:, None], [i % 2 for i in range(40)])
    splits = {tuple(it.id for it, _ in split_pools(ds, 0.25, 0.0, seed=s).initial_labeled) for s in range(10)}
    assert len(splits) > 1
