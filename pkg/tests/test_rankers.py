import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crowdal._seeding import derive_seed
from crowdal.bootstrap import train_ensemble
from crowdal.classifiers import (
    ClassifierSpec,
    TrainedModel,
    UnsupportedOperationError,
    fit_arrays,
    fold_partition,
    predict_many,
)
from crowdal.dataset import Item
from crowdal.rankers import (
    MinExpErrorTerms,
    ScoreVector,
    baseline_scores,
    cv_error_estimates,
    margin_distance_scores,
    min_exp_error_scores,
    min_exp_error_terms,
    select_batch,
    smoothed_scores,
    uncertainty_scores,
)
from crowdal.synth import generate

from conftest import labeled_pairs

LINEAR = ClassifierSpec("linear")


def _items(X, start=1000):
    return [Item(start + i, np.asarray(row, dtype=float)) for i, row in enumerate(X)]


def test_uncertainty_examples():
    m = np.array([[1] * 10, [1] * 5 + [0] * 5, [1] * 3 + [0] * 7])
    s = uncertainty_scores(m).scores
    assert s[0] == 0.0
    assert s[1] == 0.25
    assert s[2] == pytest.approx(0.21)


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 30), st.integers(2, 15)), elements=st.integers(0, 1)), st.randoms())
def test_uncertainty_invariants(matrix, rnd):
    s = uncertainty_scores(matrix).scores
    assert np.all((s >= 0) & (s <= 0.25))
    unanimous = np.all(matrix == matrix[:, :1], axis=1)
    np.testing.assert_array_equal(s == 0, unanimous)
    cols = list(range(matrix.shape[1]))
    rnd.shuffle(cols)
    np.testing.assert_array_equal(uncertainty_scores(matrix[:, cols]).scores, s)


def test_min_exp_error_hand_example():
    t = MinExpErrorTerms(np.array([0.8]), np.array([0.1]), np.array([0.3]))
    assert t.expected_error[0] == pytest.approx(0.14)
    assert t.expected_accuracy[0] == pytest.approx(0.86)


def test_unanimous_agreement_ignores_wrong_error():
    a = MinExpErrorTerms(np.array([1.0]), np.array([0.2]), np.array([0.9]))
    b = MinExpErrorTerms(np.array([1.0]), np.array([0.2]), np.array([0.0]))
    assert a.expected_error[0] == b.expected_error[0] == 0.2


def test_smoothing_preserves_ties():
    s = smoothed_scores(np.array([0.7, 0.7, 0.9]), 1.0)
    assert s[0] == s[1]
    assert s.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    p=st.floats(0, 1),
    er=st.floats(0, 1),
    ew=st.floats(0, 1),
    delta=st.floats(0.001, 0.5),
)
def test_min_exp_error_monotone(p, er, ew, delta):
    base = MinExpErrorTerms(np.array([p]), np.array([er]), np.array([ew])).expected_accuracy[0]
    lower = MinExpErrorTerms(
        np.array([p]), np.array([max(er - delta, 0)]), np.array([max(ew - delta, 0)])
    ).expected_accuracy[0]
    assert lower >= base - 1e-12
    if er >= ew:
        less_agree = MinExpErrorTerms(np.array([max(p - delta, 0)]), np.array([er]), np.array([ew]))
        assert less_agree.expected_accuracy[0] >= base - 1e-12


def _mee_fixture(n_lab=24, n_unl=15, seed=3, kind="overlap"):
    X, y = generate(kind, n_lab + n_unl, seed)
    labeled = labeled_pairs(X[:n_lab], y[:n_lab])
    unlabeled = _items(X[n_lab:])
    return labeled, unlabeled


def test_cv_errors_fast_path_matches_generic():
    labeled, unlabeled = _mee_fixture()
    U = np.vstack([it.features for it in unlabeled])
    cand = np.arange(len(U)) % 2
    fast = cv_error_estimates(LINEAR, labeled, U, cand, 3, seed=5, fast=True)
    slow = cv_error_estimates(LINEAR, labeled, U, cand, 3, seed=5, fast=False)
    np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-12)


def test_cv_errors_against_independent_loop():
    labeled, unlabeled = _mee_fixture(n_lab=12, n_unl=4)
    ordered = sorted(labeled, key=lambda p: p[0].id)
    X = np.vstack([it.features for it, _ in ordered])
    y = np.array([lab for _, lab in ordered])
    folds = fold_partition(len(y), 3, derive_seed(7, "mee-folds"))
    for cand in unlabeled:
        for label in (0, 1):
            errs = []
            for f, test in enumerate(folds):
                train = [i for i in range(len(y)) if i not in set(test.tolist())]
                model = fit_arrays(
                    LINEAR,
                    np.vstack([X[train], cand.features]),
                    np.append(y[train], label),
                    derive_seed(7, "mee-fit", f),
                )
                errs.append(np.mean(predict_many(model, X[test]) != y[test]))
            got = cv_error_estimates(LINEAR, labeled, cand.features[None, :], np.array([label]), 3, seed=7)
            assert got[0] == pytest.approx(np.mean(errs), abs=1e-12)


def test_cv_errors_workers_equal_sequential():
    labeled, unlabeled = _mee_fixture()
    U = np.vstack([it.features for it in unlabeled])
    cand = np.ones(len(U), dtype=int)
    a = cv_error_estimates(LINEAR, labeled, U, cand, 3, seed=1, workers=1)
    b = cv_error_estimates(LINEAR, labeled, U, cand, 3, seed=1, workers=3)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ["linear", "tree"])
def test_min_exp_error_scores_normalized(kind):
    labeled, unlabeled = _mee_fixture()
    spec = ClassifierSpec(kind)
    ens = train_ensemble(spec, labeled, 10, 4)
    s = min_exp_error_scores(spec, labeled, ens, unlabeled, seed=2)
    assert s.scores.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(s.scores > 0)
    assert s.item_ids.tolist() == [it.id for it in unlabeled]


def test_min_exp_error_terms_use_base_model_predictions():
    labeled, unlabeled = _mee_fixture()
    ens = train_ensemble(LINEAR, labeled, 10, 4)
    base = fit_arrays(LINEAR, *[np.vstack([it.features for it, _ in labeled]), np.array([l for _, l in labeled])], 0)
    t = min_exp_error_terms(LINEAR, labeled, ens, unlabeled, seed=2, base_model=base)
    from crowdal.bootstrap import ensemble_labels

    U = np.vstack([it.features for it in unlabeled])
    agree = np.mean(ensemble_labels(ens, U) == predict_many(base, U)[:, None], axis=1)
    np.testing.assert_array_equal(t.agreement, agree)


def test_min_exp_error_needs_enough_labeled():
    labeled, unlabeled = _mee_fixture(n_lab=4)
    ens = train_ensemble(LINEAR, labeled, 3, 0)
    with pytest.raises(ValueError):
        min_exp_error_scores(LINEAR, labeled, ens, unlabeled, cv_folds=5)


def _linear(w, b):
    return TrainedModel("linear", {"weights": np.asarray(w, dtype=float), "bias": float(b)}, 1, len(w))


def test_margin_distance_examples():
    model = _linear([1.0, 0.0], 0.0)
    s = margin_distance_scores(model, _items([[0.0, 3.0], [1.0, 0.0], [-1.0, 0.0], [4.0, 1.0]])).scores
    assert s[0] == 1.0
    assert s[1] == s[2] == 0.5
    assert s[3] < s[1]


def test_margin_distance_rejects_tree():
    tree = fit_arrays(ClassifierSpec("tree"), np.array([[0.0], [1.0]]), np.array([0, 1]), 0)
    with pytest.raises(UnsupportedOperationError):
        margin_distance_scores(tree, _items([[0.5]]))


def test_baseline_examples():
    assert baseline_scores(_items([[0.0]] * 3)).scores.tolist() == pytest.approx([1 / 3] * 3)
    assert baseline_scores(_items([[0.0]])).scores.tolist() == [1.0]
    s = baseline_scores(_items(np.zeros((17, 1)))).scores
    assert s.max() / s.min() == 1.0
    with pytest.raises(ValueError):
        baseline_scores([])


def _sv(scores, ids=None):
    scores = np.asarray(scores, dtype=float)
    ids = np.arange(len(scores)) if ids is None else np.asarray(ids)
    return ScoreVector(ids, scores, "test")


def test_select_forced_first_draw():
    assert select_batch(_sv([0, 0, 1, 0]), 1, seed=3).item_ids == (2,)


def test_select_exhaustion():
    batch = select_batch(_sv([0.1, 0.5, 0.2], ids=[7, 8, 9]), 10, seed=0)
    assert sorted(batch.item_ids) == [7, 8, 9]


def test_select_zero_scores_fall_back_to_uniform():
    batch = select_batch(_sv([0, 0, 1, 0]), 4, seed=1)
    assert batch.item_ids[0] == 2
    assert sorted(batch.item_ids) == [0, 1, 2, 3]


def test_select_rejects_bad_input():
    with pytest.raises(ValueError):
        select_batch(_sv([1.0]), 0, seed=0)
    with pytest.raises(ValueError):
        select_batch(_sv([]), 1, seed=0)


@settings(max_examples=60, deadline=None)
@given(
    scores=st.lists(st.floats(0, 10), min_size=1, max_size=30),
    size=st.integers(1, 40),
    seed=st.integers(0, 2**32),
)
def test_select_properties(scores, size, seed):
    sv = _sv(scores)
    a = select_batch(sv, size, seed)
    assert a == select_batch(sv, size, seed)
    assert len(a.item_ids) == min(size, len(scores))
    assert len(set(a.item_ids)) == len(a.item_ids)


def test_select_first_draw_marginals():
    scores = np.array([1.0, 2.0, 3.0, 4.0])
    trials = 20_000
    counts = np.zeros(4)
    for s in range(trials):
        counts[select_batch(_sv(scores), 1, s).item_ids[0]] += 1
    p = scores / scores.sum()
    se = np.sqrt(p * (1 - p) / trials)
    assert np.all(np.abs(counts / trials - p) < 3 * se)


@pytest.mark.slow
def test_select_uniform_million_trials():
    sv = _sv([0.25] * 4)
    trials = 1_000_000
    counts = np.zeros(4)
    for s in range(trials):
        counts[select_batch(sv, 1, s).item_ids[0]] += 1
    se = np.sqrt(0.25 * 0.75 / trials)
    assert np.all(np.abs(counts / trials - 0.25) < 3 * se)
