"""Classifier contract plus the two built-in learners.

``linear`` is a hinge-loss linear model fit by stochastic subgradient
descent with L2 regularization on standardized features.  ``tree`` is an
unpruned CART tree using Gini impurity.  Single-class training data always
yields a constant model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numba
import numpy as np

from ._seeding import derive_seed
from .dataset import Item, labeled_arrays
from .metrics import METRICS, quality

__all__ = [
    "ClassifierSpec",
    "QualityEstimate",
    "TrainedModel",
    "UnsupportedOperationError",
    "decision_value",
    "decision_values",
    "fit_arrays",
    "fold_partition",
    "k_fold_quality",
    "predict",
    "predict_many",
    "train",
]

DEFAULTS: dict[str, dict[str, Any]] = {
    "linear": {"eta0": 0.5, "epochs": 20, "reg": 1e-3},
    "tree": {"min_parent": 1, "max_depth": None},
}


class UnsupportedOperationError(TypeError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "linear"
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[self.kind], **self.hyperparameters}
        if self.kind == "linear":
            if merged["eta0"] <= 0 or merged["reg"] <= 0:
                raise ValueError("eta0 and reg must be positive")
            if int(merged["epochs"]) < 1:
                raise ValueError("epochs must be >= 1")
            merged["epochs"] = int(merged["epochs"])
        else:
            if int(merged["min_parent"]) < 1:
                raise ValueError("min_parent must be >= 1")
            if merged["max_depth"] is not None and int(merged["max_depth"]) < 0:
                raise ValueError("max_depth must be >= 0")
        object.__setattr__(self, "hyperparameters", merged)

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.hyperparameters.items()))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters)}


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Fitted parameters.

    linear: ``weights`` and ``bias`` in the raw feature space.
    tree: parallel node arrays ``feature``, ``threshold``, ``left``,
    ``right``, ``leaf_class`` (``-1`` for internal nodes); node 0 is the root.
    """

    kind: str
    parameters: Mapping[str, Any]
    training_size: int
    dimension: int

    @property
    def is_constant(self) -> bool:
        if self.kind == "linear":
            return not np.any(self.parameters["weights"])
        return len(self.parameters["leaf_class"]) == 1

    def same_parameters(self, other: "TrainedModel") -> bool:
        if self.kind != other.kind or self.parameters.keys() != other.parameters.keys():
            return False
        return all(np.array_equal(self.parameters[k], other.parameters[k]) for k in self.parameters)


@dataclass(frozen=True)
class QualityEstimate:
    metric: str
    value: float
    folds: int


# ---------------------------------------------------------------------------
# linear


@numba.njit(cache=True)
def _fit_linear(X, y, perms, eta0, reg):
    n, d = X.shape
    mean = np.zeros(d)
    for i in range(n):
        for j in range(d):
            mean[j] += X[i, j]
    for j in range(d):
        mean[j] /= n
    scale = np.zeros(d)
    for i in range(n):
        for j in range(d):
            scale[j] += (X[i, j] - mean[j]) ** 2
    for j in range(d):
        scale[j] = math.sqrt(scale[j] / n)
        if scale[j] < 1e-12:
            scale[j] = 1.0
    w = np.zeros(d)
    b = 0.0
    t = 0
    z = np.empty(d)
    for e in range(perms.shape[0]):
        for k in range(n):
            i = perms[e, k]
            t += 1
            lr = eta0 / (1.0 + eta0 * reg * t)
            sign = 2.0 * y[i] - 1.0
            s = b
            for j in range(d):
                z[j] = (X[i, j] - mean[j]) / scale[j]
                s += w[j] * z[j]
            shrink = 1.0 - lr * reg
            for j in range(d):
                w[j] *= shrink
            if sign * s < 1.0:
                for j in range(d):
                    w[j] += lr * sign * z[j]
                b += lr * sign
    w_raw = np.empty(d)
    b_raw = b
    for j in range(d):
        w_raw[j] = w[j] / scale[j]
        b_raw -= w[j] * mean[j] / scale[j]
    return w_raw, b_raw


def _epoch_orders(seed: int, n: int, epochs: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.stack([rng.permutation(n) for _ in range(epochs)])


def _constant(kind: str, label: int, n: int, d: int) -> TrainedModel:
    if kind == "linear":
        params = {"weights": np.zeros(d), "bias": 1.0 if label == 1 else -1.0}
    else:
        params = {
            "feature": np.array([-1]),
            "threshold": np.array([0.0]),
            "left": np.array([-1]),
            "right": np.array([-1]),
            "leaf_class": np.array([label]),
        }
    return TrainedModel(kind, params, n, d)


# ---------------------------------------------------------------------------
# tree


def _best_split(X: np.ndarray, y: np.ndarray):
    """Return ``(feature, threshold)`` minimizing weighted child Gini, or None."""
    n = len(y)
    best = None
    best_score = math.inf
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        change = np.flatnonzero(xs[1:] > xs[:-1])
        if change.size == 0:
            continue
        left_n = change + 1
        left_pos = np.cumsum(ys)[change]
        right_n = n - left_n
        right_pos = ys.sum() - left_pos
        pl = left_pos / left_n
        pr = right_pos / right_n
        score = left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)
        # thresholds ascend with the index, so the first near-minimum is the lowest
        k = int(np.argmax(score <= score.min() + 1e-12))
        if score[k] < best_score - 1e-12:
            best_score = score[k]
            best = (f, (xs[change[k]] + xs[change[k] + 1]) / 2.0)
    return best


def _fit_tree(X: np.ndarray, y: np.ndarray, min_parent: int, max_depth) -> dict:
    feature, threshold, left, right, leaf = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf.append(-1)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        pos = int(ys.sum())
        pure = pos == 0 or pos == len(idx)
        split = None
        if not pure and len(idx) >= min_parent and (max_depth is None or depth < max_depth):
            split = _best_split(X[idx], ys)
        if split is None:
            # equal counts go to the lower class id
            leaf[node] = 1 if 2 * pos > len(idx) else 0
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, lnode, rnode
        stack.append((rnode, idx[~go_left], depth + 1))
        stack.append((lnode, idx[go_left], depth + 1))
    return {
        "feature": np.array(feature),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left),
        "right": np.array(right),
        "leaf_class": np.array(leaf),
    }


# ---------------------------------------------------------------------------
# public contract


def fit_arrays(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, seed: int) -> TrainedModel:
    """Train on ``(X, y)`` arrays; row order matters only for the linear learner."""
    n, d = X.shape
    if d == 0:
        raise ValueError("features are zero-dimensional")
    if n == 0:
        raise ValueError("training set is empty")
    y = np.asarray(y, dtype=np.int64)
    first = int(y[0])
    if np.all(y == first):
        return _constant(spec.kind, first, n, d)
    hp = spec.hyperparameters
    if spec.kind == "linear":
        perms = _epoch_orders(seed, n, hp["epochs"])
        w, b = _fit_linear(np.ascontiguousarray(X, dtype=np.float64), y, perms, float(hp["eta0"]), float(hp["reg"]))
        return TrainedModel("linear", {"weights": w, "bias": float(b)}, n, d)
    params = _fit_tree(np.asarray(X, dtype=float), y, int(hp["min_parent"]), hp["max_depth"])
    return TrainedModel("tree", params, n, d)


def train(spec: ClassifierSpec, labeled: Sequence[tuple[Item, int]], seed: int = 0) -> TrainedModel:
    _, X, y = labeled_arrays(labeled)
    return fit_arrays(spec, X, y, seed)


def _check_dim(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dimension:
        raise ValueError(f"model expects {model.dimension} features, got {X.shape[1]}")
    return X


def decision_values(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    if model.kind != "linear":
        raise UnsupportedOperationError(f"{model.kind} models have no decision value")
    X = _check_dim(model, X)
    return X @ model.parameters["weights"] + model.parameters["bias"]


def predict_many(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    if model.kind == "linear":
        return (decision_values(model, X) >= 0).astype(np.int64)
    X = _check_dim(model, X)
    p = model.parameters
    node = np.zeros(len(X), dtype=np.int64)
    active = p["leaf_class"][node] < 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = X[rows, p["feature"][cur]] <= p["threshold"][cur]
        node[rows] = np.where(go_left, p["left"][cur], p["right"][cur])
        active[rows] = p["leaf_class"][node[rows]] < 0
    return p["leaf_class"][node].astype(np.int64)


def predict(model: TrainedModel, item: Item) -> int:
    return int(predict_many(model, item.features)[0])


def decision_value(model: TrainedModel, item: Item) -> float:
    return float(decision_values(model, item.features)[0])


def fold_partition(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Split positions ``0..n-1`` into ``k`` seeded folds whose sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} examples")
    order = np.random.default_rng(derive_seed(seed, "folds", n, k)).permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


def k_fold_quality(
    spec: ClassifierSpec,
    labeled: Sequence[tuple[Item, int]],
    k: int = 5,
    metric: str = "accuracy",
    seed: int = 0,
) -> QualityEstimate:
    """Mean per-fold quality over a seeded k-fold partition.

    The partition is drawn over the id-sorted examples, so the estimate does
    not depend on the order of ``labeled``.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(labeled) < k:
        raise ValueError(f"need at least {k} labeled examples, got {len(labeled)}")
    ordered = sorted(labeled, key=lambda pair: pair[0].id)
    _, X, y = labeled_arrays(ordered)
    scores = []
    for f, test_idx in enumerate(fold_partition(len(y), k, seed)):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        model = fit_arrays(spec, X[mask], y[mask], derive_seed(seed, "fold", f))
        scores.append(quality(metric, predict_many(model, X[test_idx]), y[test_idx]))
    return QualityEstimate(metric, float(np.mean(scores)), k)
