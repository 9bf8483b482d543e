"""Experiment configuration: a versioned JSON document.

Minimal example::

    {
      "schema_version": 1,
      "dataset": {"synthetic": {"kind": "separable", "n": 200, "seed": 1}},
      "scenario": "iterative",
      "rankers": ["baseline", "uncertainty"],
      "budgets": [0.1, 0.2, 0.5, 1.0],
      "repetitions": 3,
      "master_seed": 7,
      "output_dir": "results"
    }

See the README for every key.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..classifiers import ClassifierSpec
from ..crowd.pba import PBAConfig
from ..dataset import ColumnSchema, Dataset, assign_subgroups, binarize_labels, parse_dataset
from ..loops import LoopConfig
from ..metrics import METRICS
from ..rankers import RANKERS
from ..synth import BUNDLED, SYNTHETIC_KINDS, bundled_dataset, synthetic_dataset

SCHEMA_VERSION = 1
SCENARIOS = ("upfront", "iterative")
SOURCE_KINDS = ("gold", "simulated", "file")

_TOP_KEYS = {
    "schema_version", "dataset", "classifier", "scenario", "rankers", "budgets", "batch_size",
    "answer_source", "pba", "loop", "metric", "initial_fraction", "test_fraction",
    "repetitions", "master_seed", "output_dir", "pairs", "name",
}


class ConfigError(ValueError):
    pass


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ExperimentConfig:
    raw: dict
    dataset: dict
    classifier: ClassifierSpec
    scenario: str
    rankers: list[str]
    budgets: list[float]
    batch_size: int | None
    answer_source: dict
    pba: dict | None
    loop: LoopConfig
    metric: str
    initial_fraction: float
    test_fraction: float
    repetitions: int
    master_seed: int
    output_dir: Path
    pairs: list[tuple[str, str]] = field(default_factory=list)
    base_dir: Path = Path(".")

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode("utf-8")).hexdigest()

    def load_dataset(self) -> Dataset:
        d = self.dataset
        if "synthetic" in d:
            s = d["synthetic"]
            ds = synthetic_dataset(s["kind"], int(s["n"]), int(s["seed"]))
        elif "bundled" in d:
            ds = bundled_dataset(d["bundled"])
        else:
            path = Path(d["path"])
            if not path.is_absolute():
                path = self.base_dir / path
            ds = parse_dataset(path, ColumnSchema(label=d.get("label", "class"), subgroup=d.get("subgroup")))
            policy = d.get("binarize", "majority")
            if isinstance(policy, dict):
                policy = (policy["positive"], policy["negative"])
            ds = binarize_labels(ds, policy)
        groups = d.get("num_subgroups")
        if groups is None and (self.pba is not None or self.answer_source["kind"] == "simulated"):
            groups = 1 if self.pba is None else int(self.pba.get("num_groups", 4))
        if groups is not None:
            ds = assign_subgroups(ds, int(groups))
        return ds

    def pba_config(self, question_budget: int) -> PBAConfig | None:
        if self.pba is None:
            return None
        p = self.pba
        num_groups = int(p.get("num_groups", 4))
        cfg = PBAConfig(num_groups, int(p.get("n0", 2)), int(p.get("v0", 9)), int(p.get("b_max", 9)), 0)
        votes = cfg.probe_cost + int(round(float(p.get("votes_per_question", 2.0)) * question_budget))
        return PBAConfig(cfg.num_groups, cfg.n0, cfg.v0, cfg.b_max, votes)


def _need(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def parse_config(raw: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    base_dir = Path(base_dir)
    _need(raw.get("schema_version") == SCHEMA_VERSION, f"schema_version must be {SCHEMA_VERSION}")
    unknown = set(raw) - _TOP_KEYS
    _need(not unknown, f"unknown config keys {sorted(unknown)}")

    dataset = raw.get("dataset")
    _need(isinstance(dataset, dict), "dataset must be an object")
    sources = [k for k in ("path", "bundled", "synthetic") if k in dataset]
    _need(len(sources) == 1, "dataset needs exactly one of path, bundled, synthetic")
    if "path" in dataset:
        path = Path(dataset["path"])
        path = path if path.is_absolute() else base_dir / path
        _need(path.is_file(), f"dataset file {path} does not exist")
    if "bundled" in dataset:
        _need(dataset["bundled"] in BUNDLED, f"unknown bundled dataset {dataset['bundled']!r}")
    if "synthetic" in dataset:
        _need(dataset["synthetic"].get("kind") in SYNTHETIC_KINDS, "unknown synthetic kind")

    try:
        classifier = ClassifierSpec(**raw.get("classifier", {"kind": "linear"}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"classifier: {exc}") from None

    scenario = raw.get("scenario", "iterative")
    _need(scenario in SCENARIOS, f"scenario must be one of {SCENARIOS}")
    rankers = list(raw.get("rankers", ["baseline", "uncertainty"]))
    _need(rankers and all(r in RANKERS for r in rankers), f"rankers must come from {RANKERS}")
    _need(len(set(rankers)) == len(rankers), "rankers must be distinct")
    budgets = [float(b) for b in raw.get("budgets", [0.1 * k for k in range(1, 11)])]
    _need(budgets and all(0 < b <= 1 for b in budgets), "budgets must lie in (0, 1]")
    _need(len(set(budgets)) == len(budgets), "budgets must be distinct")
    batch_size = raw.get("batch_size")
    _need(batch_size is None or int(batch_size) >= 1, "batch_size must be >= 1 or null")

    source = dict(raw.get("answer_source", {"kind": "gold"}))
    _need(source.get("kind") in SOURCE_KINDS, f"answer_source.kind must be one of {SOURCE_KINDS}")
    if source["kind"] == "simulated":
        accs = [float(v) for v in source.get("subgroup_accuracy", {}).values()]
        accs.append(float(source.get("accuracy", 0.8)))
        _need(all(0 < a < 1 for a in accs), "worker accuracies must lie strictly inside (0, 1)")
    if source["kind"] == "file":
        _need("questions" in source and "answers" in source, "file source needs questions and answers paths")

    pba = raw.get("pba")
    if pba is not None:
        try:
            PBAConfig(int(pba.get("num_groups", 4)), int(pba.get("n0", 2)), int(pba.get("v0", 9)),
                      int(pba.get("b_max", 9)), 0)
        except ValueError as exc:
            raise ConfigError(f"pba: {exc}") from None

    metric = raw.get("metric", "accuracy")
    _need(metric in METRICS, f"metric must be one of {METRICS}")
    loop_kw = dict(raw.get("loop", {}))
    loop_kw.setdefault("quality_metric", metric)
    try:
        loop = LoopConfig(**loop_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"loop: {exc}") from None

    repetitions = int(raw.get("repetitions", 10))
    _need(repetitions >= 1, "repetitions must be >= 1")
    pairs = []
    for pair in raw.get("pairs", []):
        a, b = pair.split(":") if isinstance(pair, str) else pair
        _need(a in rankers and b in rankers, f"pair {pair!r} names a ranker not in the run")
        pairs.append((a, b))

    return ExperimentConfig(
        raw=raw,
        dataset=dataset,
        classifier=classifier,
        scenario=scenario,
        rankers=rankers,
        budgets=budgets,
        batch_size=None if batch_size is None else int(batch_size),
        answer_source=source,
        pba=pba,
        loop=loop,
        metric=metric,
        initial_fraction=float(raw.get("initial_fraction", 0.03)),
        test_fraction=float(raw.get("test_fraction", 0.0)),
        repetitions=repetitions,
        master_seed=int(raw.get("master_seed", 0)),
        output_dir=Path(raw.get("output_dir", "results")),
        pairs=pairs,
        base_dir=base_dir,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, base_dir=path.parent)
