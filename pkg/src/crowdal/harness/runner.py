"""Grid execution: every (ranker, budget, repetition) cell of an experiment."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .._seeding import derive_seed
from ..crowd.sources import FileQueue, GoldReplay, SimulatedCrowd
from ..crowd.votes import WorkerModel
from ..dataset import Dataset, PoolSplit, split_pools
from ..loops import LoopConfig, RunLog, run_iterative, run_upfront
from ..metrics import quality
from .config import ExperimentConfig, canonical_json

log = logging.getLogger(__name__)

CELL_FIELDS = (
    "ranker", "scenario", "budget", "repetition", "status", "questions", "votes",
    "quality", "crowd_quality", "model_quality", "error",
)
SUMMARY_FIELDS = (
    "ranker", "scenario", "budget", "runs", "failures", "questions", "votes",
    "quality", "crowd_quality", "model_quality",
)


@dataclass
class CellResult:
    ranker: str
    scenario: str
    budget: float
    repetition: int
    status: str
    questions: int | None = None
    votes: int | None = None
    quality: float | None = None
    crowd_quality: float | None = None
    model_quality: float | None = None
    error: str = ""
    run_path: str = ""


@dataclass
class ResultStore:
    path: Path
    config_hash: str
    metric: str
    cells: list[CellResult] = field(default_factory=list)

    @property
    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if c.status != "ok"]

    @property
    def summary_path(self) -> Path:
        return self.path / "summary.csv"


def repetition_seed(master_seed: int, repetition: int) -> int:
    return derive_seed(master_seed, "repetition", repetition)


def budget_questions(fraction: float, pool_size: int) -> int:
    return max(1, math.floor(fraction * pool_size + 0.5))


def cell_metrics(run: RunLog, metric: str) -> dict:
    """Questions, votes and qualities of one finished run, from its log alone."""
    ids = sorted(i for i in run.final_labels if i in run.gold)
    if not ids:
        raise ValueError("run has no gold labels to score against")
    pred = [run.final_labels[i][0] for i in ids]
    gold = [run.gold[i] for i in ids]
    crowd = [i for i in ids if run.final_labels[i][1] == "crowd"]
    model = [i for i in ids if run.final_labels[i][1] == "model"]

    def part(sel):
        if not sel:
            return None
        return quality(metric, [run.final_labels[i][0] for i in sel], [run.gold[i] for i in sel])

    return {
        "questions": run.questions,
        "votes": run.votes_used,
        "quality": quality(metric, pred, gold),
        "crowd_quality": part(crowd),
        "model_quality": part(model),
    }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(math.fsum(vals) / len(vals)) if vals else None


def summarize(cells: Sequence[CellResult]) -> list[dict]:
    groups: dict[tuple, list[CellResult]] = {}
    for c in cells:
        groups.setdefault((c.ranker, c.scenario, c.budget), []).append(c)
    rows = []
    for (ranker, scenario, budget), cs in sorted(groups.items()):
        ok = sorted((c for c in cs if c.status == "ok"), key=lambda c: c.repetition)
        rows.append({
            "ranker": ranker,
            "scenario": scenario,
            "budget": budget,
            "runs": len(ok),
            "failures": len(cs) - len(ok),
            "questions": _mean(c.questions for c in ok),
            "votes": _mean(c.votes for c in ok),
            "quality": _mean(c.quality for c in ok),
            "crowd_quality": _mean(c.crowd_quality for c in ok),
            "model_quality": _mean(c.model_quality for c in ok),
        })
    return rows


def write_csv(path: Path, config_hash: str, fields: Sequence[str], rows: Sequence[Mapping]) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row.get(f)) for f in fields])
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: Path) -> tuple[str | None, list[dict]]:
    """Rows of a harness CSV plus the config hash from its header line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    config_hash = None
    if lines and lines[0].startswith("# config_hash="):
        config_hash = lines[0].split("=", 1)[1]
        lines = lines[1:]
    return config_hash, list(csv.DictReader(lines))


def _answer_source(config: ExperimentConfig, ds: Dataset, seed: int, cell_dir: Path):
    src = config.answer_source
    if src["kind"] == "gold":
        return GoldReplay(ds.items)
    if src["kind"] == "simulated":
        default = float(src.get("accuracy", 0.8))
        groups = sorted({it.subgroup for it in ds.items if it.subgroup is not None}) or [0]
        acc = {g: float(src.get("subgroup_accuracy", {}).get(str(g), default)) for g in groups}
        wm = WorkerModel(acc, int(src.get("workers_per_label", 1)), derive_seed(seed, "crowd"))
        return SimulatedCrowd(wm, ds.items)
    base = config.base_dir
    q = Path(src["questions"])
    a = Path(src["answers"])
    return FileQueue(
        q if q.is_absolute() else base / q,
        a if a.is_absolute() else base / a,
        {it.id: it.subgroup for it in ds.items},
        float(src.get("poll_interval", 1.0)),
        src.get("timeout"),
    )


def _run_dir(config: ExperimentConfig, output_root: Path | None, stamp: str | None) -> Path:
    root = output_root if output_root is not None else config.output_dir
    if not root.is_absolute() and output_root is None:
        root = config.base_dir / root
    stamp = stamp or time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    base = f"{config.config_hash[:12]}-{stamp}"
    path = root / base
    n = 1
    while path.exists():
        path = root / f"{base}-{n}"
        n += 1
    return path


def _loop_config(config: ExperimentConfig, budget: int) -> LoopConfig:
    return LoopConfig(**{**config.loop.__dict__, "pba": config.pba_config(budget)})


def _execute(config: ExperimentConfig, pools: PoolSplit, ranker: str, budget: int, source, seed: int) -> RunLog:
    loop = _loop_config(config, budget)
    if config.scenario == "upfront":
        return run_upfront(pools, config.classifier, ranker, budget, source, loop, seed)
    return run_iterative(pools, config.classifier, ranker, budget, config.batch_size, source, loop, seed)


def run_experiment(
    config: ExperimentConfig,
    output_root: str | Path | None = None,
    stamp: str | None = None,
) -> ResultStore:
    """Run every grid cell, persist run logs and CSVs, and return the store.

    Cells run in a fixed order and each draws its randomness only from the
    repetition seed, so results do not depend on scheduling.  A failing cell
    is recorded with its error and the rest of the grid still runs.
    """
    out = _run_dir(config, None if output_root is None else Path(output_root), stamp)
    (out / "runs").mkdir(parents=True)
    (out / "config.json").write_text(
        json.dumps({"config_hash": config.config_hash, "config": config.raw}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    store = ResultStore(out, config.config_hash, config.metric)
    ds = config.load_dataset()

    for rep in range(config.repetitions):
        seed = repetition_seed(config.master_seed, rep)
        try:
            pools = split_pools(ds, config.initial_fraction, config.test_fraction, derive_seed(seed, "split"))
        except Exception as exc:  # noqa: BLE001 - recorded per cell
            for ranker in config.rankers:
                for frac in config.budgets:
                    store.cells.append(CellResult(ranker, config.scenario, frac, rep, "failed", error=repr(exc)))
            continue
        for ranker in config.rankers:
            for bi, frac in enumerate(config.budgets):
                budget = budget_questions(frac, len(pools.unlabeled))
                cell = CellResult(ranker, config.scenario, frac, rep, "ok")
                name = f"{ranker}-b{bi:02d}-r{rep:03d}.jsonl"
                try:
                    source = _answer_source(config, ds, seed, out)
                    run = _execute(config, pools, ranker, budget, source, seed)
                    header = {
                        "config_hash": config.config_hash,
                        "ranker": ranker,
                        "scenario": config.scenario,
                        "budget": frac,
                        "budget_questions": budget,
                        "repetition": rep,
                        "metric": config.metric,
                    }
                    run.to_jsonl(out / "runs" / name, header)
                    cell.run_path = f"runs/{name}"
                    for k, v in cell_metrics(run, config.metric).items():
                        setattr(cell, k, v)
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    log.error("cell %s failed: %s", name, exc)
                    log.debug("%s", traceback.format_exc())
                    cell.status = "failed"
                    cell.error = repr(exc)
                store.cells.append(cell)

    write_csv(out / "cells.csv", config.config_hash, CELL_FIELDS, [c.__dict__ for c in store.cells])
    write_csv(store.summary_path, config.config_hash, SUMMARY_FIELDS, summarize(store.cells))
    return store


def load_cells(store_dir: str | Path) -> tuple[str, str, list[CellResult]]:
    """Rebuild every cell from the run logs under ``store_dir/runs``.

    Returns ``(config_hash, metric, cells)``.  Logs whose header carries a
    different config hash than ``config.json`` raise an error.
    """
    store_dir = Path(store_dir)
    meta = json.loads((store_dir / "config.json").read_text(encoding="utf-8"))
    config_hash = meta["config_hash"]
    metric = meta["config"].get("metric", "accuracy")
    cells = []
    for path in sorted((store_dir / "runs").glob("*.jsonl")):
        run, header = RunLog.from_jsonl(path)
        if header.get("config_hash") != config_hash:
            raise ValueError(f"{path.name} belongs to config {header.get('config_hash')}, not {config_hash}")
        cell = CellResult(header["ranker"], header["scenario"], float(header["budget"]), int(header["repetition"]), "ok")
        cell.run_path = f"runs/{path.name}"
        for k, v in cell_metrics(run, metric).items():
            setattr(cell, k, v)
        cells.append(cell)
    return config_hash, metric, cells


def curve_points(summary_rows: Sequence[Mapping], ranker: str) -> tuple[np.ndarray, np.ndarray]:
    """Mean (questions, quality) points of one ranker, budgets ascending.

    Budgets that round to the same question count on small pools are merged
    by averaging their qualities.
    """
    rows = sorted((r for r in summary_rows if r["ranker"] == ranker and r["runs"]), key=lambda r: r["budget"])
    merged: dict[float, list[float]] = {}
    for r in rows:
        merged.setdefault(r["questions"], []).append(r["quality"])
    xs = sorted(merged)
    return np.array(xs, dtype=float), np.array([math.fsum(merged[x]) / len(merged[x]) for x in xs])


__all__ = [
    "CellResult",
    "ResultStore",
    "budget_questions",
    "canonical_json",
    "cell_metrics",
    "curve_points",
    "load_cells",
    "read_csv",
    "repetition_seed",
    "run_experiment",
    "summarize",
    "write_csv",
]
