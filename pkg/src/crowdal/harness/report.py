"""Comparison reports rebuilt from persisted run logs.

Nothing here reads ``summary.csv`` or ``cells.csv``; every number comes from
``runs/*.jsonl`` so a report can always be regenerated and checked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..metrics import LearningCurve, compare_curves
from .plotting import plot_curves
from .runner import SUMMARY_FIELDS, curve_points, load_cells, summarize, write_csv

UNDEFINED = "undefined"
COMPARISON_FIELDS = ("baseline", "method", "auc_ratio", "auclog_ratio", "questions_saved")


@dataclass
class Report:
    path: Path
    config_hash: str
    curves: dict[str, LearningCurve]
    comparisons: list[dict]
    figures: list[Path]


def parse_pairs(text: str | None) -> list[tuple[str, str]] | None:
    """``"baseline:uncertainty,baseline:minexperror"`` -> list of pairs."""
    if text is None:
        return None
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        a, sep, b = chunk.partition(":")
        if not sep or not a or not b:
            raise ValueError(f"bad pair {chunk!r}; expected baseline:method")
        pairs.append((a, b))
    return pairs


def _default_pairs(store_dir: Path, rankers: Sequence[str]) -> list[tuple[str, str]]:
    meta = json.loads((store_dir / "config.json").read_text(encoding="utf-8"))
    pairs = [tuple(p.split(":")) if isinstance(p, str) else tuple(p) for p in meta["config"].get("pairs", [])]
    if pairs:
        return pairs
    if "baseline" in rankers:
        return [("baseline", r) for r in rankers if r != "baseline"]
    return []


def _fmt(v):
    return UNDEFINED if v is None else repr(float(v))


def emit_report(
    store_dir: str | Path,
    pairs: Sequence[tuple[str, str]] | None = None,
    out_dir: str | Path | None = None,
    figures: bool = True,
) -> Report:
    """Write comparison.csv, report.json, per-curve CSVs and PNG figures.

    ``pairs`` lists ``(baseline, method)`` rankers; by default the config's
    ``pairs`` or, failing that, ``baseline`` against every other ranker.
    """
    store_dir = Path(store_dir)
    out = Path(out_dir) if out_dir is not None else store_dir / "report"
    (out / "curves").mkdir(parents=True, exist_ok=True)
    config_hash, metric, cells = load_cells(store_dir)
    rows = summarize(cells)
    write_csv(out / "summary.csv", config_hash, SUMMARY_FIELDS, rows)

    curves: dict[str, LearningCurve] = {}
    for ranker in sorted({r["ranker"] for r in rows}):
        xs, qs = curve_points(rows, ranker)
        if len(xs) == 0:
            continue
        curve = LearningCurve.from_xy(xs, qs, metric=metric, label=ranker)
        curves[ranker] = curve
        write_csv(
            out / "curves" / f"{ranker}.csv",
            config_hash,
            ("questions", "quality"),
            [{"questions": float(x), "quality": float(q)} for x, q in curve.points],
        )

    if pairs is None:
        pairs = _default_pairs(store_dir, sorted(curves))
    comparisons = []
    for base, method in pairs:
        if base not in curves or method not in curves:
            raise ValueError(f"pair {base}:{method} names a ranker with no curve in {store_dir}")
        a, b = curves[base], curves[method]
        if len(a.points) < 2 or len(b.points) < 2:
            row = {"baseline": base, "method": method, "auc_ratio": None, "auclog_ratio": None,
                   "questions_saved": None}
        else:
            rep = compare_curves(a, b)
            row = {"baseline": base, "method": method, "auc_ratio": rep.auc_ratio,
                   "auclog_ratio": rep.auclog_ratio, "questions_saved": rep.questions_saved}
        comparisons.append(row)

    lines = [f"# config_hash={config_hash}", ",".join(COMPARISON_FIELDS)]
    for row in comparisons:
        lines.append(",".join([row["baseline"], row["method"]] + [_fmt(row[k]) for k in COMPARISON_FIELDS[2:]]))
    (out / "comparison.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    doc = {
        "config_hash": config_hash,
        "metric": metric,
        "curves": {k: [list(p) for p in c.points] for k, c in curves.items()},
        "comparisons": [{k: (UNDEFINED if v is None else v) for k, v in row.items()} for row in comparisons],
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    figs = []
    if figures and curves:
        figs.append(plot_curves(curves, out / "learning_curves.png", metric))
        if all(c.x[0] > 0 for c in curves.values()):
            figs.append(plot_curves(curves, out / "learning_curves_log.png", metric, log_x=True))
    return Report(out, config_hash, curves, comparisons, figs)
