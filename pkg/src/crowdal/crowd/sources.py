"""Answer sources: where crowd votes come from.

Every source implements ``request(item_ids, votes) -> VoteSet`` where
``votes`` is a constant or a per-item mapping of how many votes to collect.
"""

from __future__ import annotations

import csv
import logging
import time
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from ..dataset import Item
from .votes import VoteSet, WorkerModel, simulate_votes

__all__ = ["AnswerSource", "FileQueue", "GoldReplay", "SimulatedCrowd", "TranscriptReplay"]

log = logging.getLogger(__name__)


class AnswerSource(Protocol):
    def request(self, item_ids: Sequence[int], votes: int | Mapping[int, int]) -> VoteSet: ...


def _wanted(item_ids, votes) -> dict[int, int]:
    if isinstance(votes, Mapping):
        return {i: int(votes[i]) for i in item_ids}
    return {i: int(votes) for i in item_ids}


class SimulatedCrowd:
    """Votes drawn from a :class:`WorkerModel` against the items' gold labels.

    Asking about the same item again draws fresh votes (the stream is keyed
    by how many times the item was asked before).
    """

    def __init__(self, worker_model: WorkerModel, items: Iterable[Item], seed: int | None = None):
        self.worker_model = worker_model
        self.seed = worker_model.seed if seed is None else seed
        self._items = {it.id: it for it in items}
        self._asked: defaultdict[int, int] = defaultdict(int)

    def request(self, item_ids, votes=1) -> VoteSet:
        wanted = _wanted(item_ids, votes)
        out: VoteSet = {}
        for i in item_ids:
            out.update(
                simulate_votes(self.worker_model, [self._items[i]], wanted[i], seed=self.seed, salt=self._asked[i])
            )
            self._asked[i] += 1
        return out


class GoldReplay:
    """Every vote equals the gold label (an expert crowd)."""

    def __init__(self, items: Iterable[Item]):
        self._gold = {}
        for it in items:
            if it.gold_label is not None:
                self._gold[it.id] = it.gold_label

    def request(self, item_ids, votes=1) -> VoteSet:
        wanted = _wanted(item_ids, votes)
        return {i: [("gold", self._gold[i])] * wanted[i] for i in item_ids}


class TranscriptReplay:
    """Replays votes recorded in an earlier run, in their recorded order."""

    def __init__(self, transcript: Mapping[int, Sequence[tuple]]):
        self._votes = {int(i): [(w, int(lab)) for w, lab in vs] for i, vs in transcript.items()}
        self._used: defaultdict[int, int] = defaultdict(int)

    def request(self, item_ids, votes=1) -> VoteSet:
        wanted = _wanted(item_ids, votes)
        out: VoteSet = {}
        for i in item_ids:
            start = self._used[i]
            recorded = self._votes.get(i, [])[start:start + wanted[i]]
            if len(recorded) < wanted[i]:
                raise KeyError(f"transcript has only {len(recorded)} unused votes for item {i}, need {wanted[i]}")
            self._used[i] += wanted[i]
            out[i] = recorded
        return out


class FileQueue:
    """Offline labeling through two append-only CSV files.

    Questions are appended to ``questions_path`` as ``item_id,subgroup,votes_requested``.
    Answers are read from ``answers_path`` as ``item_id,worker_id,label``,
    one vote per line, until every open question has enough votes.  Votes
    beyond the requested count, and votes for items not asked about, are
    ignored and logged.  Single consumer only.
    """

    def __init__(
        self,
        questions_path: str | Path,
        answers_path: str | Path,
        subgroup_of: Mapping[int, int | None],
        poll_interval: float = 1.0,
        timeout: float | None = None,
    ):
        self.questions_path = Path(questions_path)
        self.answers_path = Path(answers_path)
        self.subgroup_of = subgroup_of
        self.poll_interval = poll_interval
        self.timeout = timeout
        self._offset = 0
        self._pending: dict[int, int] = {}
        self._buffer: defaultdict[int, list] = defaultdict(list)

    def _append_questions(self, wanted: Mapping[int, int]) -> None:
        with self.questions_path.open("a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for i, k in wanted.items():
                g = self.subgroup_of.get(i)
                w.writerow([i, "" if g is None else g, k])

    def _read_new_answers(self) -> None:
        if not self.answers_path.exists():
            return
        with self.answers_path.open("rb") as fh:
            fh.seek(self._offset)
            chunk = fh.read()
        # a trailing partial line waits for the next poll
        end = chunk.rfind(b"\n")
        if end < 0:
            return
        self._offset += end + 1
        complete = chunk[:end].decode("utf-8")
        for row in csv.reader(complete.splitlines()):
            if not row:
                continue
            if len(row) != 3:
                log.warning("skipping malformed answer line %r", row)
                continue
            try:
                item_id, worker, label = int(row[0]), row[1].strip(), int(row[2])
            except ValueError:
                log.warning("skipping malformed answer line %r", row)
                continue
            if label not in (0, 1):
                log.warning("skipping answer with label %r for item %s", row[2], item_id)
                continue
            if item_id not in self._pending:
                log.info("ignoring unsolicited answer for item %s", item_id)
                continue
            if len(self._buffer[item_id]) >= self._pending[item_id]:
                log.info("ignoring surplus answer for item %s", item_id)
                continue
            self._buffer[item_id].append((worker, label))

    def request(self, item_ids, votes=1) -> VoteSet:
        wanted = _wanted(item_ids, votes)
        self._pending.update(wanted)
        self._append_questions(wanted)
        start = time.monotonic()
        while True:
            self._read_new_answers()
            if all(len(self._buffer[i]) >= wanted[i] for i in item_ids):
                break
            if self.timeout is not None and time.monotonic() - start > self.timeout:
                missing = {i: wanted[i] - len(self._buffer[i]) for i in item_ids if len(self._buffer[i]) < wanted[i]}
                raise TimeoutError(f"still waiting for votes: {missing}")
            time.sleep(self.poll_interval)
        out = {}
        for i in item_ids:
            out[i] = self._buffer.pop(i)
            del self._pending[i]
        return out
