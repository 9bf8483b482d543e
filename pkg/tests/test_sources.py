import threading
import time

import numpy as np
import pytest

from crowdal.crowd import FileQueue, GoldReplay, SimulatedCrowd, TranscriptReplay, WorkerModel


def _items():
    from crowdal.dataset import Item

    return [Item(i, np.zeros(1), i % 2, i % 3) for i in range(6)]


def test_gold_replay():
    votes = GoldReplay(_items()).request([1, 2], {1: 3, 2: 1})
    assert votes == {1: [("gold", 1)] * 3, 2: [("gold", 0)]}


def test_simulated_crowd_fresh_votes_on_repeat():
    crowd = SimulatedCrowd(WorkerModel({0: 0.6, 1: 0.6, 2: 0.6}, seed=2), _items())
    first = crowd.request([0], 25)
    second = crowd.request([0], 25)
    assert first != second
    again = SimulatedCrowd(WorkerModel({0: 0.6, 1: 0.6, 2: 0.6}, seed=2), _items()).request([0], 25)
    assert first == again


def test_transcript_replay_in_order():
    replay = TranscriptReplay({3: [("a", 1), ("b", 0), ("c", 1)]})
    assert replay.request([3], 2) == {3: [("a", 1), ("b", 0)]}
    assert replay.request([3], 1) == {3: [("c", 1)]}
    with pytest.raises(KeyError):
        replay.request([3], 1)


def _queue(tmp_path, **kw):
    return FileQueue(tmp_path / "q.csv", tmp_path / "a.csv", {i: i % 3 for i in range(10)}, poll_interval=0.01, **kw)


def test_file_queue_round_trip(tmp_path):
    q = _queue(tmp_path, timeout=5)
    answers = tmp_path / "a.csv"

    def labeler():
        # wait for the questions, then answer with a split write and noise
        while not (tmp_path / "q.csv").exists():
            time.sleep(0.01)
        with answers.open("a", encoding="utf-8") as fh:
            fh.write("9,x,1\n")  # never asked
            fh.write("4,alice,1\n4,bo")
            fh.flush()
            time.sleep(0.05)
            fh.write("b,0\n5,carol,0\n4,dave,1\n")  # dave is surplus

    t = threading.Thread(target=labeler)
    t.start()
    votes = q.request([4, 5], {4: 2, 5: 1})
    t.join()
    assert votes == {4: [("alice", 1), ("bob", 0)], 5: [("carol", 0)]}
    assert (tmp_path / "q.csv").read_text() == "4,1,2\n5,2,1\n"


def test_file_queue_timeout(tmp_path):
    q = _queue(tmp_path, timeout=0.05)
    with pytest.raises(TimeoutError):
        q.request([1], 1)


def test_file_queue_skips_malformed(tmp_path):
    (tmp_path / "a.csv").write_text("garbage\n2,w,7\n2,w,x\n2,w,1\n")
    q = _queue(tmp_path, timeout=1)
    assert q.request([2], 1) == {2: [("w", 1)]}
