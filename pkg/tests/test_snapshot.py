import random

import pytest

from cmabfas.learner import Cmabfas, LearnerConfig
from cmabfas.snapshot import MAGIC, SnapshotError, inspect, restore, snapshot
from conftest import tree_headers


def stream(n, seed):
    rng = random.Random(seed)
    tree = tree_headers()
    return [(tree[rng.randrange(8)], [rng.randrange(9) / 8 for _ in range(3)]) for _ in range(n)]


def play(learner, items):
    out = []
    for x, r in items:
        a, scores = learner.select_action(x)
        learner.observe(x, a, r[a - 1])
        out.append((a, [s.value for s in scores]))
    return out


def trained(steps=1500, seed=3, c=0.2):
    learner = Cmabfas(LearnerConfig(k=3, T=5000, c=c, seed=seed))
    play(learner, stream(steps, seed))
    return learner


def test_round_trip_fresh_and_trained():
    fresh = Cmabfas(LearnerConfig(k=2, T=10, c=0.5, lam=2.0, seed=9))
    assert restore(snapshot(fresh)) == fresh
    learner = trained()
    copy = restore(snapshot(learner))
    assert copy == learner
    assert snapshot(copy) == snapshot(learner)
    for a in range(1, 4):
        for b1, b2 in zip(learner.cover(a).balls, copy.cover(a).balls):
            assert (b1.score, b1.full) == (b2.score, b2.full)


def test_continuation_is_identical():
    learner = trained()
    copy = restore(snapshot(learner))
    rest = stream(2000, 99)
    assert play(learner, rest) == play(copy, rest)
    assert learner == copy


def test_round_trip_with_pending_selection():
    learner = trained(300)
    x = tree_headers()[5]
    a, _ = learner.select_action(x)
    copy = restore(snapshot(learner))
    assert copy == learner
    copy.observe(x, a, 0.5)
    learner.observe(x, a, 0.5)
    assert copy == learner
    assert inspect(snapshot(learner)).has_pending is False


def test_inspect():
    learner = trained(500)
    info = inspect(snapshot(learner))
    assert info.version == 1
    assert info.config == learner.config
    assert info.t == 500
    assert info.balls_per_action == [len(learner.cover(a)) for a in range(1, 4)]
    assert 1 <= info.n_headers <= 8


def test_corruption_is_detected():
    record = bytearray(snapshot(trained(200)))
    flipped = bytearray(record)
    flipped[40] ^= 0x01
    with pytest.raises(SnapshotError, match="checksum"):
        restore(bytes(flipped))
    with pytest.raises(SnapshotError, match="truncated"):
        restore(bytes(record[:-5]))
    with pytest.raises(SnapshotError, match="magic"):
        restore(b"NOTMAGIC" + bytes(record[8:]))
    with pytest.raises(SnapshotError, match="magic"):
        restore(b"")
    bumped = bytearray(record)
    bumped[len(MAGIC)] = 2
    with pytest.raises(SnapshotError, match="version"):
        restore(bytes(bumped))
    assert isinstance(SnapshotError("x"), ValueError)
