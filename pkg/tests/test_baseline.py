import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmabfas.baseline import BaselineConfig, Cluster, NaiveBaseline, cluster_distance, ucb1_select
from cmabfas.corpus import draw_call
from conftest import header


def test_config_validation():
    for bad in ({"k": 0}, {"k": 2, "max_radius": 17}, {"k": 2, "max_radius": -1}, {"k": 2, "max_clusters": 0}):
        with pytest.raises(ValueError):
            BaselineConfig(**bad)


def test_cluster_distance():
    c = Cluster.founded_at(header(*"abcdefghijklmnop"), 0, 2)
    assert cluster_distance(header(*"abcdefghijklmnop"), c) == 0
    assert cluster_distance(header(*"abcdefghijklmnoX"), c) == 1
    assert cluster_distance(header(*"ABCDEFGHIJKLMNOP"), c) == 16


def test_assign_or_create():
    b = NaiveBaseline(BaselineConfig(k=2, max_radius=2, max_clusters=2))
    x = header(*"abcdefghijklmnop")
    assert b.assign_or_create(x) == 0
    assert b.assign_or_create(header(*"abcdefghijklmnXY")) == 0  # distance 2
    assert b.assign_or_create(header(*"abcdefghijklmXYZ")) == 1  # distance 3: new cluster
    # Budget exhausted: a far header joins its nearest cluster.
    assert b.assign_or_create(header(*"abcdefQQQQklmXYZ")) == 1
    assert b.assign_or_create(header(*"ABCDEFGHIJKLMNOP")) == 0  # ties go to the lowest id
    assert len(b.clusters) == 2


def test_ucb1_examples():
    cfg = BaselineConfig(k=2)
    c = Cluster.founded_at(header("a"), 0, 2)
    c.sums, c.counts, c.total = [50.0, 5.0], [100, 10], 110
    idx = [c.sums[a] / c.counts[a] + math.sqrt(1.2 * math.log(110) / c.counts[a]) for a in range(2)]
    assert idx[0] == pytest.approx(0.7374989776599238, rel=1e-14)
    assert idx[1] == pytest.approx(1.2510377113668061, rel=1e-14)
    assert ucb1_select(c, cfg, random.Random(0)) == 2


def test_ucb1_tries_every_action_first():
    b = NaiveBaseline(BaselineConfig(k=4, seed=3))
    x = header("a")
    seen = []
    for _ in range(4):
        a, _ = b.select_action(x)
        b.observe(x, a, 0.0)
        seen.append(a)
    assert seen == [1, 2, 3, 4]


def test_observe_validation():
    b = NaiveBaseline(BaselineConfig(k=2))
    x = header("a")
    with pytest.raises(ValueError):
        b.observe(x, 1, 0.5)
    a, _ = b.select_action(x)
    with pytest.raises(ValueError):
        b.observe(x, a, 2.0)
    with pytest.raises(ValueError):
        b.observe(header("b"), a, 0.5)
    b.observe(x, a, 0.5)
    assert b.t == 1 and b.stats()[0] == 1 and math.isnan(b.stats()[1])


@settings(max_examples=30, deadline=None)
@given(
    budget=st.integers(1, 6),
    radius=st.integers(0, 16),
    seed=st.integers(0, 10**6),
)
def test_cluster_budget_and_radius_bounds(budget, radius, seed):
    rng = random.Random(seed)
    b = NaiveBaseline(BaselineConfig(k=2, max_radius=radius, max_clusters=budget, seed=seed))
    for _ in range(150):
        x = header(*(rng.choice("abc") for _ in range(16)))
        before = len(b.clusters)
        cid = b.assign_or_create(x)
        assert len(b.clusters) <= budget
        d = cluster_distance(x, b.clusters[cid])
        nearest = min(cluster_distance(x, c) for c in b.clusters)
        if len(b.clusters) > before:
            assert cid == before and d == 0
        else:
            assert d == nearest
            assert d <= radius or before == budget


def test_cluster_budget_on_corpus(small_corpus):
    b = NaiveBaseline(BaselineConfig(k=3, max_radius=0, max_clusters=5))
    rng = random.Random(1)
    for _ in range(500):
        b.assign_or_create(draw_call(small_corpus, rng).header)
    assert len(b.clusters) == 5


def test_single_cluster_ucb_beats_uniform():
    # Two Bernoulli arms (0.4, 0.6) in one cluster: UCB1 regret must be far below uniform play.
    n = 100_000
    b = NaiveBaseline(BaselineConfig(k=2, max_clusters=1, seed=5))
    rng = random.Random(5)
    means = (0.4, 0.6)
    x = header("a")
    regret = 0.0
    for _ in range(n):
        a, _ = b.select_action(x)
        b.observe(x, a, float(rng.random() < means[a - 1]))
        regret += 0.6 - means[a - 1]
    uniform = 0.1 * n
    assert regret * 5 <= uniform


def test_determinism(small_corpus):
    def run(seed):
        b = NaiveBaseline(BaselineConfig(k=3, max_radius=4, max_clusters=8, seed=seed))
        rng = random.Random(seed)
        out = []
        for _ in range(2000):
            x = draw_call(small_corpus, rng).header
            a, cid = b.select_action(x)
            b.observe(x, a, rng.random())
            out.append((a, cid))
        return out

    assert run(3) == run(3)
