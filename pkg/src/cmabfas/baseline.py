"""Naive baseline: incremental Hamming clustering with one UCB1 bandit per cluster.

Clusters are founded on the first header that is farther than ``max_radius``
differing attributes from every existing representative, as long as fewer
than ``max_clusters`` exist. Representatives never move.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from operator import eq

from .context import N_ATTRIBUTES, HeaderIndex, SipHeader, hamming_agreement

UCB_EXPLORATION = 1.2


@dataclass(frozen=True)
class BaselineConfig:
    k: int
    max_radius: int = 6
    max_clusters: int = 500
    exploration: float = UCB_EXPLORATION
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if not 0 <= self.max_radius <= N_ATTRIBUTES:
            raise ValueError(f"max_radius must be in [0, {N_ATTRIBUTES}], got {self.max_radius}")
        if self.max_clusters < 1:
            raise ValueError("max_clusters must be positive")


@dataclass
class Cluster:
    representative: SipHeader
    rep_id: int
    sums: list[float]
    counts: list[int]
    total: int = 0

    @classmethod
    def founded_at(cls, header: SipHeader, rep_id: int, k: int) -> Cluster:
        return cls(header, rep_id, [0.0] * k, [0] * k)


def cluster_distance(x: SipHeader, cluster: Cluster) -> int:
    """Number of attributes in which ``x`` differs from the cluster representative."""
    return N_ATTRIBUTES - hamming_agreement(x, cluster.representative)


def ucb1_select(cluster: Cluster, config: BaselineConfig, rng: random.Random) -> int:
    """UCB1 with exploration constant ``config.exploration``; untried actions go first."""
    counts = cluster.counts
    for a, n in enumerate(counts):
        if n == 0:
            return a + 1
    log_total = math.log(cluster.total)
    sums = cluster.sums
    ex = config.exploration
    best = -math.inf
    winners: list[int] = []
    for a in range(len(counts)):
        n = counts[a]
        value = sums[a] / n + math.sqrt(ex * log_total / n)
        if value > best:
            best = value
            winners = [a + 1]
        elif value == best:
            winners.append(a + 1)
    if len(winners) == 1:
        return winners[0]
    return winners[rng.randrange(len(winners))]


@dataclass
class _Nearest:
    checked: int = 0
    best: int = -1
    distance: int = N_ATTRIBUTES + 1


class NaiveBaseline:
    """Shares the ``select_action`` / ``observe`` interface of the CMABFAS learner."""

    def __init__(self, config: BaselineConfig) -> None:
        self.config = config
        self.clusters: list[Cluster] = []
        self.index = HeaderIndex()
        self.rng = random.Random(config.seed)
        self.t = 0
        self._nearest: dict[int, _Nearest] = {}
        self._pending: tuple[int, int, int] | None = None

    @property
    def k(self) -> int:
        return self.config.k

    def nearest(self, x: SipHeader) -> tuple[int, int]:
        """(cluster id, distance) of the nearest cluster; ties go to the lowest id."""
        xid = self.index.intern(x)
        return self._nearest_id(xid)

    def _nearest_id(self, xid: int) -> tuple[int, int]:
        # Representatives are immutable, so a cached nearest cluster only has
        # to be compared against clusters founded since.
        entry = self._nearest.get(xid)
        if entry is None:
            entry = _Nearest()
            self._nearest[xid] = entry
        clusters = self.clusters
        if entry.checked < len(clusters):
            codes = self.index.codes
            xcodes = codes[xid]
            best, best_d = entry.best, entry.distance
            for i in range(entry.checked, len(clusters)):
                rep = clusters[i].rep_id
                d = 0 if rep == xid else N_ATTRIBUTES - sum(map(eq, xcodes, codes[rep]))
                if d < best_d:
                    best, best_d = i, d
            entry.best, entry.distance, entry.checked = best, best_d, len(clusters)
        return entry.best, entry.distance

    def assign_or_create(self, x: SipHeader) -> int:
        xid = self.index.intern(x)
        return self._assign(xid, x)

    def _assign(self, xid: int, x: SipHeader) -> int:
        cfg = self.config
        best, d = self._nearest_id(xid)
        if best < 0 or (d > cfg.max_radius and len(self.clusters) < cfg.max_clusters):
            self.clusters.append(Cluster.founded_at(x, xid, cfg.k))
            return len(self.clusters) - 1
        return best

    def select_action(self, x: SipHeader) -> tuple[int, int]:
        """Returns (action, cluster id)."""
        xid = self.index.intern(x)
        cid = self._assign(xid, x)
        action = ucb1_select(self.clusters[cid], self.config, self.rng)
        self._pending = (xid, action, cid)
        return action, cid

    def observe(self, x: SipHeader, a: int, reward: float) -> None:
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"reward must lie in [0, 1], got {reward!r}")
        pending = self._pending
        if pending is None or pending[0] != self.index.intern(x) or pending[1] != a:
            raise ValueError("observe() must follow select_action() for the same context and action")
        self._pending = None
        baseline_observe(self, pending[2], a, reward)

    def stats(self) -> tuple[int, float]:
        return len(self.clusters), math.nan


def baseline_observe(state: NaiveBaseline, cluster_id: int, action: int, reward: float) -> None:
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward must lie in [0, 1], got {reward!r}")
    cluster = state.clusters[cluster_id]
    cluster.sums[action - 1] += reward
    cluster.counts[action - 1] += 1
    cluster.total += 1
    state.t += 1
