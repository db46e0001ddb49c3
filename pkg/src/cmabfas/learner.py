"""CMABFAS: contextual bandit over per-action hierarchical ball covers.

For each action the learner keeps a cover of the context space made of balls
of radius ``2**-depth``. A ball stores only its sample count and reward sum.
The score of an action at a context is the tightest optimistic bound
``avg + conf + size`` among the balls that contain the context and are still
eligible (not full, or full without a half-radius ball already active); the
action with the largest score is played. A full ball that produced the
winning bound spawns a half-radius child centred on the current context.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from operator import eq
from typing import Iterable, NamedTuple, Sequence

from .context import N_ATTRIBUTES, HeaderIndex, SipHeader

log = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class LearnerConfig:
    k: int
    T: int
    c: float = 1.0
    lam: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T!r}")
        if not self.c > 0 or math.isinf(self.c):
            raise ValueError(f"c must be a positive finite number, got {self.c!r}")
        if not self.lam > 0 or math.isinf(self.lam):
            raise ValueError(f"lam must be a positive finite number, got {self.lam!r}")

    @property
    def log_T(self) -> float:
        return math.log(self.T)


class Ball:
    """One element of an action's cover.

    ``center`` is an interned header id, ``depth`` gives ``radius = 2**-depth``.
    ``score`` and ``full`` are cached views of :func:`score_of` and
    :func:`is_full`, refreshed whenever ``n`` changes.
    """

    __slots__ = ("index", "center", "depth", "radius", "size", "n", "rho", "parent", "score", "full")

    def __init__(self, index: int, center: int | None, depth: int, lam: float, parent: int | None = None):
        self.index = index
        self.center = center
        self.depth = depth
        self.radius = math.ldexp(1.0, -depth)
        self.size = 2.0 * lam * self.radius
        self.n = 0
        self.rho = 0.0
        self.parent = parent
        self.score = INF
        self.full = False

    def __repr__(self) -> str:
        return (
            f"Ball(index={self.index}, center={self.center}, radius={self.radius!r}, "
            f"n={self.n}, rho={self.rho!r}, parent={self.parent})"
        )


def conf(ball: Ball, config: LearnerConfig) -> float:
    if ball.n == 0:
        return INF
    return config.c * math.sqrt(config.log_T / ball.n)


def avg(ball: Ball) -> float:
    if ball.n == 0:
        return 0.0
    return ball.rho / ball.n


def size(ball: Ball, config: LearnerConfig) -> float:
    return 2.0 * config.lam * ball.radius


def score_of(ball: Ball, config: LearnerConfig) -> float:
    return avg(ball) + conf(ball, config) + size(ball, config)


def is_full(ball: Ball, config: LearnerConfig) -> bool:
    return conf(ball, config) < ball.radius


def refresh(ball: Ball, config: LearnerConfig) -> None:
    """Recompute the cached score and fullness of a ball with ``n > 0``."""
    width = config.c * math.sqrt(config.log_T / ball.n)
    ball.score = ball.rho / ball.n + width + ball.size
    ball.full = width < ball.radius


def relevant_balls(active: Iterable[Ball], config: LearnerConfig) -> list[Ball]:
    """Active balls that may contribute a bound.

    A ball drops out only when it is full and some active ball already has
    exactly half its radius.
    """
    active = list(active)
    radii = {b.radius for b in active}
    return [b for b in active if not is_full(b, config) or b.radius / 2 not in radii]


class Score(NamedTuple):
    value: float
    ball: Ball

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class CoverStats:
    count: int
    min_radius: float
    per_depth: dict[int, int]


class ActionCover:
    """Append-only list of balls for one action plus a per-context active-set cache.

    Ball membership never changes once a ball exists, so each cached active
    set only has to be extended with the balls created since it was last
    brought up to date.
    """

    def __init__(self, action: int) -> None:
        self.action = action
        self.balls: list[Ball] = []
        self.per_depth: dict[int, int] = {}
        self.max_depth = 0
        self._active: dict[int, list] = {}

    def __len__(self) -> int:
        return len(self.balls)

    def add(self, ball: Ball) -> None:
        self.balls.append(ball)
        self.per_depth[ball.depth] = self.per_depth.get(ball.depth, 0) + 1
        if ball.depth > self.max_depth:
            self.max_depth = ball.depth

    def active(self, xid: int, index: HeaderIndex) -> list[Ball]:
        entry = self._active.get(xid)
        if entry is None:
            entry = [0, []]
            self._active[xid] = entry
        balls = self.balls
        start = entry[0]
        if start < len(balls):
            found = entry[1]
            before = len(found)
            xcodes = index.codes[xid]
            codes = index.codes
            for ball in balls[start:]:
                center = ball.center
                if center is None or center == xid:
                    found.append(ball)
                    continue
                agreement = sum(map(eq, xcodes, codes[center]))
                if agreement >= ball.depth or agreement == N_ATTRIBUTES:
                    found.append(ball)
            if len(found) != before:
                found.sort(key=_active_order)
            entry[0] = len(balls)
        return entry[1]

    def note_spawn(self, xid: int, child: Ball) -> None:
        """Record a child centred on ``xid`` in that context's cached active set."""
        entry = self._active.get(xid)
        if entry is not None and entry[0] == child.index:
            entry[1].append(child)
            entry[1].sort(key=_active_order)
            entry[0] = child.index + 1

    def clear_cache(self) -> None:
        self._active.clear()


def _active_order(ball: Ball) -> tuple[int, int]:
    return (-ball.depth, ball.index)


class Cmabfas:
    """The learner. ``select_action`` then ``observe`` once per round."""

    def __init__(self, config: LearnerConfig) -> None:
        self.config = config
        self.index = HeaderIndex()
        self.covers = [ActionCover(a) for a in range(1, config.k + 1)]
        for cover in self.covers:
            # Root centre is bound to the first context seen; radius 1 covers everything.
            cover.add(Ball(0, None, 0, config.lam))
        self.t = 0
        self.rng = random.Random(config.seed)
        self._log_T = config.log_T
        # (context id, action, ball that set the chosen action's score, its active set, context)
        self._pending: tuple[int, int, Ball, list[Ball], SipHeader] | None = None
        self._warned_horizon = False

    @property
    def k(self) -> int:
        return self.config.k

    def cover(self, a: int) -> ActionCover:
        return self.covers[a - 1]

    def _bind_roots(self, xid: int) -> None:
        for cover in self.covers:
            root = cover.balls[0]
            if root.center is None:
                root.center = xid

    def active_balls(self, a: int, x: SipHeader) -> list[Ball]:
        xid = self.index.intern(x)
        return list(self.cover(a).active(xid, self.index))

    def _u(self, active: list[Ball]) -> tuple[float, Ball]:
        best = None
        best_value = INF
        # Active sets are ordered deepest first, then by creation, which is the
        # tie-break. A full ball is skipped when the group just before its own
        # depth group sits exactly one level deeper.
        cur = prev = -1
        for b in active:
            d = b.depth
            if d != cur:
                prev, cur = cur, d
            if b.full and prev == d + 1:
                continue
            if best is None or b.score < best_value:
                best = b
                best_value = b.score
        if best is None:
            raise AssertionError("relevant ball set is empty")
        return best_value, best

    def u_score(self, a: int, x: SipHeader) -> Score:
        xid = self.index.intern(x)
        value, ball = self._u(self.cover(a).active(xid, self.index))
        return Score(value, ball)

    def select_action(self, x: SipHeader) -> tuple[int, list[Score]]:
        """Pick the action with the largest score; ties go to a seeded uniform draw."""
        xid = self.index.intern(x)
        if self.t == 0:
            self._bind_roots(xid)
        index = self.index
        scores = []
        actives = []
        best_value = -INF
        winners: list[int] = []
        for a, cover in enumerate(self.covers, start=1):
            entry = cover._active.get(xid)
            if entry is not None and entry[0] == len(cover.balls):
                active = entry[1]
            else:
                active = cover.active(xid, index)
            actives.append(active)
            value, ball = self._u(active)
            scores.append(Score(value, ball))
            if value > best_value:
                best_value = value
                winners = [a]
            elif value == best_value:
                winners.append(a)
        if len(winners) == 1:
            action = winners[0]
        else:
            action = winners[self.rng.randrange(len(winners))]
        self._pending = (xid, action, scores[action - 1].ball, actives[action - 1], x)
        return action, scores

    def observe(self, x: SipHeader, a: int, reward: float) -> Ball | None:
        """Account a reward for the pending (context, action) pair.

        Returns the ball spawned this round, if any.
        """
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"reward must lie in [0, 1], got {reward!r}")
        pending = self._pending
        if pending is None:
            raise ValueError("observe() without a preceding select_action()")
        xid = pending[0]
        # Identity check first: the caller normally passes back the same object.
        if pending[1] != a or (x is not pending[4] and x != pending[4]):
            raise ValueError("observe() must follow select_action() for the same context and action")
        self._pending = None
        cover = self.covers[a - 1]
        best = pending[2]
        active = pending[3]
        child = None
        if best.full:
            depth = best.depth + 1
            for b in active:
                if b.depth == depth:
                    raise AssertionError("new ball would overlap an existing ball of the same radius")
            child = Ball(len(cover.balls), xid, depth, self.config.lam, best.index)
            cover.add(child)
            cover.note_spawn(xid, child)
            active = cover.active(xid, self.index)
        c = self.config.c
        log_T = self._log_T
        for b in active:
            b.n += 1
            b.rho += reward
            n = b.n
            width = c * math.sqrt(log_T / n)
            b.score = b.rho / n + width + b.size
            b.full = width < b.radius
        self.t += 1
        if self.t > self.config.T and not self._warned_horizon:
            self._warned_horizon = True
            log.warning("round %d exceeds horizon T=%d; confidence widths no longer hold", self.t, self.config.T)
        return child

    def cover_stats(self) -> list[CoverStats]:
        return [
            CoverStats(len(cover.balls), math.ldexp(1.0, -cover.max_depth), dict(sorted(cover.per_depth.items())))
            for cover in self.covers
        ]

    def stats(self) -> tuple[int, float]:
        """Total ball count and smallest radius over all actions."""
        return (
            sum(len(c.balls) for c in self.covers),
            math.ldexp(1.0, -max(c.max_depth for c in self.covers)),
        )

    def _canonical(self) -> tuple:
        headers = self.index.headers

        def center(ball: Ball):
            return None if ball.center is None else headers[ball.center]

        pending = None
        if self._pending is not None:
            xid, action, ball, _, _ = self._pending
            pending = (headers[xid], action, ball.index)
        return (
            self.config,
            self.t,
            tuple(
                tuple((center(b), b.depth, b.n, b.rho, b.parent) for b in cover.balls)
                for cover in self.covers
            ),
            self.rng.getstate(),
            pending,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Cmabfas):
            return NotImplemented
        return self._canonical() == other._canonical()

    __hash__ = None  # type: ignore[assignment]


def init(config: LearnerConfig) -> Cmabfas:
    return Cmabfas(config)


def select_best(values: Sequence[float], rng: random.Random) -> int:
    """Index of the maximum of ``values``; ties drawn uniformly from ``rng``."""
    best = max(values)
    winners = [i for i, v in enumerate(values) if v == best]
    if len(winners) == 1:
        return winners[0]
    return winners[rng.randrange(len(winners))]
