"""Regret and mistake accounting, checkpoint series and replicate aggregation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .context import CLASS_LABELS, LabeledCall
from .env import FORWARD, TIE_TOL, Scenario, expected_reward, scale

RUN_COLUMNS = ("t", "regret_cum", "regret_per_t", "nmistakes1", "nmistakes2", "n_balls_total", "min_radius")
AGG_STATS = ("regret_per_t", "nmistakes1", "nmistakes2", "regret_cum", "n_balls_total")


def fmt(value: float | int) -> str:
    if isinstance(value, int):
        return str(value)
    return format(value, ".17g")


def default_checkpoints(steps: int) -> list[int]:
    """1-2-5 grid from 10 up to ``steps``, plus ``steps`` itself."""
    points = set()
    decade = 10
    while decade <= steps:
        for m in (1, 2, 5):
            if m * decade <= steps:
                points.add(m * decade)
        decade *= 10
    points.add(steps)
    return sorted(points)


class RegretOracle:
    """Per-(class, action) regret and mistake flags from the closed-form expected rewards."""

    def __init__(self, scenario: Scenario, raw_units: bool = False) -> None:
        self.scenario = scenario
        self.k = scenario.k
        cfg = scenario.reward
        self.regret: dict[str, tuple[float, ...]] = {}
        self.mistake1: dict[str, tuple[bool, ...]] = {}
        self.mistake2: dict[str, tuple[bool, ...]] = {}
        for label in CLASS_LABELS:
            row = [expected_reward(label, a, scenario) for a in range(1, self.k + 1)]
            best = max(row)
            if raw_units:
                gaps = [best - v for v in row]
            else:
                top = scale(best, cfg)
                gaps = [top - scale(v, cfg) for v in row]
            assert all(g >= 0 for g in gaps)
            # Index 0 is padding so that actions index directly.
            self.regret[label] = (0.0, *gaps)
            self.mistake1[label] = (False, *(v < best - TIE_TOL for v in row))
            spit = label != "normal"
            self.mistake2[label] = (False, *((a == FORWARD) if spit else (a != FORWARD) for a in range(1, self.k + 1)))


@dataclass(frozen=True)
class StepOutcome:
    t: int
    call_class: str
    action: int
    regret: float
    mistake1: bool
    mistake2: bool


@dataclass(frozen=True)
class CheckpointRow:
    t: int
    regret_cum: float
    regret_per_t: float
    nmistakes1: int
    nmistakes2: int
    n_balls_total: int
    min_radius: float

    def as_strings(self) -> list[str]:
        return [fmt(getattr(self, c)) for c in RUN_COLUMNS]


@dataclass
class RunMetrics:
    oracle: RegretOracle
    checkpoints: Sequence[int]
    t: int = 0
    regret: float = 0.0
    nmistakes1: int = 0
    nmistakes2: int = 0
    rows: list[CheckpointRow] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.checkpoints:
            raise ValueError("checkpoint grid is empty")
        if sorted(set(self.checkpoints)) != list(self.checkpoints) or self.checkpoints[0] < 1:
            raise ValueError("checkpoints must be strictly increasing positive integers")

    def record_step(self, call: LabeledCall, action: int) -> StepOutcome:
        label = call.call_class.label
        if label not in self.oracle.regret:
            raise ValueError(f"unknown class {label!r}")
        if not 1 <= action <= self.oracle.k:
            raise ValueError(f"unknown action {action!r}")
        r = self.oracle.regret[label][action]
        m1 = self.oracle.mistake1[label][action]
        m2 = self.oracle.mistake2[label][action]
        self.t += 1
        self.regret += r
        self.nmistakes1 += m1
        self.nmistakes2 += m2
        return StepOutcome(self.t, label, action, r, m1, m2)

    def checkpoint(self, n_balls: int, min_radius: float) -> CheckpointRow:
        row = CheckpointRow(
            self.t, self.regret, self.regret / self.t, self.nmistakes1, self.nmistakes2, n_balls, min_radius
        )
        self.rows.append(row)
        return row

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUN_COLUMNS)
            for row in self.rows:
                w.writerow(row.as_strings())


def read_run_csv(path: str | Path) -> list[CheckpointRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            CheckpointRow(
                int(r["t"]),
                float(r["regret_cum"]),
                float(r["regret_per_t"]),
                int(r["nmistakes1"]),
                int(r["nmistakes2"]),
                int(r["n_balls_total"]),
                float(r["min_radius"]),
            )
            for r in reader
        ]


@dataclass(frozen=True)
class AggregateRow:
    t: int
    replicates: int
    mean: dict[str, float]
    min: dict[str, float]
    max: dict[str, float]


@dataclass
class AggregateReport:
    replicates: int
    rows: list[AggregateRow]

    def at(self, t: int) -> AggregateRow:
        for row in self.rows:
            if row.t == t:
                return row
        raise KeyError(f"no checkpoint at t={t}")

    def columns(self) -> list[str]:
        cols = ["t", "replicates"]
        for stat in AGG_STATS:
            cols += [f"{stat}_mean", f"{stat}_min", f"{stat}_max"]
        return cols

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows:
                out = [str(row.t), str(row.replicates)]
                for stat in AGG_STATS:
                    out += [fmt(row.mean[stat]), fmt(row.min[stat]), fmt(row.max[stat])]
                w.writerow(out)


def aggregate(runs: Iterable[Sequence[CheckpointRow]]) -> AggregateReport:
    """Mean, min and max of every checkpoint column across replicates."""
    runs = [list(r) for r in runs]
    if not runs:
        raise ValueError("nothing to aggregate")
    grid = [row.t for row in runs[0]]
    for r in runs[1:]:
        if [row.t for row in r] != grid:
            raise ValueError("replicates do not share a checkpoint grid")
    n = len(runs)
    rows = []
    for i, t in enumerate(grid):
        mean, lo, hi = {}, {}, {}
        for stat in AGG_STATS:
            values = [float(getattr(r[i], stat)) for r in runs]
            mean[stat] = math.fsum(values) / n
            lo[stat] = min(values)
            hi[stat] = max(values)
            # fsum/n can land one ulp outside the range when all values agree.
            mean[stat] = min(max(mean[stat], lo[stat]), hi[stat])
        rows.append(AggregateRow(t, n, mean, lo, hi))
    return AggregateReport(n, rows)
