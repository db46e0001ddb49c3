"""Experiment orchestration: seeded replicates of (learner x scenario) over a corpus."""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import logging
import os
import random
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from .baseline import BaselineConfig, NaiveBaseline
from .context import LabeledCall
from .corpus import CORPUS_VERSION, CorpusSpec, generate_corpus, read_corpus
from .env import SCENARIO_VERSION, Scenario, SpitEnvironment, scenario_for
from .learner import Cmabfas, LearnerConfig
from .metrics import (
    AggregateReport,
    CheckpointRow,
    RegretOracle,
    RunMetrics,
    aggregate,
    default_checkpoints,
    fmt,
)
from .snapshot import VERSION as SNAPSHOT_VERSION
from .snapshot import restore, snapshot

log = logging.getLogger(__name__)

LEARNERS = ("cmabfas", "naive-baseline")
MANIFEST_VERSION = 1
RUN_STATE_VERSION = 1
OUTPUT_ENV = "CMABFAS_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    learner: str = "cmabfas"
    steps: int = 10_000
    c: float = 1.0
    horizon: int | None = None
    lam: float = 1.0
    max_radius: int = 6
    max_clusters: int = 500
    scenario: str | dict | None = None
    corpus: str | None = None
    corpus_spec: str | dict | None = None
    replicates: int = 1
    base_seed: int = 0
    checkpoints: list[int] | None = None
    raw_units: bool = False
    trace: bool = False
    snapshot_at: list[int] = field(default_factory=list)
    output_dir: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.learner not in LEARNERS:
            raise ConfigError(f"learner must be one of {LEARNERS}, got {self.learner!r}")
        if self.steps < 1:
            raise ConfigError("steps must be positive")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.checkpoints is not None:
            cps = list(self.checkpoints)
            if not cps:
                raise ConfigError("checkpoint list is empty")
            if sorted(set(cps)) != cps or cps[0] < 1 or cps[-1] > self.steps:
                raise ConfigError("checkpoints must be strictly increasing and within [1, steps]")
        if self.corpus is not None and self.corpus_spec is not None:
            raise ConfigError("give either corpus or corpus_spec, not both")
        try:
            LearnerConfig(k=3, T=self.T, c=self.c, lam=self.lam)
            BaselineConfig(k=3, max_radius=self.max_radius, max_clusters=self.max_clusters)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.learner == "cmabfas" and self.steps > self.T:
            log.warning("steps=%d exceed horizon T=%d", self.steps, self.T)

    @property
    def T(self) -> int:
        return self.horizon if self.horizon is not None else self.steps

    def grid(self) -> list[int]:
        return list(self.checkpoints) if self.checkpoints is not None else default_checkpoints(self.steps)

    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.replicates)]

    def learner_config(self, k: int, seed: int) -> LearnerConfig | BaselineConfig:
        if self.learner == "cmabfas":
            return LearnerConfig(k=k, T=self.T, c=self.c, lam=self.lam, seed=seed)
        return BaselineConfig(k=k, max_radius=self.max_radius, max_clusters=self.max_clusters, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def digest(self) -> str:
        data = self.to_dict()
        data.pop("output_dir")
        data.pop("workers")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def load_corpus(config: ExperimentConfig) -> list[LabeledCall]:
    try:
        if config.corpus is not None:
            return read_corpus(config.corpus)
        spec = config.corpus_spec
        if spec is None:
            return generate_corpus(CorpusSpec())
        if isinstance(spec, dict):
            return generate_corpus(CorpusSpec.from_dict(spec))
        return generate_corpus(CorpusSpec.load(spec))
    except OSError as exc:
        raise ConfigError(f"cannot read corpus: {exc}") from exc


def load_scenario(config: ExperimentConfig) -> Scenario:
    spec = config.scenario
    try:
        if spec is None:
            return scenario_for(3)
        if isinstance(spec, dict):
            extra = set(spec) - {"k", "seed", "spitter_a3"}
            if extra:
                raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
            return scenario_for(int(spec.get("k", 3)), int(spec.get("seed", 0)), spec.get("spitter_a3"))
        return Scenario.load(spec)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from exc


def make_learner(config: ExperimentConfig, k: int, seed: int) -> Cmabfas | NaiveBaseline:
    lc = config.learner_config(k, seed)
    if isinstance(lc, LearnerConfig):
        return Cmabfas(lc)
    return NaiveBaseline(lc)


class ReplicateRun:
    """One replicate: its own learner, call-draw stream, reward stream and metrics.

    ``advance`` can be called repeatedly; a run stopped at any step and
    resumed through :meth:`save_state` / :meth:`load_state` continues
    bit-identically.
    """

    def __init__(self, config: ExperimentConfig, corpus: Sequence[LabeledCall], scenario: Scenario, seed: int):
        if not corpus:
            raise ConfigError("corpus is empty")
        self.config = config
        self.seed = seed
        self.scenario = scenario
        self.corpus = [(call.header, call.call_class.label) for call in corpus]
        self.learner = make_learner(config, scenario.k, seed)
        self.draw_rng = random.Random(f"draw:{seed}")
        self.env_rng = random.Random(f"env:{seed}")
        self.env = SpitEnvironment(scenario)
        self.metrics = RunMetrics(RegretOracle(scenario, config.raw_units), config.grid())

    @property
    def t(self) -> int:
        return self.metrics.t

    def advance(self, until: int, trace=None, on_snapshot=None) -> None:
        m = self.metrics
        if until > self.config.steps:
            raise ValueError("cannot advance past the configured number of steps")
        corpus = self.corpus
        n = len(corpus)
        randrange = self.draw_rng.randrange
        env_rng = self.env_rng
        sample = self.env.sample
        lo, width = self.env._lo, self.env._width
        learner = self.learner
        select = learner.select_action
        observe = learner.observe
        regret_table = m.oracle.regret
        m1_table = m.oracle.mistake1
        m2_table = m.oracle.mistake2
        pending_cps = [cp for cp in m.checkpoints if cp > m.t]
        snaps = sorted(s for s in self.config.snapshot_at if s > m.t)
        next_cp = pending_cps.pop(0) if pending_cps else -1
        next_snap = snaps.pop(0) if snaps else -1
        regret, nm1, nm2 = m.regret, m.nmistakes1, m.nmistakes2
        for t in range(m.t + 1, until + 1):
            x, label = corpus[randrange(n)]
            action, info = select(x)
            raw = sample(label, action, env_rng)
            spawned = observe(x, action, (raw - lo) / width)
            regret += regret_table[label][action]
            nm1 += m1_table[label][action]
            nm2 += m2_table[label][action]
            if trace is not None:
                trace(t, action, info, spawned)
            if t == next_cp or t == next_snap:
                m.t, m.regret, m.nmistakes1, m.nmistakes2 = t, regret, nm1, nm2
                if t == next_cp:
                    m.checkpoint(*learner.stats())
                    next_cp = pending_cps.pop(0) if pending_cps else -1
                if t == next_snap:
                    if on_snapshot is not None:
                        on_snapshot(t, self)
                    next_snap = snaps.pop(0) if snaps else -1
        if until > m.t:
            m.t, m.regret, m.nmistakes1, m.nmistakes2 = until, regret, nm1, nm2

    def save_state(self) -> bytes:
        if not isinstance(self.learner, Cmabfas):
            raise TypeError("run state snapshots are only supported for the cmabfas learner")
        m = self.metrics
        doc = {
            "version": RUN_STATE_VERSION,
            "seed": self.seed,
            "t": m.t,
            "regret": m.regret.hex(),
            "nmistakes1": m.nmistakes1,
            "nmistakes2": m.nmistakes2,
            "rows": [[r.t, r.regret_cum.hex(), r.regret_per_t.hex(), r.nmistakes1, r.nmistakes2,
                      r.n_balls_total, r.min_radius.hex()] for r in m.rows],
            "draw_rng": _rng_doc(self.draw_rng),
            "env_rng": _rng_doc(self.env_rng),
            "learner": base64.b64encode(snapshot(self.learner)).decode("ascii"),
        }
        return json.dumps(doc, sort_keys=True).encode()

    @classmethod
    def load_state(cls, config: ExperimentConfig, corpus: Sequence[LabeledCall], scenario: Scenario,
                   record: bytes) -> ReplicateRun:
        doc = json.loads(record)
        if doc.get("version") != RUN_STATE_VERSION:
            raise ValueError(f"unsupported run state version {doc.get('version')!r}")
        run = cls(config, corpus, scenario, doc["seed"])
        run.learner = restore(base64.b64decode(doc["learner"]))
        run.draw_rng.setstate(_rng_from_doc(doc["draw_rng"]))
        run.env_rng.setstate(_rng_from_doc(doc["env_rng"]))
        m = run.metrics
        m.t = doc["t"]
        m.regret = float.fromhex(doc["regret"])
        m.nmistakes1 = doc["nmistakes1"]
        m.nmistakes2 = doc["nmistakes2"]
        m.rows = [CheckpointRow(r[0], float.fromhex(r[1]), float.fromhex(r[2]), r[3], r[4], r[5],
                                float.fromhex(r[6])) for r in doc["rows"]]
        return run


def _rng_doc(rng: random.Random) -> list:
    version, words, gauss = rng.getstate()
    return [version, list(words), gauss]


def _rng_from_doc(doc: list) -> tuple:
    return (doc[0], tuple(doc[1]), doc[2])


class _TraceWriter:
    def __init__(self, path: Path, k: int) -> None:
        self.fh = open(path, "w")
        cols = ["t", "action"] + [f"score_{a}" for a in range(1, k + 1)] + ["chosen_ball_level", "spawned"]
        self.fh.write(",".join(cols) + "\n")

    def __call__(self, t: int, action: int, scores, spawned) -> None:
        values = [format(s.value, ".17g") for s in scores]
        level = scores[action - 1].ball.depth
        self.fh.write(f"{t},{action},{','.join(values)},{level},{int(spawned is not None)}\n")

    def close(self) -> None:
        self.fh.close()


@dataclass
class ReplicateResult:
    seed: int
    rows: list[CheckpointRow]
    seconds: float
    files: list[str]


def run_replicate(config: ExperimentConfig, corpus: Sequence[LabeledCall], scenario: Scenario, seed: int,
                  out_dir: Path | None = None) -> ReplicateResult:
    start = time.perf_counter()
    run = ReplicateRun(config, corpus, scenario, seed)
    files: list[str] = []
    trace = None
    on_snapshot = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if config.trace:
            if not isinstance(run.learner, Cmabfas):
                raise ConfigError("per-step traces are only available for the cmabfas learner")
            trace = _TraceWriter(out_dir / "trace.csv", scenario.k)
            files.append("trace.csv")
        if config.snapshot_at:
            if not isinstance(run.learner, Cmabfas):
                raise ConfigError("learner snapshots are only available for the cmabfas learner")

            def on_snapshot(t: int, r: ReplicateRun) -> None:
                name = f"snapshot-{t:09d}.bin"
                (out_dir / name).write_bytes(snapshot(r.learner))
                files.append(name)
    try:
        run.advance(config.steps, trace, on_snapshot)
    finally:
        if trace is not None:
            trace.close()
    if out_dir is not None:
        run.metrics.write_csv(out_dir / "metrics.csv")
        files.append("metrics.csv")
    return ReplicateResult(seed, run.metrics.rows, time.perf_counter() - start, files)


@dataclass
class ExperimentResult:
    report: AggregateReport
    replicates: list[ReplicateResult]
    output_dir: Path | None = None
    manifest: dict | None = None


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _replicate_job(args):
    config, corpus, scenario, seed, out_dir = args
    return run_replicate(config, corpus, scenario, seed, out_dir)


def run_experiment(config: ExperimentConfig, overwrite: bool = False) -> ExperimentResult:
    """Run every replicate and aggregate.

    With an output directory, everything is written to a sibling temporary
    directory first and renamed into place once complete, so a failed run
    never leaves a partial manifest behind.
    """
    start = time.perf_counter()
    corpus = load_corpus(config)
    scenario = load_scenario(config)
    seeds = config.seeds()
    final_dir = Path(config.output_dir) if config.output_dir else None
    work_dir = None
    if final_dir is not None:
        if final_dir.exists() and not overwrite:
            raise ConfigError(f"output directory {final_dir} already exists")
        final_dir.parent.mkdir(parents=True, exist_ok=True)
        work_dir = Path(tempfile.mkdtemp(prefix=f".{final_dir.name}.", dir=final_dir.parent))
    try:
        jobs = [
            (config, corpus, scenario, seed, None if work_dir is None else work_dir / f"replicate-{i:03d}")
            for i, seed in enumerate(seeds)
        ]
        if config.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_replicate_job, jobs))
        else:
            results = [_replicate_job(job) for job in jobs]
        report = aggregate(r.rows for r in results)
        manifest = None
        if work_dir is not None:
            report.write_csv(work_dir / "aggregate.csv")
            (work_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
            scenario.save(work_dir / "scenario.json")
            files = {}
            for rel in ["aggregate.csv", "config.json", "scenario.json"] + [
                f"replicate-{i:03d}/{name}" for i, r in enumerate(results) for name in r.files
            ]:
                files[rel] = _sha256(work_dir / rel)
            manifest = {
                "format": "cmabfas-manifest",
                "version": MANIFEST_VERSION,
                "config_hash": config.digest(),
                "seeds": seeds,
                "files": files,
                "timings": {
                    "replicates": [round(r.seconds, 3) for r in results],
                    "total": round(time.perf_counter() - start, 3),
                },
                "format_versions": {
                    "corpus": CORPUS_VERSION,
                    "scenario": SCENARIO_VERSION,
                    "snapshot": SNAPSHOT_VERSION,
                    "manifest": MANIFEST_VERSION,
                },
            }
            (work_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
            if final_dir.exists():
                shutil.rmtree(final_dir)
            os.replace(work_dir, final_dir)
            work_dir = None
        return ExperimentResult(report, results, final_dir, manifest)
    finally:
        if work_dir is not None:
            shutil.rmtree(work_dir, ignore_errors=True)


def label_for(config: ExperimentConfig) -> str:
    if config.learner == "cmabfas":
        return f"CMABFAS c={config.c:g} lam={config.lam:g}"
    return f"Naive: c={config.max_clusters}, r={config.max_radius}"


@dataclass
class SweepTable:
    checkpoints: list[int]
    labels: list[str]
    reports: list[AggregateReport]

    def cell(self, i: int, t: int) -> tuple[float, float, float]:
        row = self.reports[i].at(t)
        return row.mean["regret_per_t"], row.mean["nmistakes1"], row.mean["nmistakes2"]

    def render(self) -> str:
        head = f"{'':<34}" + "".join(f"| t={t:<32}" for t in self.checkpoints)
        sub = f"{'':<34}" + "".join(f"| {'regret/t':>10} {'nmist1':>10} {'nmist2':>10} " for _ in self.checkpoints)
        lines = [head, sub, "-" * len(sub)]
        for i, label in enumerate(self.labels):
            cells = []
            for t in self.checkpoints:
                r, m1, m2 = self.cell(i, t)
                cells.append(f"| {r:>10.5f} {m1:>10.1f} {m2:>10.1f} ")
            lines.append(f"{label:<34}" + "".join(cells))
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        stats = ("regret_per_t", "nmistakes1", "nmistakes2")
        cols = ["row"] + [f"{name}@{t}" for t in self.checkpoints for name in stats]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for i, label in enumerate(self.labels):
                w.writerow([label] + [fmt(v) for t in self.checkpoints for v in self.cell(i, t)])


def sweep(configs: Sequence[ExperimentConfig], checkpoints: Sequence[int]) -> SweepTable:
    """Run each configuration and tabulate regret/t and mistake counts at ``checkpoints``."""
    if not configs:
        raise ConfigError("sweep needs at least one configuration")
    if not checkpoints:
        raise ConfigError("sweep needs at least one checkpoint")
    cps = sorted(set(int(t) for t in checkpoints))
    reports, labels = [], []
    for cfg in configs:
        if cps[-1] > cfg.steps:
            raise ConfigError(f"checkpoint {cps[-1]} beyond steps={cfg.steps}")
        grid = sorted(set(cfg.grid()) | set(cps))
        run_cfg = ExperimentConfig(**{**cfg.to_dict(), "checkpoints": grid})
        reports.append(run_experiment(run_cfg).report)
        labels.append(label_for(cfg))
    return SweepTable(cps, labels, reports)
