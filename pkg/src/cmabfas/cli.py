"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .corpus import CorpusSpec, generate_corpus, write_corpus
from .env import RewardModelConfig, has_unique_optima, scenario_for
from .harness import OUTPUT_ENV, ConfigError, ExperimentConfig, run_experiment, sweep
from .snapshot import SnapshotError, inspect

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_OVERRIDES = {
    "learner": "learner",
    "steps": "steps",
    "c": "c",
    "horizon": "horizon",
    "lam": "lam",
    "max_radius": "max_radius",
    "max_clusters": "max_clusters",
    "scenario": "scenario",
    "corpus": "corpus",
    "corpus_spec": "corpus_spec",
    "replicates": "replicates",
    "seed": "base_seed",
    "checkpoints": "checkpoints",
    "workers": "workers",
    "snapshot_at": "snapshot_at",
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def cmd_generate_corpus(args: argparse.Namespace) -> int:
    spec = CorpusSpec.load(args.spec) if args.spec else CorpusSpec()
    if args.seed is not None:
        spec = CorpusSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    corpus = generate_corpus(spec)
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} calls to {args.out}")
    return 0


def cmd_scenario_gen(args: argparse.Namespace) -> int:
    reward = RewardModelConfig(d_max=args.d_max, fail_cost_applied=args.fail_cost_applied)
    scenario = scenario_for(args.k, args.seed, args.spitter_a3, reward)
    if args.k != 3 and not has_unique_optima(scenario):
        raise RuntimeError("generated scenario has tied optimal actions")
    scenario.save(args.out)
    print(f"wrote k={scenario.k} scenario to {args.out}")
    return 0


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        data["output_dir"] = env_out
    for flag, key in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if args.out:
        data["output_dir"] = args.out
    if args.trace:
        data["trace"] = True
    if args.raw_units:
        data["raw_units"] = True
    return ExperimentConfig.from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    config = build_config(args)
    result = run_experiment(config, overwrite=args.force)
    _print_report(result.report.rows)
    if result.output_dir is not None:
        print(f"outputs in {result.output_dir}")
    return 0


def _print_report(rows) -> None:
    print(f"{'t':>10} {'regret/t':>12} {'nmistakes1':>12} {'nmistakes2':>12} {'balls':>8}")
    for row in rows:
        print(
            f"{row.t:>10} {row.mean['regret_per_t']:>12.5f} {row.mean['nmistakes1']:>12.1f} "
            f"{row.mean['nmistakes2']:>12.1f} {row.mean['n_balls_total']:>8.1f}"
        )


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep file {args.config}: {exc}") from exc
    base = doc.get("base", {})
    variants = doc.get("variants") or [{}]
    configs = [ExperimentConfig.from_dict({**base, **v, "output_dir": None}) for v in variants]
    checkpoints = args.checkpoints if args.checkpoints is not None else doc.get("checkpoints", [])
    table = sweep(configs, checkpoints)
    print(table.render())
    if args.out:
        table.write_csv(args.out)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.dir) / "aggregate.csv"
    if not path.exists():
        raise ConfigError(f"{path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"replicates: {rows[0]['replicates'] if rows else 0}")
    print(f"{'t':>10} {'regret/t':>12} {'min':>10} {'max':>10} {'nmistakes1':>12} {'nmistakes2':>12}")
    for r in rows:
        print(
            f"{r['t']:>10} {float(r['regret_per_t_mean']):>12.5f} {float(r['regret_per_t_min']):>10.5f} "
            f"{float(r['regret_per_t_max']):>10.5f} {float(r['nmistakes1_mean']):>12.1f} "
            f"{float(r['nmistakes2_mean']):>12.1f}"
        )
    return 0


def cmd_snapshot_inspect(args: argparse.Namespace) -> int:
    try:
        record = Path(args.file).read_bytes()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    info = inspect(record)
    cfg = info.config
    print(f"snapshot format v{info.version}")
    print(f"config: k={cfg.k} T={cfg.T} c={cfg.c!r} lam={cfg.lam!r} seed={cfg.seed}")
    print(f"round: {info.t}")
    print(f"stored headers: {info.n_headers}")
    for a, n in enumerate(info.balls_per_action, start=1):
        print(f"action {a}: {n} balls")
    print(f"pending selection: {'yes' if info.has_pending else 'no'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cmabfas", description="CMABFAS SPIT-filter simulation harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-corpus", help="write a synthetic labeled header corpus")
    g.add_argument("--spec", help="corpus spec JSON (defaults to the built-in class mix)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_corpus)

    s = sub.add_parser("scenario-gen", help="write a scenario file")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--spitter-a3", type=float, help="override the spitter pass probability of A3 (k=3 only)")
    s.add_argument("--d-max", type=float, default=900.0)
    s.add_argument("--fail-cost-applied", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scenario_gen)

    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", help="experiment config JSON; flags override its fields")
    r.add_argument("--learner", choices=("cmabfas", "naive-baseline"))
    r.add_argument("--steps", type=int)
    r.add_argument("--c", type=float)
    r.add_argument("--horizon", type=int)
    r.add_argument("--lam", type=float)
    r.add_argument("--max-radius", type=int)
    r.add_argument("--max-clusters", type=int)
    r.add_argument("--scenario")
    r.add_argument("--corpus")
    r.add_argument("--corpus-spec")
    r.add_argument("--replicates", type=int)
    r.add_argument("--seed", type=int, help="base seed; replicate i uses seed + i")
    r.add_argument("--checkpoints", type=_int_list)
    r.add_argument("--workers", type=int)
    r.add_argument("--snapshot-at", type=_int_list)
    r.add_argument("--trace", action="store_true")
    r.add_argument("--raw-units", action="store_true")
    r.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    r.add_argument("--force", action="store_true", help="replace an existing output directory")
    r.set_defaults(func=cmd_run)

    w = sub.add_parser("sweep", help="run several configurations and print a comparison table")
    w.add_argument("--config", required=True, help='JSON with "base", "variants" and "checkpoints"')
    w.add_argument("--checkpoints", type=_int_list)
    w.add_argument("--out", help="write the table as CSV")
    w.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="print the aggregate table of a finished run")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)

    si = sub.add_parser("snapshot-inspect", help="summarize a learner snapshot file")
    si.add_argument("file")
    si.set_defaults(func=cmd_snapshot_inspect)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SnapshotError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
