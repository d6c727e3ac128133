"""``langnav`` command line: gen, run, report, render, ablate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench.ablation import AXES, run_ablation
from .bench.render import render_trajectory
from .bench.runner import load_report, run_suite
from .bench.suite import SuiteParams, generate_suite, load_suite, write_suite
from .config import load_config, with_overrides
from .episode import EpisodeResult, Split
from .errors import (BackendError, ConfigError, ContractViolation, MetricError, SuiteError,
                     WorldFormatError)

log = logging.getLogger("langnav")

EXIT_OK, EXIT_CONFIG, EXIT_SUITE, EXIT_BACKEND = 0, 2, 3, 4

POLICIES = {"tot": "ToT", "nearest": "NearestFrontier", "random": "Random"}


def _splits(text: str | None) -> tuple[Split, ...] | None:
    if not text:
        return None
    try:
        return tuple(Split(s.strip()) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"unknown split in {text!r}; choose from {', '.join(s.value for s in Split)}") from exc


def cmd_gen(args) -> int:
    kwargs = {"worlds": args.worlds, "episodes_per_split": args.per_split}
    splits = _splits(args.splits)
    if splits:
        kwargs["splits"] = splits
    params = SuiteParams(**kwargs)
    suite = generate_suite(args.seed, params)
    write_suite(args.out, suite, args.seed, params)
    print(f"wrote {len(suite)} episodes to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = with_overrides(load_config(args.config), policy=POLICIES[args.policy] if args.policy else None,
                         backend=args.backend)
    suite = load_suite(args.suite)
    report = run_suite(suite, cfg.agent, cfg.llm, cfg.tot, args.parallel, decorators=cfg.decorators,
                       base_dir=cfg.base_dir)
    out = Path(args.out or Path(args.suite) / "runs" / cfg.agent.policy.value)
    report.write(out, maps=not args.no_maps)
    print(report.to_table(), end="")
    print(f"results in {out}")
    if report.backend_failures:
        print(f"{len(report.backend_failures)} episodes had completion-backend failures", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def cmd_report(args) -> int:
    report = load_report(args.inp)
    print(report.to_csv() if args.format == "csv" else report.to_table(), end="")
    return EXIT_OK


def cmd_render(args) -> int:
    suite = {ep.id: (w, ep) for w, ep in load_suite(args.suite)}
    if args.episode not in suite:
        raise SuiteError(f"no episode {args.episode!r} in {args.suite}")
    world, episode = suite[args.episode]
    run_dir = Path(args.run) if args.run else None
    if run_dir is None:
        runs = sorted((Path(args.suite) / "runs").glob(f"*/episodes/{args.episode}.json"))
        if not runs:
            raise SuiteError(f"no run output for {args.episode}; pass --run DIR")
        run_dir = runs[0].parent.parent
    try:
        result = EpisodeResult.from_dict(json.loads((run_dir / "episodes" / f"{args.episode}.json").read_text()))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise SuiteError(f"cannot read result for {args.episode} in {run_dir}: {exc}") from exc
    map_path = run_dir / "maps" / f"{args.episode}.json"
    snapshot = json.loads(map_path.read_text()) if map_path.exists() else None
    render_trajectory(world, snapshot, result, args.out, episode)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    if args.backend:
        cfg = with_overrides(cfg, backend=args.backend)
    suite = load_suite(args.suite)
    report = run_ablation(suite, args.axis, cfg, args.parallel, _splits(args.splits),
                          progress=lambda label: log.info("running variant %s", label))
    out = Path(args.out or Path(args.suite) / "ablations" / args.axis)
    report.write(out)
    print(report.to_table(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="langnav", description="Gridworld language-driven object navigation")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a suite")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--worlds", type=int, default=5)
    g.add_argument("--per-split", type=int, default=10)
    g.add_argument("--splits", help="comma-separated split names")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a suite")
    r.add_argument("--suite", required=True)
    r.add_argument("--policy", choices=sorted(POLICIES))
    r.add_argument("--backend", choices=("scripted", "oracle", "http"))
    r.add_argument("--config")
    r.add_argument("--parallel", type=int, default=1)
    r.add_argument("--out")
    r.add_argument("--no-maps", action="store_true", help="skip per-episode map snapshots")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="print a finished run")
    rep.add_argument("--in", dest="inp", required=True)
    rep.add_argument("--format", choices=("csv", "table"), default="table")
    rep.set_defaults(func=cmd_report)

    ren = sub.add_parser("render", help="draw one episode as a PPM image")
    ren.add_argument("--suite", required=True)
    ren.add_argument("--episode", required=True)
    ren.add_argument("--out", required=True)
    ren.add_argument("--run", help="run output directory (default: first under SUITE/runs)")
    ren.set_defaults(func=cmd_render)

    a = sub.add_parser("ablate", help="compare variants on one suite")
    a.add_argument("--suite", required=True)
    a.add_argument("--axis", choices=AXES, required=True)
    a.add_argument("--config")
    a.add_argument("--backend", choices=("scripted", "oracle", "http"))
    a.add_argument("--parallel", type=int, default=1)
    a.add_argument("--splits", help="restrict to these comma-separated splits")
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SuiteError, WorldFormatError, MetricError, ContractViolation) as exc:
        print(f"suite error: {exc}", file=sys.stderr)
        return EXIT_SUITE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
