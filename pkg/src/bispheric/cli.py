"""Command-line surface: scenario validation, target derivation, simulation,
and the property-check suites.

Exit codes: 0 success, 1 domain failure (validation violations, failed
checks, aborted runs), 2 I/O or schema errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import checks, config, engine
from .errors import (
    BisphericError,
    InvalidSpecError,
    ScenarioError,
    SimulationError,
    UnsupportedTargetError,
)
from .graph import validate_graph
from .shape import targets_from_spec

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2


def cmd_validate_graph(args) -> int:
    try:
        data = config.load_raw(args.config)
        g = config.graph_from_config(data)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    report = validate_graph(g)
    if report.ok:
        print(f"graph ok: {g.n} agents, {len(g.edges)} edges")
        return EXIT_OK
    for msg in report.structural_errors:
        print(f"structural error: {msg}")
    for msg in report.violations:
        print(f"violation: {msg}")
    return EXIT_DOMAIN


def cmd_derive_targets(args) -> int:
    try:
        scn = config.load_scenario(args.config)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidSpecError, UnsupportedTargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        t = targets_from_spec(scn.spec)
    except (InvalidSpecError, UnsupportedTargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    out = {
        "d21_star": t.d21_star,
        "xi3_star": t.xi3_star,
        "eta3_star": t.eta3_star,
        "followers": {
            str(l + 4): {
                "xi_star": float(t.xi_star[l]),
                "eta_star": float(t.eta_star[l]),
                "phi_star": float(t.phi_star[l]),
            }
            for l in range(t.xi_star.shape[0])
        },
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        scn = config.load_scenario(args.config)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BisphericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    cfg = scn.cfg
    if args.seed is not None or args.dt is not None:
        cfg = engine.SimConfig(
            dt=args.dt if args.dt is not None else cfg.dt,
            t_end=cfg.t_end,
            integrator=cfg.integrator,
            events=cfg.events,
            seed=args.seed if args.seed is not None else cfg.seed,
            init_half_width=cfg.init_half_width,
            init_positions=cfg.init_positions,
            min_start_separation=cfg.min_start_separation,
            log_every=cfg.log_every,
            random_frames=cfg.random_frames,
            noise=cfg.noise,
        )
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_IO

    started = time.perf_counter()
    try:
        log = engine.run(cfg, scn.graph, scn.spec, scn.gains)
    except SimulationError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    wall = time.perf_counter() - started

    if args.format == "json":
        data_path = out_dir / "run.jsonl"
        log.write_jsonl(data_path)
    else:
        data_path = out_dir / "run.csv"
        log.write_csv(data_path)
    summary = log.summary()
    summary["scenario"] = scn.name
    summary["seed"] = cfg.seed
    summary["dt"] = cfg.dt
    summary["wall_time_s"] = wall
    summary["data"] = data_path.name
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {data_path} and {summary_path}")
    print(
        f"final max |error| = {summary['max_abs_final_error']:.3e}, "
        f"min neighbor distance = {summary['min_neighbor_distance']:.3e}, "
        f"wall {wall:.2f} s"
    )
    return EXIT_OK


def cmd_check(args) -> int:
    names = args.suites or ["all"]
    if "all" in names:
        names = list(checks.SUITES)
    unknown = [n for n in names if n not in checks.SUITES]
    if unknown:
        print(f"error: unknown suites {unknown}; known: {sorted(checks.SUITES)}",
              file=sys.stderr)
        return EXIT_IO
    overall_ok = True
    for name in names:
        kwargs = {"seed": args.seed}
        if name == "montecarlo":
            kwargs["trials"] = args.trials
        elif name == "lemma1":
            kwargs["pairs"] = args.samples if args.samples else 1000
        else:
            kwargs["samples"] = args.samples if args.samples else 10_000
        results = checks.SUITES[name](**kwargs)
        passed = sum(1 for r in results if r.passed)
        print(f"== {name}: {passed}/{len(results)} checks passed")
        for r in results:
            print("  " + r.line())
        overall_ok &= checks.all_passed(results)
    return EXIT_OK if overall_ok else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bispheric",
        description="3D leader-follower formation control: simulate, derive "
        "targets, validate graphs, and run the verification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-graph", help="check a scenario's sensing graph")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate_graph)

    p = sub.add_parser("derive-targets", help="print the bispherical targets of a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_derive_targets)

    p = sub.add_parser("simulate", help="integrate a scenario and write CSV/JSON logs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run property-check suites")
    p.add_argument("suites", nargs="*", help="geometry dynamics lemma1 montecarlo all")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
