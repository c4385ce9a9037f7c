"""Command-line front-end: run scenarios, verify invariants, sample, list.

Exit codes: 0 when everything requested passed, 1 for runtime failures or
failed checks, 2 for malformed configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import Bohm2pError, ConfigError
from .scenario import (builtin_scenarios, build_model, load_config,
                       run_property_checks, run_scenario, validate_config,
                       PROPERTY_SUITES, _fmt)

logger = logging.getLogger("bohm2p")


def _default_threads() -> int:
    env = os.environ.get("BOHM2P_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer BOHM2P_THREADS=%r", env)
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bohm2p",
        description="Two-particle pilot-wave trajectory simulator for "
                    "double-slit interference devices")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="Run a scenario config (path or built-in name)")
    run_cmd.add_argument("config", help="JSON config file or built-in scenario name")
    run_cmd.add_argument("--out", type=Path, default=None,
                         help="Output directory (default: from the config)")
    run_cmd.add_argument("--seed", type=int, default=None,
                         help="Override the sampler seed")
    run_cmd.add_argument("--threads", type=int, default=None,
                         help="Worker threads for propagation "
                              "(default: BOHM2P_THREADS or 1)")

    check_cmd = sub.add_parser(
        "check", help="Run the ensemble-free invariant suites")
    check_cmd.add_argument("config", nargs="?", default=None,
                           help="Optional JSON file selecting suites: "
                                '{"suites": [...], "n_points": N, "seed": N}')
    check_cmd.add_argument("--fast", action="store_true",
                           help="Reduce the number of random points per suite")
    check_cmd.add_argument("--json", action="store_true",
                           help="Print the report as JSON")

    sub.add_parser("scenarios", help="List built-in scenarios")

    sample_cmd = sub.add_parser("sample", help="Run only the initial sampler")
    sample_cmd.add_argument("config", help="JSON config file or built-in scenario name")
    sample_cmd.add_argument("--out", type=Path, default=None,
                            help="Output directory (default: from the config)")
    sample_cmd.add_argument("--seed", type=int, default=None)
    return parser


def _print_check_table(results) -> None:
    width = max((len(r.name) for r in results), default=10)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"  [{mark}] {r.name:<{width}}  measured={r.measured:.6g}  "
              f"threshold={r.threshold:.6g}")
        if r.detail:
            print(f"         {r.detail}")


def _cmd_run(args) -> int:
    cfg = validate_config(load_config(args.config))
    threads = args.threads if args.threads is not None else _default_threads()
    report, out_path = run_scenario(cfg, out_dir=args.out,
                                    seed_override=args.seed, threads=threads)
    print(f"scenario '{report.name}' -> {out_path}")
    _print_check_table(report.checks)
    for stage, seconds in report.timings.items():
        print(f"  time[{stage}] = {seconds:.2f}s")
    if not report.passed:
        print("FAILED: at least one configured check did not pass")
        return 1
    print("all configured checks passed")
    return 0


def _cmd_check(args) -> int:
    n_points = 200 if args.fast else 1000
    seed = 20260809
    suites = None
    if args.config is not None:
        raw = load_config(args.config)
        suites = raw.get("suites")
        if suites is not None and not isinstance(suites, list):
            raise ConfigError("suites: must be a list of suite names")
        if "n_points" in raw:
            n_points = int(raw["n_points"])
        if "seed" in raw:
            seed = int(raw["seed"])
    if suites is not None and len(suites) == 0:
        print("no check suites requested")
        print(json.dumps({"checks": []}) if args.json else "")
        return 0
    results = run_property_checks(n_points=n_points, seed=seed, suites=suites)
    if args.json:
        print(json.dumps({"checks": [r.to_dict() for r in results]},
                         indent=2, sort_keys=True))
    else:
        _print_check_table(results)
    return 0 if all(r.passed for r in results) else 1


def _cmd_scenarios() -> int:
    for name, cfg in builtin_scenarios().items():
        print(f"{name:<28} {cfg.get('description', '')}")
    return 0


def _cmd_sample(args) -> int:
    from .ensemble import SamplerSettings, sample_positions

    cfg = validate_config(load_config(args.config))
    if cfg.get("sampler") is None:
        raise ConfigError("sampler: this scenario supplies explicit initial "
                          "points and has nothing to sample")
    sampler_cfg = dict(cfg["sampler"])
    if args.seed is not None:
        sampler_cfg["seed"] = int(args.seed)
    model = build_model(cfg)
    result = sample_positions(model, SamplerSettings(**sampler_cfg))
    out_path = Path(args.out) if args.out is not None else Path(cfg["output"]["directory"])
    out_path.mkdir(parents=True, exist_ok=True)
    lines = ["pair_id,x1,y1,x2,y2"]
    for i, (x1, x2) in enumerate(result.x):
        lines.append(f"{i},{_fmt(x1)},0.0,{_fmt(x2)},0.0")
    (out_path / "samples.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(result.x)} samples to {out_path / 'samples.csv'}")
    print(f"acceptance rate: {result.acceptance_rate:.3f}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "scenarios":
            return _cmd_scenarios()
        if args.command == "sample":
            return _cmd_sample(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Bohm2pError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
