"""Command line entry point: ``simulate``, ``analyze``, ``replay`` and ``flows``.

Exit codes: 0 success, 1 configuration error, 2 replica divergence or
replay mismatch.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .agent import format_flow_lines, read_flow_log, read_host_list
from .experiment import (
    ConfigError,
    ReplicaDivergence,
    analyze_flows,
    load_config,
    replay,
    run_experiment,
)
from .ledger.chain import InvalidBlockError
from .ledger.encoding import DecodeError
from .ledger.storage import SEGMENT_RE
from .traffic import build_world, generate

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors; 2 is reserved for divergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _rho(value: str):
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("rho must be a number or 'auto'") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config with world/ledger/detector sections")
    p.add_argument("--theta", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--rho", type=_rho, help="pivotal threshold or 'auto'")
    p.add_argument("--blocks-per-round", type=int)
    p.add_argument("--out", type=Path, help="output directory for reports and chain segments")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of the table")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mutualbot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthetic end-to-end run")
    _add_common(sim)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--rounds", type=int)
    sim.add_argument("--generators", type=int)
    sim.add_argument("--crash", type=int, action="append", metavar="ID",
                     help="generator that stays silent for the whole run (repeatable)")

    ana = sub.add_parser("analyze", help="run the detection pipeline over a flow log")
    _add_common(ana)
    ana.add_argument("flowlog", type=Path)
    ana.add_argument("--whitelist", type=Path)
    ana.add_argument("--blacklist", type=Path)

    rep = sub.add_parser("replay", help="re-execute a persisted chain and verify state roots")
    rep.add_argument("chain_dir", type=Path)

    flows = sub.add_parser("flows", help="dump generated traffic in flow-log format")
    flows.add_argument("--config", type=Path)
    flows.add_argument("--seed", type=int)
    flows.add_argument("--ticks", type=int, default=100)
    flows.add_argument("output", type=Path, nargs="?")
    return parser


def _overrides(args) -> dict:
    return {
        "world.rng_seed": getattr(args, "seed", None),
        "rounds": getattr(args, "rounds", None),
        "detector.theta": args.theta,
        "detector.phi": args.phi,
        "detector.rho": args.rho,
        "ledger.n_generators": getattr(args, "generators", None),
        "ledger.blocks_per_round": args.blocks_per_round,
        "output_dir": str(args.out) if args.out else None,
        "crashed_generators": args.crash if getattr(args, "crash", None) else None,
    }


def _emit(report, as_json: bool) -> None:
    sys.stdout.write(report.to_json() if as_json else report.to_table())


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    try:
        report = run_experiment(cfg)
    except ReplicaDivergence as exc:
        print(f"error: {exc}; roots: {exc.details['roots']}", file=sys.stderr)
        return EXIT_DIVERGENCE
    _emit(report, args.json)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    try:
        log = read_flow_log(args.flowlog)
        whitelist = read_host_list(args.whitelist) if args.whitelist else frozenset()
        blacklist = read_host_list(args.blacklist) if args.blacklist else frozenset()
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if log.malformed:
        print(f"skipped {log.malformed} malformed flow lines", file=sys.stderr)
    if args.out and args.out.exists() and any(SEGMENT_RE.match(p.name) for p in (args.out / "chain").glob("*")):
        raise ConfigError(f"{args.out} already holds a chain")
    report = analyze_flows(log.flows, cfg.ledger, cfg.detector, whitelist, blacklist, args.out)
    _emit(report, args.json)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        results = replay(args.chain_dir)
    except (InvalidBlockError, DecodeError) as exc:
        print(f"error: corrupt chain: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    bad = 0
    for r in results:
        status = "ok" if r.ok else "MISMATCH"
        bad += not r.ok
        print(f"round {r.round_index:>4}  {r.actual[:16]}  {status}")
    print(f"{len(results) - bad}/{len(results)} rounds reproduced")
    return EXIT_OK if bad == 0 and results else EXIT_DIVERGENCE


def cmd_flows(args) -> int:
    cfg = load_config(args.config, {"world.rng_seed": args.seed})
    lines = format_flow_lines(generate(build_world(cfg.world), range(args.ticks)))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        sys.stdout.writelines(lines)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "replay": cmd_replay, "flows": cmd_flows}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
