"""Command line: ``run``, ``gen`` and ``replay``.

Exit status: 0 success, 2 configuration or input error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from typing import List, Optional

from .config import ENV_CONFIG, RunConfig, load_config, parse_scenario_ids
from .experiment import execute, report_for
from .metrics import FORMATS, ScenarioReport, render
from .packet import TraceError, read_trace
from .pipeline import ConfigError, StreamOrderError
from .scenarios import SCENARIO_TABLE, GeneratorError, build_topology, check_benign_headroom, generate, write_trace

log = logging.getLogger("v6edge")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"INI config file (default: ${ENV_CONFIG}, else built-in defaults)")
    common.add_argument("--seed", type=int, help="topology and traffic seed (overrides config)")
    common.add_argument("--out", default="out", help="output directory (gen also accepts a .jsonl file)")
    common.add_argument("--format", choices=FORMATS, default="table", help="report format printed to stdout")
    common.add_argument("--emit-verdicts", action="store_true", help="write verdicts_NN.jsonl")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="v6edge", description="Zero-trust IPv6 edge defense harness")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="generate scenarios, run the pipeline, write reports")
    run.add_argument("--scenarios", help="'all', or ids such as '1 4 7-9'")
    run.add_argument("--emit-trace", action="store_true", help="write trace_NN.jsonl")

    gen = sub.add_parser("gen", parents=[common], help="write labeled traces without running the pipeline")
    gen.add_argument("--scenarios", help="'all', or ids such as '1 4 7-9'")

    replay = sub.add_parser("replay", parents=[common], help="run the pipeline over JSON-lines traces")
    replay.add_argument("traces", nargs="+", help="trace files; scenario id taken from a trace_NN name")
    replay.add_argument("--scenario-id", type=int, help="scenario id for a single trace")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "scenarios", None):
        cfg.scenarios = parse_scenario_ids(args.scenarios)
    return cfg


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_reports(out: str, reports: List[ScenarioReport], fmt: str) -> None:
    _write(os.path.join(out, "report.json"), render(reports, "json"))
    _write(os.path.join(out, "report.csv"), render(reports, "csv"))
    sys.stdout.write(render(reports, fmt))


def _write_verdicts(path: str, stream, verdicts) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pkt, v in zip(stream, verdicts):
            fh.write(v.to_json(pkt.timestamp))
            fh.write("\n")


def cmd_run(args) -> int:
    cfg = _config(args)
    topo = build_topology(cfg.seed)
    pcfg = cfg.pipeline_config(topo)
    os.makedirs(args.out, exist_ok=True)
    reports = []
    for sid in cfg.scenarios:
        spec = cfg.scenario_spec(sid)
        stream = generate(spec, topo)
        try:
            check_benign_headroom(
                stream, topo, pcfg.theta_ext, pcfg.theta_u, pcfg.theta_m, pcfg.window_ext_ns, pcfg.window_int_ns
            )
        except GeneratorError as exc:
            log.warning("scenario %d: %s", sid, exc)
        pipeline, verdicts = execute(stream, pcfg)
        reports.append(report_for(sid, spec.name, stream, pipeline, verdicts))
        log.info("scenario %d: %d packets", sid, len(stream))
        if args.emit_trace:
            with open(os.path.join(args.out, f"trace_{sid:02d}.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
                write_trace(stream, fh)
        if args.emit_verdicts:
            _write_verdicts(os.path.join(args.out, f"verdicts_{sid:02d}.jsonl"), stream, verdicts)
    _write_reports(args.out, reports, args.format)
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = _config(args)
    topo = build_topology(cfg.seed)
    single_file = args.out.endswith(".jsonl")
    if single_file and len(cfg.scenarios) != 1:
        raise ConfigError("a .jsonl output path needs exactly one scenario")
    if not single_file:
        os.makedirs(args.out, exist_ok=True)
    for sid in cfg.scenarios:
        stream = generate(cfg.scenario_spec(sid), topo)
        path = args.out if single_file else os.path.join(args.out, f"trace_{sid:02d}.jsonl")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_trace(stream, fh)
        log.info("wrote %s (%d packets)", path, len(stream))
    return EXIT_OK


_TRACE_ID = re.compile(r"(\d+)\D*$")


def cmd_replay(args) -> int:
    cfg = _config(args)
    if args.scenario_id is not None and len(args.traces) != 1:
        raise ConfigError("--scenario-id applies to a single trace")
    topo = build_topology(cfg.seed)
    pcfg = cfg.pipeline_config(topo)
    os.makedirs(args.out, exist_ok=True)
    reports = []
    for path in args.traces:
        if args.scenario_id is not None:
            sid = args.scenario_id
        else:
            m = _TRACE_ID.search(os.path.basename(path).rsplit(".", 1)[0])
            sid = int(m.group(1)) if m else 0
        with open(path, encoding="utf-8") as fh:
            try:
                stream = read_trace(fh)
            except TraceError as exc:
                raise TraceError(f"{path}: {exc}") from None
        pipeline, verdicts = execute(stream, pcfg)
        if args.emit_verdicts:
            _write_verdicts(os.path.join(args.out, f"verdicts_{sid:02d}.jsonl"), stream, verdicts)
        report = report_for(sid, SCENARIO_TABLE.get(sid, (None, ""))[1], stream, pipeline, verdicts)
        if report is None:
            log.warning("%s has unlabeled packets; verdicts only, no metrics", path)
            if not args.emit_verdicts:
                _write_verdicts(os.path.join(args.out, f"verdicts_{sid:02d}.jsonl"), stream, verdicts)
        else:
            reports.append(report)
    if reports:
        _write_reports(args.out, reports, args.format)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "gen": cmd_gen, "replay": cmd_replay}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TraceError, StreamOrderError, GeneratorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
