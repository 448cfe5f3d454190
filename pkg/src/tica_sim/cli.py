"""
Command-line entry point: ``tica-sim <command> [options]``.

Flags mirror the experiment config keys in kebab-case and override values read
from ``--config`` (or from the file named by ``TICA_SIM_CONFIG``).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import analytics
from .config import load_experiment_config, set_log_level, settings
from .exceptions import ConfigError, SimulatorError
from .experiment import audit, run_experiment, sweep
from .models import Architecture, ClockMode, PolicyName, ReportFormat, SyntheticSpec, TraceFormat
from .trace import WORKLOAD_PRESETS, dump_trace, gen_synthetic, load_trace, preset_spec, trace_stats

logger = logging.getLogger(__name__)

# short names accepted by --synthetic
SYNTHETIC_ALIASES = {"pages": "working_set_pages", "requests": "request_count", "seed": "rng_seed"}


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_assignments(text: str) -> Dict[str, Any]:
    """``a=1,b=zipf`` -> {"a": 1, "b": "zipf"}"""
    out = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"expected key=value, got '{item}'")
        key, value = item.split("=", 1)
        key = key.strip().replace("-", "_")
        out[SYNTHETIC_ALIASES.get(key, key)] = parse_value(value.strip())
    return out


def parse_grid(axes: List[str]) -> Dict[str, List[Any]]:
    """Each ``--grid key=v1,v2`` adds one sweep axis."""
    grid: Dict[str, List[Any]] = {}
    for axis in axes or []:
        if "=" not in axis:
            raise ConfigError(f"expected --grid key=v1,v2,..., got '{axis}'")
        key, values = axis.split("=", 1)
        grid[key.strip().replace("-", "_")] = [parse_value(v.strip()) for v in values.split(",") if v.strip()]
    return grid


def synthetic_from_args(args) -> Optional[Dict[str, Any]]:
    if not (getattr(args, "synthetic", None) or getattr(args, "preset", None)):
        return None
    updates = parse_assignments(args.synthetic) if args.synthetic else {}
    try:
        if args.preset:
            return preset_spec(args.preset, **updates).model_dump(mode="json")
        return SyntheticSpec(**updates).model_dump(mode="json")
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from e
    except ValueError as e:
        raise ConfigError(f"invalid synthetic workload: {e}") from e


def overrides_from_args(args) -> Dict[str, Any]:
    """Nested config overrides for every flag that was given."""
    overrides: Dict[str, Any] = {}

    def put(section: Optional[str], key: str, value: Any) -> None:
        if value is None:
            return
        target = overrides.setdefault(section, {}) if section else overrides
        target[key] = value

    if args.trace:
        trace = {"path": args.trace}
        if args.format:
            trace["format"] = args.format
        overrides["trace"] = trace
        overrides["synthetic"] = None
    synthetic = synthetic_from_args(args)
    if synthetic is not None:
        overrides["synthetic"] = synthetic
        overrides["trace"] = None

    put(None, "architecture", args.architecture)
    put(None, "policy", args.policy)
    put(None, "clock", args.clock)
    put(None, "seed", args.seed)
    put(None, "warmup_fraction", args.warmup_fraction)
    put("sizing", "ssd_fraction", args.ssd_fraction)
    put("sizing", "dram_fraction", args.dram_fraction)
    put("sizing", "dram_pages", args.dram_pages)
    put("sizing", "ssd_pages", args.ssd_pages)
    put("sizing", "eq_pages", args.eq_pages)
    put("sizing", "ssd_model", args.ssd_model)
    put("thresholds", "capacity_prose_variant", True if args.capacity_prose_variant else None)
    put("analytics", "alpha", args.alpha)
    put("analytics", "mission_hours", args.mission_hours)
    put("analytics", "dram_idle_at_ro_power", True if args.dram_idle_at_ro_power else None)
    put("output", "path", args.output)
    put("output", "format", args.output_format)
    return overrides


def emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {path}")
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    config = load_experiment_config(args.config, overrides_from_args(args))
    report, _ = run_experiment(config)
    text = analytics.render_report(report, config.output.format, config.model_dump(mode="json"))
    emit(text, config.output.path)
    return 0


def cmd_sweep(args) -> int:
    config = load_experiment_config(args.config, overrides_from_args(args))
    grid = parse_grid(args.grid)
    rows = sweep(config, grid, workers=args.workers, normalize=args.normalize)
    if config.output.format is ReportFormat.CSV:
        text = analytics.render_rows(rows)
    else:
        text = json.dumps(analytics.round_floats(rows), indent=2, sort_keys=True) + "\n"
    emit(text, config.output.path)
    return 0


def cmd_audit(args) -> int:
    config = load_experiment_config(args.config, overrides_from_args(args))
    result = audit(config)
    for name, outcome in result.invariants.items():
        print(f"{outcome.upper():4}  {name}", file=sys.stderr)
    emit(result.model_dump_json(indent=2) + "\n", config.output.path)
    return 0 if result.passed else 4


def cmd_gen_trace(args) -> int:
    spec_dict = synthetic_from_args(args) or SyntheticSpec().model_dump(mode="json")
    spec = SyntheticSpec(**spec_dict)
    if args.seed is not None:
        spec = spec.model_copy(update={"rng_seed": args.seed})
    count = dump_trace(gen_synthetic(spec), args.out)
    logger.info(f"Wrote {count} requests to {args.out}")
    return 0


def cmd_stats(args) -> int:
    reader = load_trace(args.trace, args.format or TraceFormat.MSR, args.page_size)
    stats = trace_stats(reader, args.page_size)
    document = {**stats.model_dump(), "skipped_records": reader.skipped}
    emit(json.dumps(document, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_compare_arch(args) -> int:
    table = analytics.round_floats(analytics.compare_architectures())
    emit(json.dumps(table, indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_reliability(args) -> int:
    hours = args.mission_hours or analytics.HOURS_PER_YEAR
    document = analytics.reliability_discrepancy(alpha=args.alpha, mission_hours=hours)
    emit(json.dumps(analytics.round_floats(document), indent=2, sort_keys=True) + "\n", args.output)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("tica_sim.server:app", host=args.host, port=args.port, reload=settings.DEBUG)
    return 0


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON experiment config (default: $TICA_SIM_CONFIG)")
    p.add_argument("--trace", help="Trace file to replay")
    p.add_argument("--format", choices=[f.value for f in TraceFormat], help="Trace file format")
    p.add_argument("--synthetic", help="Synthetic workload, e.g. read_fraction=0.7,pages=100000")
    p.add_argument("--preset", choices=sorted(WORKLOAD_PRESETS), help="Synthetic workload with the read share of a known trace")
    p.add_argument("--architecture", choices=[a.value for a in Architecture])
    p.add_argument("--policy", choices=[p.value for p in PolicyName])
    p.add_argument("--clock", choices=[c.value for c in ClockMode])
    p.add_argument("--seed", type=int)
    p.add_argument("--warmup-fraction", type=float)
    p.add_argument("--ssd-fraction", type=float)
    p.add_argument("--dram-fraction", type=float)
    p.add_argument("--dram-pages", type=int)
    p.add_argument("--ssd-pages", type=int)
    p.add_argument("--eq-pages", type=int)
    p.add_argument("--ssd-model", choices=["wo_ssd", "ro_ssd", "c_ssd"], help="SSD model of the baselines")
    p.add_argument("--capacity-prose-variant", action="store_true", help="Alternative capacity detector rule")
    p.add_argument("--alpha", type=float, help="Fixed alpha for the reliability model")
    p.add_argument("--mission-hours", type=float)
    p.add_argument("--dram-idle-at-ro-power", action="store_true", help="Charge DRAM idle time at RO-SSD idle power")
    p.add_argument("--output", help="Report path (default: stdout)")
    p.add_argument("--output-format", choices=[f.value for f in ReportFormat])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tica-sim", description=settings.APP_DESCRIPTION)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Run one experiment and print its report")
    _experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Run a parameter grid, one report row per point")
    _experiment_flags(p)
    p.add_argument("--grid", action="append", required=True, help="Sweep axis key=v1,v2 (repeatable)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--normalize", choices=[a.value for a in Architecture], help="Reference architecture")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", help="Run with every invariant checked after each page operation")
    _experiment_flags(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("gen-trace", help="Write a synthetic NativeJsonLines trace")
    p.add_argument("--synthetic", help="Workload, e.g. read_fraction=0.7,pages=100000,locality=zipf")
    p.add_argument("--preset", choices=sorted(WORKLOAD_PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("stats", help="Working-set statistics of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--format", choices=[f.value for f in TraceFormat])
    p.add_argument("--page-size", type=int, default=4096)
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare-arch", help="Per-operation latency of the mirrored pairs and TICA")
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare_arch)

    p = sub.add_parser("reliability", help="Reliability model outputs against the stated values")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--mission-hours", type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("serve", help="Start the HTTP service")
    p.add_argument("--host", default=settings.HOST)
    p.add_argument("--port", type=int, default=settings.PORT)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_log_level(args.log_level)
    try:
        return args.func(args)
    except SimulatorError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
