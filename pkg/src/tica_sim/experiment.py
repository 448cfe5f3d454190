"""
Experiment orchestration: size the caches from a stats pre-pass, build the
engine for the configured architecture, run it, and turn the result into a
MetricReport. Sweeps and audits are built on the same path.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ValidationError

from .analytics import build_report, normalize_to
from .baselines import MirroredCache
from .cache_core import TicaCache
from .config import merge_config
from .devices import build_catalog, with_capacity
from .engine import CacheEngine
from .exceptions import ConfigError, InvariantViolation, SimulatorError
from .models import (
    Architecture,
    BaselineConfig,
    CacheDevice,
    ExperimentConfig,
    MetricReport,
    Request,
    RunStats,
    WorkloadStats,
)
from .trace import gen_synthetic, load_trace, trace_stats

logger = logging.getLogger(__name__)


class CacheSizes(BaseModel):
    """Usable pages per cache level, resolved against the trace working set."""
    working_set_pages: int
    dram_pages: int
    ssd_pages: int


class AuditResult(BaseModel):
    passed: bool
    page_ops: int
    invariants: Dict[str, str]
    violation: Optional[Dict[str, Any]] = None
    # requests up to and including the one that broke an invariant
    prefix: List[Request] = []


TICA_INVARIANTS = (
    "write-cache-bounds",
    "dram-occupancy",
    "ssd-occupancy",
    "dram-exclusive",
    "clean-read-partition",
    "dirty-redundancy",
    "single-failure-recoverable",
    "busy-idle-conservation",
)
BASELINE_INVARIANTS = ("ssd-occupancy", "dram-occupancy", "mirror-writes", "dirty-in-ssd", "busy-idle-conservation")


def open_trace(config: ExperimentConfig) -> Iterable[Request]:
    """A re-iterable request source for the configured trace or synthetic workload."""
    if config.synthetic is not None:
        return gen_synthetic(config.effective_synthetic())
    source = config.trace
    return load_trace(source.path, source.format, source.page_size_bytes, source.on_error, source.max_error_fraction)


def resolve_sizes(config: ExperimentConfig, stats: WorkloadStats) -> CacheSizes:
    sizing = config.sizing
    ws = max(1, stats.working_set_pages)
    dram = sizing.dram_pages or max(2, math.ceil(sizing.dram_fraction * ws))
    ssd = sizing.ssd_pages or max(1, math.ceil(sizing.ssd_fraction * ws))
    return CacheSizes(working_set_pages=ws, dram_pages=dram, ssd_pages=ssd)


def build_engine(
    config: ExperimentConfig,
    sizes: CacheSizes,
    record_events: bool = False,
    track_changes: bool = False,
) -> CacheEngine:
    catalog = build_catalog(config.devices)
    reserve = config.sizing.internal_reserve_pages
    page_size = config.page_size_bytes
    dram = with_capacity(catalog["dram"], sizes.dram_pages + reserve)

    def ssd(role: str, pages: int = sizes.ssd_pages):
        return with_capacity(catalog[role], pages + reserve)

    arch = config.architecture
    if arch is Architecture.TICA:
        return TicaCache(
            dram, ssd("ro_ssd"), ssd("wo_ssd"), catalog["hdd"],
            policy=config.policy,
            page_size=page_size,
            clock=config.clock,
            internal_reserve_pages=reserve,
            def_write_fraction=config.sizing.def_write_fraction,
            min_read_fraction=config.sizing.min_read_fraction,
            eq_pages=config.sizing.eq_pages,
            thresholds=config.thresholds,
            record_events=record_events,
            track_changes=track_changes,
        )

    if arch is Architecture.MIRRORED_WB:
        layout = dict(members=[ssd(config.sizing.ssd_model)] * 2, dram=dram)
    elif arch is Architecture.SINGLE_SSD:
        # same total cache capacity as the DRAM + SSD architectures
        layout = dict(members=[ssd(config.sizing.ssd_model, sizes.ssd_pages + sizes.dram_pages)])
    elif arch is Architecture.RAID1_RO:
        layout = dict(members=[ssd("ro_ssd")] * 2)
    elif arch is Architecture.RAID1_WO:
        layout = dict(members=[ssd("wo_ssd")] * 2)
    else:
        layout = dict(members=[ssd("ro_ssd"), ssd("wo_ssd")])
    try:
        baseline = BaselineConfig(kind=arch, hdd=catalog["hdd"], internal_reserve_pages=reserve, **layout)
    except ValidationError as e:
        raise ConfigError(f"invalid baseline layout: {e}") from e
    return MirroredCache(
        baseline, page_size=page_size, clock=config.clock, record_events=record_events, track_changes=track_changes,
    )


def prepare(
    config: ExperimentConfig,
    record_events: bool = False,
    track_changes: bool = False,
) -> Tuple[CacheEngine, Iterable[Request], int]:
    """Stats pre-pass, sizing and engine construction; returns (engine, trace, warm-up requests)."""
    trace = open_trace(config)
    stats = trace_stats(trace, config.page_size_bytes)
    if stats.total_requests == 0:
        raise ConfigError("trace contains no requests")
    sizes = resolve_sizes(config, stats)
    logger.info(
        f"Working set {sizes.working_set_pages} pages over {stats.total_requests} requests; "
        f"DRAM {sizes.dram_pages} pages, SSD {sizes.ssd_pages} pages"
    )
    engine = build_engine(config, sizes, record_events, track_changes)
    return engine, trace, int(config.warmup_fraction * stats.total_requests)


def report_for(config: ExperimentConfig, stats: RunStats) -> MetricReport:
    analytics = config.analytics
    return build_report(stats, analytics.alpha, analytics.mission_hours, analytics.dram_idle_at_ro_power)


def run_experiment(config: ExperimentConfig) -> Tuple[MetricReport, RunStats]:
    """Run one configured experiment to completion."""
    engine, trace, warmup = prepare(config)
    stats = engine.run(trace, warmup_requests=warmup)
    report = report_for(config, stats)
    logger.info(
        f"Run finished: {config.architecture.value}/{config.policy.value} "
        f"hit_ratio={report.hit_ratio:.4f} mean_latency={report.mean_latency_us:.1f}us "
        f"policy_switches={report.policy_switches}"
    )
    return report, stats


def expand_grid(grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of a grid of dotted config keys, in key order."""
    if not grid:
        raise ConfigError("sweep grid is empty")
    for key, values in grid.items():
        if not values:
            raise ConfigError(f"sweep axis '{key}' has no values")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def dotted_to_nested(point: Mapping[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for dotted, value in point.items():
        target = nested
        *parents, leaf = dotted.split(".")
        for part in parents:
            target = target.setdefault(part, {})
        target[leaf] = value
    return nested


def run_point(base: Dict[str, Any], point: Dict[str, Any]) -> Dict[str, Any]:
    """One sweep row; failures become an ``error`` row instead of raising."""
    try:
        config = ExperimentConfig.model_validate(merge_config(base, dotted_to_nested(point)))
        report, _ = run_experiment(config)
        return {**point, **report.model_dump(mode="json"), "error": None}
    except (SimulatorError, ValidationError) as e:
        logger.error(f"Sweep point {point} failed: {e}")
        return {**point, "error": str(e)}


def sweep(
    config: ExperimentConfig,
    grid: Mapping[str, Sequence[Any]],
    workers: int = 1,
    normalize: Optional[Architecture] = None,
) -> List[Dict[str, Any]]:
    """One row per grid point, in grid order; optionally normalized to a reference architecture."""
    points = expand_grid(grid)
    base = config.model_dump(mode="json", exclude_none=True)
    logger.info(f"Sweeping {len(points)} points with {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_point, [base] * len(points), points))
    else:
        rows = [run_point(base, point) for point in points]
    if normalize is not None:
        rows = normalize_to(rows, normalize, group_by=[k for k in grid if k != "architecture"])
    return rows


def _check_engine(engine: CacheEngine, index: int, pages: Optional[Iterable[int]] = None) -> None:
    engine.check_invariants(index, pages)
    if isinstance(engine, TicaCache):
        dirty = engine.dirty if pages is None else [p for p in pages if p in engine.dirty]
        if not dirty:
            return
        for device in CacheDevice:
            report = engine.fail_device([device], dirty)
            if report.unrecoverable:
                raise InvariantViolation(
                    "single-failure-recoverable",
                    f"loss of {device.value} loses {len(report.unrecoverable)} dirty page(s)",
                    page=report.unrecoverable[0],
                    event_index=index,
                )


def audit(
    config: ExperimentConfig,
    fault: Optional[Callable[[CacheEngine, int], None]] = None,
) -> AuditResult:
    """
    Replay with every invariant checked after each page operation.

    After each page operation the per-page invariants are checked on the pages
    whose directory membership changed; the whole directory is checked once
    more after the final drain. ``fault`` runs before the checks of every page
    operation and may corrupt the engine to exercise the checker.

    On failure the audit stops: the broken invariant is reported "fail" and the
    others "unchecked". The returned prefix is every request replayed up to the
    failure; it is not minimized.
    """
    engine, trace, _ = prepare(config, track_changes=True)
    names = TICA_INVARIANTS if isinstance(engine, TicaCache) else BASELINE_INVARIANTS

    def checker(eng: CacheEngine, index: int) -> None:
        if fault is not None:
            fault(eng, index)
        _check_engine(eng, index, eng.take_touched())

    engine.checker = checker
    seen: List[Request] = []
    try:
        for request in trace:
            seen.append(request)
            engine.submit(request)
        stats = engine.finish()
        engine.take_touched()
        _check_engine(engine, engine.page_ops)
        for role, device in engine.devices.items():
            try:
                device.idle_time(stats.total_sim_us)
            except SimulatorError as e:
                raise InvariantViolation("busy-idle-conservation", str(e)) from e
    except InvariantViolation as e:
        results = {name: "unchecked" for name in names}
        results[e.invariant] = "fail"
        logger.error(f"Audit failed after {engine.page_ops} page ops: {e}")
        return AuditResult(
            passed=False,
            page_ops=engine.page_ops,
            invariants=results,
            violation={"invariant": e.invariant, "detail": e.detail, "page": e.page, "event_index": e.event_index},
            prefix=seen,
        )
    logger.info(f"Audit passed: {len(names)} invariants over {engine.page_ops} page ops")
    return AuditResult(passed=True, page_ops=engine.page_ops, invariants={name: "pass" for name in names})
