"""
Evaluation metrics computed from a finished run: CWAF, energy, reliability,
endurance, cost, and the analytic per-operation latency comparison.

Everything here is a pure function of a RunStats (or of device models), so
sweep points can be evaluated in any order or in parallel.
"""

import csv
import io
import json
import logging
import math
from decimal import Decimal, localcontext
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .devices import DEFAULT_CATALOG, capacity_gb
from .exceptions import AccountingError, ConfigError
from .models import (
    Architecture,
    DeviceKind,
    DeviceModel,
    MetricReport,
    ReliabilityReport,
    ReportFormat,
    RunStats,
)

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 365 * 24
SIGNIFICANT_DIGITS = 12
# Unreliabilities stated for alpha = 0.8 next to the reliability formulas
STATED_UNRELIABILITY = {"tica": 1.27e-5, "mirrored": 1.14e-5}

_DECIMAL_PREC = 50


def _cache_devices(stats: RunStats, kinds=(DeviceKind.DRAM, DeviceKind.SSD)):
    return [(role, snap) for role, snap in stats.devices.items() if snap.model.kind in kinds]


def ssd_writes(stats: RunStats) -> Dict[str, int]:
    return {role: snap.writes for role, snap in _cache_devices(stats, (DeviceKind.SSD,))}


def cwaf(stats: RunStats) -> Optional[float]:
    """SSD page writes (flushes, WED copies and fills included) per user write page."""
    if stats.user_writes == 0:
        return None
    return sum(ssd_writes(stats).values()) / stats.user_writes


def hit_ratio(stats: RunStats) -> float:
    if stats.user_reads == 0:
        return 0.0
    return stats.cache_hits / stats.user_reads


def mean_latency(stats: RunStats) -> float:
    if stats.latency_count == 0:
        return 0.0
    return stats.latency_sum_us / stats.latency_count


def energy(stats: RunStats, dram_idle_at_ro_power: bool = False) -> float:
    """
    Joules spent by the cache devices: access energy (count x latency x power)
    plus idle energy (idle time x idle power). The HDD is not part of the sum.

    With ``dram_idle_at_ro_power`` the DRAM idle time is charged at the RO-SSD idle
    power, the form of the formula usually quoted.
    """
    total_us = stats.total_sim_us
    micro_joules = 0.0
    for role, snap in _cache_devices(stats):
        model = snap.model
        busy = snap.reads * model.read_latency_us + snap.writes * model.write_latency_us
        if total_us < busy:
            raise AccountingError(f"{role}: busy {busy} us exceeds simulated time {total_us} us")
        idle_power = model.idle_power_w
        if dram_idle_at_ro_power and model.kind is DeviceKind.DRAM and "ro_ssd" in stats.devices:
            idle_power = stats.devices["ro_ssd"].model.idle_power_w
        micro_joules += snap.reads * model.read_latency_us * model.read_power_w
        micro_joules += snap.writes * model.write_latency_us * model.write_power_w
        micro_joules += (total_us - busy) * idle_power
    return micro_joules * 1e-6


def device_reliability(model: DeviceModel, mission_hours: Optional[float] = None) -> Decimal:
    """
    ``exp(-1 / (MTTF * 8760))`` (annual form), or ``exp(-H / MTTF)`` for a
    mission time of H hours.
    """
    with localcontext() as ctx:
        ctx.prec = _DECIMAL_PREC
        mttf = Decimal(str(model.mttf_hours))
        if mission_hours is None:
            exponent = -1 / (mttf * HOURS_PER_YEAR)
        else:
            exponent = -Decimal(str(mission_hours)) / mttf
        return exponent.exp()


def _parallel(*reliabilities: Decimal) -> Decimal:
    """Reliability of redundant components: fails only if all fail."""
    failure = Decimal(1)
    for r in reliabilities:
        failure *= 1 - r
    return 1 - failure


def reliability(
    models: Mapping[str, DeviceModel], alpha: float, mission_hours: Optional[float] = None
) -> ReliabilityReport:
    """
    TICA reliability weighted by alpha (share of dirty-page time whose second
    copy is in DRAM), next to a mirrored pair of WO-SSDs.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    with localcontext() as ctx:
        ctx.prec = _DECIMAL_PREC
        r_dram = device_reliability(models["dram"], mission_hours)
        r_ro = device_reliability(models["ro_ssd"], mission_hours)
        r_wo = device_reliability(models["wo_ssd"], mission_hours)
        a = Decimal(str(alpha))
        r_tica = a * _parallel(r_wo, r_dram) + (1 - a) * _parallel(r_wo, r_ro)
        r_mirrored = _parallel(r_wo, r_wo)
        return ReliabilityReport(
            alpha=alpha,
            mission_hours=mission_hours,
            r_dram=r_dram,
            r_ro_ssd=r_ro,
            r_wo_ssd=r_wo,
            r_tica=r_tica,
            r_mirrored=r_mirrored,
            u_tica=float(1 - r_tica),
            u_mirrored=float(1 - r_mirrored),
        )


def reliability_discrepancy(
    models: Optional[Mapping[str, DeviceModel]] = None, alpha: float = 0.8, mission_hours: float = HOURS_PER_YEAR
) -> Dict[str, Any]:
    """Computed unreliabilities under both exponents against the stated ones."""
    models = models or DEFAULT_CATALOG
    printed = reliability(models, alpha)
    mission = reliability(models, alpha, mission_hours)
    return {
        "alpha": alpha,
        "stated": dict(STATED_UNRELIABILITY),
        "printed_exponent": {"tica": printed.u_tica, "mirrored": printed.u_mirrored},
        "mission_time": {"hours": mission_hours, "tica": mission.u_tica, "mirrored": mission.u_mirrored},
        "note": (
            "the stated values are not reproduced by either exponent with the catalog MTTFs; "
            "they are reported, not enforced"
        ),
    }


def architecture_reliability(
    stats: RunStats, alpha: float, mission_hours: Optional[float] = None
) -> Tuple[float, float]:
    """(reliability, unreliability) of the run's own architecture."""
    if stats.architecture is Architecture.TICA:
        report = reliability({role: snap.model for role, snap in stats.devices.items()}, alpha, mission_hours)
        return float(report.r_tica), report.u_tica
    with localcontext() as ctx:
        ctx.prec = _DECIMAL_PREC
        members = [device_reliability(snap.model, mission_hours) for _, snap in _cache_devices(stats, (DeviceKind.SSD,))]
        r = _parallel(*members)
        return float(r), float(1 - r)


def mirrored_unreliability(stats: RunStats, mission_hours: Optional[float] = None) -> float:
    """Unreliability of two mirrored copies of the run's write-side SSD."""
    ssds = [snap.model for _, snap in _cache_devices(stats, (DeviceKind.SSD,))]
    model = stats.devices["wo_ssd"].model if "wo_ssd" in stats.devices else ssds[0]
    with localcontext() as ctx:
        ctx.prec = _DECIMAL_PREC
        r = device_reliability(model, mission_hours)
        return float((1 - r) * (1 - r))


def alpha_estimate(stats: RunStats) -> float:
    """Time-weighted share of dirty-page exposure whose second copy was DRAM."""
    total = stats.dram_exposure_us + stats.ro_exposure_us
    if total <= 0:
        return 1.0
    return stats.dram_exposure_us / total


def endurance_fraction(stats: RunStats) -> Dict[str, float]:
    out = {}
    for role, snap in _cache_devices(stats, (DeviceKind.SSD,)):
        rated = snap.model.endurance_writes_per_gb
        out[role] = snap.writes / (rated * snap.model.capacity_pages) if rated else 0.0
    return out


def lifetime_days(stats: RunStats) -> Dict[str, Optional[float]]:
    """Days until each SSD's rated endurance is used up at this run's write rate."""
    out: Dict[str, Optional[float]] = {}
    for role, consumed in endurance_fraction(stats).items():
        if consumed <= 0 or stats.total_sim_us <= 0:
            out[role] = None
        else:
            out[role] = stats.total_sim_us / consumed / (86_400 * 1e6)
    return out


def device_cost(models: Iterable[DeviceModel], page_size_bytes: int = 4096) -> float:
    return sum(
        capacity_gb(m, page_size_bytes) * m.cost_per_gb_usd
        for m in models
        if m.kind in (DeviceKind.DRAM, DeviceKind.SSD)
    )


def compare_architectures(models: Optional[Mapping[str, DeviceModel]] = None) -> Dict[str, Dict[str, float]]:
    """
    Critical-path latency of each cache operation, normalized to the RO-SSD
    read latency. Mirrored pairs write both members (max) and read from the
    faster one (min). TICA writes to WO-SSD and reads from RO-SSD.
    """
    models = models or DEFAULT_CATALOG
    ro, wo, hdd = models["ro_ssd"], models["wo_ssd"], models["hdd"]
    unit = ro.read_latency_us

    def pair(a: DeviceModel, b: DeviceModel) -> Dict[str, float]:
        read = min(a.read_latency_us, b.read_latency_us)
        write = max(a.write_latency_us, b.write_latency_us)
        return {
            "read_hit": read,
            "write": write,
            "read_miss_fill": hdd.read_latency_us + write,
            "write_back": read + hdd.write_latency_us,
        }

    table = {
        Architecture.RAID1_RO.value: pair(ro, ro),
        Architecture.RAID1_WO.value: pair(wo, wo),
        Architecture.RAID1_MIXED.value: pair(ro, wo),
        Architecture.TICA.value: {
            "read_hit": ro.read_latency_us,
            "write": wo.write_latency_us,
            # read misses are not copied to an SSD on the critical path
            "read_miss_fill": hdd.read_latency_us,
            "write_back": wo.read_latency_us + hdd.write_latency_us,
        },
    }
    return {arch: {op: value / unit for op, value in ops.items()} for arch, ops in table.items()}


def build_report(
    stats: RunStats,
    alpha: Optional[float] = None,
    mission_hours: Optional[float] = None,
    dram_idle_at_ro_power: bool = False,
) -> MetricReport:
    """Assemble every metric of one run. ``alpha`` defaults to the observed exposure ratio."""
    if alpha is None:
        alpha = alpha_estimate(stats) if stats.architecture is Architecture.TICA else 1.0
    r, u = architecture_reliability(stats, alpha, mission_hours)
    writes = ssd_writes(stats)
    hits = {"dram": stats.dram_hits, "ro_ssd": stats.ro_hits, "wo_ssd": stats.wo_hits, "ssd": stats.ssd_hits}
    return MetricReport(
        architecture=stats.architecture,
        policy=stats.policy,
        requests=stats.requests,
        user_reads=stats.user_reads,
        user_writes=stats.user_writes,
        hits=hits,
        hit_ratio=hit_ratio(stats),
        mean_latency_us=mean_latency(stats),
        total_sim_us=stats.total_sim_us,
        cwaf=cwaf(stats),
        energy_j=energy(stats, dram_idle_at_ro_power),
        ssd_writes=writes,
        ssd_writes_total=sum(writes.values()),
        alpha=alpha,
        reliability=r,
        unreliability=u,
        mirrored_unreliability=mirrored_unreliability(stats, mission_hours),
        endurance_fraction=endurance_fraction(stats),
        lifetime_days=lifetime_days(stats),
        cost_usd=device_cost((snap.model for snap in stats.devices.values()), stats.page_size_bytes),
        policy_switches=len(stats.policy_switches),
    )


def round_floats(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return value
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, list):
        return [round_floats(v, digits) for v in value]
    return value


def flatten(record: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Nested dicts to dotted keys, for CSV columns."""
    out: Dict[str, Any] = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, f"{name}."))
        else:
            out[name] = value
    return out


def render_report(
    report: MetricReport,
    format: ReportFormat = ReportFormat.JSON,
    config: Optional[Mapping[str, Any]] = None,
) -> str:
    """Serialize one report; identical inputs give byte-identical output."""
    body = round_floats(report.model_dump(mode="json"))
    if ReportFormat(format) is ReportFormat.CSV:
        return render_rows([body])
    document = {"report": body}
    if config is not None:
        document["config"] = dict(config)
        document["seed"] = config.get("seed")
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def render_rows(rows: Sequence[Mapping[str, Any]]) -> str:
    """CSV with one header line and one line per row; columns in first-seen order."""
    flat = [flatten(round_floats(dict(row))) for row in rows]
    columns: List[str] = []
    for row in flat:
        for key in row:
            if key not in columns:
                columns.append(key)
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in flat:
        writer.writerow(row)
    return buffer.getvalue()


NORMALIZED_METRICS = ("mean_latency_us", "energy_j", "ssd_writes_total")


def normalize_to(
    rows: List[Dict[str, Any]],
    reference: Architecture,
    group_by: Sequence[str] = (),
    metrics: Sequence[str] = NORMALIZED_METRICS,
) -> List[Dict[str, Any]]:
    """
    Add ``<metric>_normalized`` columns: each row divided by the row of the
    reference architecture that shares its ``group_by`` values.
    """
    reference = Architecture(reference)

    def key(row):
        return tuple(row.get(k) for k in group_by)

    baselines = {key(r): r for r in rows if r.get("architecture") == reference.value and not r.get("error")}
    for row in rows:
        base = baselines.get(key(row))
        for metric in metrics:
            value = row.get(metric)
            denominator = base.get(metric) if base else None
            row[f"{metric}_normalized"] = value / denominator if value is not None and denominator else None
    return rows
