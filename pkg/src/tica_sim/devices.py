"""
Parameterized storage device models.

Each device is a single serial channel: an access starts when both the caller
and the device are ready and occupies the device for ``pages * latency``.
Busy time, access counters and TRIMs are accumulated for the energy,
endurance and CWAF analytics.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .exceptions import ConfigError, AccountingError
from .models import DeviceKind, DeviceModel, DeviceOverride, DeviceSnapshot, Op

logger = logging.getLogger(__name__)

GIB = 1024 ** 3
US_PER_DAY = 86_400 * 1_000_000

# MTTF, $/GB, Writes/GB and power columns are datasheet figures for the device classes.
# Latencies are illustrative: they keep RO read <= WO read, WO write << RO write
# and HDD >> SSD, which is all the cache design relies on.
DEFAULT_CATALOG: Dict[str, DeviceModel] = {
    "dram": DeviceModel(
        name="DRAM", kind=DeviceKind.DRAM,
        read_latency_us=1.0, write_latency_us=1.0,
        read_power_w=4.0, write_power_w=4.0, idle_power_w=4.0,
        mttf_hours=4_000_000, cost_per_gb_usd=7.875, endurance_writes_per_gb=None,
    ),
    "ro_ssd": DeviceModel(
        name="RO-SSD", kind=DeviceKind.SSD,
        read_latency_us=90.0, write_latency_us=900.0,
        read_power_w=3.3, write_power_w=3.4, idle_power_w=0.07,
        mttf_hours=2_000_000, cost_per_gb_usd=0.74, endurance_writes_per_gb=1171,
    ),
    "wo_ssd": DeviceModel(
        name="WO-SSD", kind=DeviceKind.SSD,
        read_latency_us=110.0, write_latency_us=90.0,
        read_power_w=2.4, write_power_w=3.1, idle_power_w=1.3,
        mttf_hours=2_000_000, cost_per_gb_usd=0.842, endurance_writes_per_gb=6416,
    ),
    "c_ssd": DeviceModel(
        name="C-SSD", kind=DeviceKind.SSD,
        read_latency_us=120.0, write_latency_us=600.0,
        read_power_w=3.3, write_power_w=3.4, idle_power_w=0.07,
        mttf_hours=1_500_000, cost_per_gb_usd=0.375, endurance_writes_per_gb=750,
    ),
    # Not part of any energy or cost sum; power and cost are placeholders.
    "hdd": DeviceModel(
        name="HDD", kind=DeviceKind.HDD, capacity_pages=2 ** 40,
        read_latency_us=5000.0, write_latency_us=5000.0,
        read_power_w=0.0, write_power_w=0.0, idle_power_w=0.0,
        mttf_hours=1_200_000, cost_per_gb_usd=0.0, endurance_writes_per_gb=None,
    ),
}


def build_catalog(overrides: Optional[Dict[str, DeviceOverride]] = None) -> Dict[str, DeviceModel]:
    """Return the default catalog with per-role overrides applied."""
    catalog = dict(DEFAULT_CATALOG)
    for role, override in (overrides or {}).items():
        if role not in catalog:
            raise ConfigError(f"unknown device role '{role}'")
        update = override.model_dump(exclude_none=True)
        try:
            catalog[role] = DeviceModel.model_validate({**catalog[role].model_dump(), **update})
        except ValueError as e:
            raise ConfigError(f"invalid device override for '{role}': {e}") from e
    return catalog


def with_capacity(model: DeviceModel, capacity_pages: int) -> DeviceModel:
    if capacity_pages < 1:
        raise ConfigError(f"{model.name}: capacity must be at least one page, got {capacity_pages}")
    return model.model_copy(update={"capacity_pages": capacity_pages})


def capacity_gb(model: DeviceModel, page_size_bytes: int) -> float:
    return model.capacity_pages * page_size_bytes / GIB


@dataclass(slots=True)
class DeviceState:
    """Running counters of one device on the simulation timeline."""
    model: DeviceModel
    reads: int = 0
    writes: int = 0
    busy_us: float = 0.0
    last_release_us: float = 0.0
    trims: int = 0
    # (op, pages, service_us) per access when recording is enabled
    events: Optional[List[Tuple[Op, int, float]]] = field(default=None)

    def access(self, op: Op, pages: int, start_us: float) -> float:
        """Serve ``pages`` pages starting no earlier than ``start_us``; return the completion time."""
        if pages < 1:
            raise AccountingError(f"{self.model.name}: access of {pages} pages")
        if op is Op.READ:
            service = pages * self.model.read_latency_us
            self.reads += pages
        else:
            service = pages * self.model.write_latency_us
            self.writes += pages
        begin = start_us if start_us > self.last_release_us else self.last_release_us
        self.last_release_us = begin + service
        self.busy_us += service
        if self.events is not None:
            self.events.append((op, pages, service))
        return self.last_release_us

    def trim(self, pages: int = 1) -> None:
        self.trims += pages

    def idle_time(self, total_sim_us: float) -> float:
        if total_sim_us < self.busy_us:
            raise AccountingError(
                f"{self.model.name}: busy {self.busy_us} us exceeds simulated time {total_sim_us} us"
            )
        return total_sim_us - self.busy_us

    def endurance_consumed(self, page_size_bytes: int) -> float:
        """Fraction of the rated write endurance used so far; may exceed 1."""
        rated = self.model.endurance_writes_per_gb
        if rated is None:
            return 0.0
        # (writes * page / GiB) / (rated * capacity_pages * page / GiB)
        return self.writes / (rated * self.model.capacity_pages)

    def lifetime_days(self, page_size_bytes: int, sim_us: float) -> Optional[float]:
        """Days until rated endurance is exhausted at this run's write rate."""
        consumed = self.endurance_consumed(page_size_bytes)
        if self.model.endurance_writes_per_gb is None or consumed <= 0 or sim_us <= 0:
            return None
        return sim_us / consumed / US_PER_DAY

    def reset_counters(self) -> None:
        """Zero the counters while keeping the device timeline (warm-up boundary)."""
        self.reads = 0
        self.writes = 0
        self.busy_us = 0.0
        self.trims = 0
        if self.events is not None:
            self.events.clear()

    def snapshot(self) -> DeviceSnapshot:
        return DeviceSnapshot(
            model=self.model,
            reads=self.reads,
            writes=self.writes,
            busy_us=self.busy_us,
            last_release_us=self.last_release_us,
            trims=self.trims,
        )
