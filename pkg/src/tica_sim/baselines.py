"""
Reference architectures replayed through the same engine contract as TICA.

* ``mirrored_wb``: DRAM front with one LRU, write-back cache on a mirrored SSD
  pair. Read misses are filled into DRAM and into both SSDs.
* ``single_ssd``: one LRU write-back SSD, no DRAM, no redundancy.
* ``raid1_ro`` / ``raid1_wo`` / ``raid1_mixed``: a mirrored SSD pair without DRAM.

Mirrored members share one directory, so they always hold the same pages and
receive the same writes. Reads go to the faster member.
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterable, List, Optional, Set

from .devices import DeviceState
from .engine import CacheEngine, Eviction, RequestResult
from .exceptions import ConfigError, InvariantViolation
from .models import (
    Architecture,
    BaselineConfig,
    ClockMode,
    EvictionTarget,
    Op,
    PolicyName,
    Request,
    RunStats,
    ServedBy,
)

logger = logging.getLogger(__name__)

MEMBER_ROLES = ("ssd_a", "ssd_b")


class MirroredCache(CacheEngine):
    """Generic DRAM + mirrored write-back SSD cache and its DRAM-less variants."""

    def __init__(
        self,
        config: BaselineConfig,
        page_size: int = 4096,
        clock: ClockMode = ClockMode.CLOSED,
        record_events: bool = False,
        record_evictions: bool = False,
        track_changes: bool = False,
    ):
        super().__init__(
            config.hdd, page_size=page_size, clock=clock, policy=PolicyName.EF,
            record_events=record_events, record_evictions=record_evictions, track_changes=track_changes,
        )
        self.architecture = config.kind
        reserve = config.internal_reserve_pages

        self.members: List[DeviceState] = [self._new_device(m) for m in config.members]
        self.ssd_capacity = min(m.capacity_pages for m in config.members) - reserve
        if self.ssd_capacity < 1:
            raise ConfigError(f"SSDs need at least one usable page beyond the {reserve}-page reserve")
        # reads are served by the member with the lower read latency
        self.reader = min(self.members, key=lambda d: d.model.read_latency_us)

        self.dram: Optional[DeviceState] = None
        self.dram_capacity = 0
        if config.dram is not None:
            self.dram = self._new_device(config.dram)
            self.dram_capacity = config.dram.capacity_pages - reserve
            if self.dram_capacity < 1:
                raise ConfigError(f"DRAM needs at least one usable page beyond the {reserve}-page reserve")

        self.dram_lru: "OrderedDict[int, None]" = OrderedDict()
        self.ssd_lru: "OrderedDict[int, None]" = self._directory()
        self.dirty: Set[int] = self._page_set()
        self.ssd_fills = 0

    @property
    def devices(self) -> Dict[str, DeviceState]:
        devices = {}
        if self.dram is not None:
            devices["dram"] = self.dram
        for role, member in zip(MEMBER_ROLES, self.members):
            devices[role] = member
        devices["hdd"] = self.hdd
        return devices

    def access(self, page: int, op: Op, clock: float) -> RequestResult:
        if op is Op.WRITE:
            return self.handle_write(page, clock)
        return self.handle_read(page, clock)

    def handle_write(self, page: int, clock: float) -> RequestResult:
        evictions: List[Eviction] = []
        now = clock
        if page not in self.ssd_lru and len(self.ssd_lru) >= self.ssd_capacity:
            now = self._evict_ssd(now, evictions)
        done = [member.access(Op.WRITE, 1, now) for member in self.members]
        if self.dram is not None:
            self._fill_dram(page, now)
            done.append(self.dram.last_release_us)
        self.ssd_lru[page] = None
        self.ssd_lru.move_to_end(page)
        self.dirty.add(page)
        completion = max(done)
        return RequestResult(page, Op.WRITE, completion - clock, ServedBy.WRITE_BUFFERED, completion, evictions)

    def handle_read(self, page: int, clock: float) -> RequestResult:
        if page in self.dram_lru:
            done = self.dram.access(Op.READ, 1, clock)
            self.dram_lru.move_to_end(page)
            return RequestResult(page, Op.READ, done - clock, ServedBy.DRAM_HIT, done)

        if page in self.ssd_lru:
            done = self.reader.access(Op.READ, 1, clock)
            self.ssd_lru.move_to_end(page)
            if self.dram is not None:
                self._fill_dram(page, done)
            return RequestResult(page, Op.READ, done - clock, ServedBy.SSD_HIT, done)

        evictions: List[Eviction] = []
        done = self.hdd.access(Op.READ, 1, clock)
        # background fills; the reply does not wait for them
        if self.dram is not None:
            self._fill_dram(page, done)
        if len(self.ssd_lru) >= self.ssd_capacity:
            self._evict_ssd(done, evictions)
        for member in self.members:
            member.access(Op.WRITE, 1, done)
        self.ssd_lru[page] = None
        self.ssd_fills += 1
        return RequestResult(page, Op.READ, done - clock, ServedBy.HDD_MISS, done, evictions)

    def _fill_dram(self, page: int, now: float) -> None:
        if page not in self.dram_lru and len(self.dram_lru) >= self.dram_capacity:
            self.dram_lru.popitem(last=False)
        self.dram.access(Op.WRITE, 1, now)
        self.dram_lru[page] = None
        self.dram_lru.move_to_end(page)

    def _evict_ssd(self, now: float, evictions: List[Eviction]) -> float:
        victim, _ = self.ssd_lru.popitem(last=False)
        target = EvictionTarget.DISCARD
        if victim in self.dirty:
            read_done = self.reader.access(Op.READ, 1, now)
            now = self.hdd.access(Op.WRITE, 1, read_done)
            self.dirty.discard(victim)
            self.writebacks += 1
            target = EvictionTarget.HDD
        for member in self.members:
            member.trim()
        self.ssd_evictions += 1
        self._evicted(evictions, victim, target)
        return now

    def check_invariants(self, event_index: Optional[int] = None, pages: Optional[Iterable[int]] = None) -> None:
        if len(self.ssd_lru) > self.ssd_capacity:
            raise InvariantViolation("ssd-occupancy", f"{len(self.ssd_lru)} > {self.ssd_capacity}", event_index=event_index)
        if self.dram is not None and len(self.dram_lru) > self.dram_capacity:
            raise InvariantViolation("dram-occupancy", f"{len(self.dram_lru)} > {self.dram_capacity}", event_index=event_index)
        if len({m.writes for m in self.members}) > 1:
            raise InvariantViolation(
                "mirror-writes", f"member write counts differ: {[m.writes for m in self.members]}",
                event_index=event_index,
            )
        for page in sorted(self.dirty if pages is None else pages):
            if page in self.dirty and page not in self.ssd_lru:
                raise InvariantViolation("dirty-in-ssd", "dirty page not cached on the SSDs", page=page, event_index=event_index)


def run_baseline(
    config: BaselineConfig,
    trace: Iterable[Request],
    page_size: int = 4096,
    clock: ClockMode = ClockMode.CLOSED,
    warmup_requests: int = 0,
) -> RunStats:
    engine = MirroredCache(config, page_size=page_size, clock=clock)
    stats = engine.run(trace, warmup_requests=warmup_requests)
    logger.info(
        f"{config.kind.value}: {stats.requests} requests, "
        f"{stats.cache_hits}/{stats.user_reads} read hits, {engine.ssd_fills} SSD fills"
    )
    return stats
