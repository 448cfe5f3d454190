"""
TICA: a DRAM cache in front of a read-optimized and a write-optimized SSD.

Layout of the directory:

* DRAM is split into a read partition (LRU) and a write partition (FIFO).
  The write partition grows when it fills up and shrinks on read misses,
  never below ``def_write_cache_pages`` nor above ``dram - min_read_pages``.
* Every write lands in DRAM and WO-SSD together. A background flush later
  copies the page from DRAM to RO-SSD; once it completes the DRAM slot is
  released, so a dirty page always lives on two devices.
* Pages evicted from the DRAM read partition enter the ghost queue (EQ). Under
  the WED policy they are also copied to WO-SSD.
"""

import logging
import math
from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Deque, Dict, Iterable, List, Optional, Set, Tuple

from .adaptive import AccessEvent, AdaptivePolicy
from .devices import DeviceState
from .engine import CacheEngine, Eviction, RequestResult
from .exceptions import ConfigError, InvariantViolation
from .models import (
    Architecture,
    CacheDevice,
    ClockMode,
    DeviceModel,
    EvictionTarget,
    Level,
    Op,
    PolicyMode,
    PolicyName,
    RecoverabilityReport,
    ServedBy,
    ThresholdConfig,
)

logger = logging.getLogger(__name__)

# Write partition sizes are compared with this slack to absorb float noise
_SLACK = 1e-9


@dataclass(slots=True)
class DramPartition:
    """Sizes of the two DRAM partitions, in pages."""
    dram_pages: int
    def_write_cache_pages: int
    min_read_pages: int
    write_cache_pages: float = 0.0

    def __post_init__(self):
        if self.def_write_cache_pages > self.cap:
            raise ConfigError(
                f"default write cache ({self.def_write_cache_pages} pages) exceeds "
                f"DRAM ({self.dram_pages}) minus the minimum read cache ({self.min_read_pages})"
            )
        if self.write_cache_pages <= 0:
            self.write_cache_pages = float(self.def_write_cache_pages)

    @classmethod
    def for_dram(cls, dram_pages: int, def_write_fraction: float = 0.2, min_read_fraction: float = 0.1) -> "DramPartition":
        if dram_pages < 2:
            raise ConfigError(f"DRAM needs at least 2 usable pages, got {dram_pages}")
        return cls(
            dram_pages=dram_pages,
            def_write_cache_pages=max(1, round(def_write_fraction * dram_pages)),
            min_read_pages=max(1, math.ceil(min_read_fraction * dram_pages - _SLACK)),
        )

    @property
    def cap(self) -> int:
        return self.dram_pages - self.min_read_pages

    @property
    def write_slots(self) -> int:
        return math.ceil(self.write_cache_pages - _SLACK)

    @property
    def read_cache_pages(self) -> int:
        return self.dram_pages - self.write_slots


def grow_write_cache(part: DramPartition) -> float:
    """
    Grow by a halving step: from w default units to ``w + 2^-(w-1)`` units,
    clamped at the cap. Returns the new size.
    """
    w = part.write_cache_pages / part.def_write_cache_pages
    grown = (w + 2.0 ** -(w - 1)) * part.def_write_cache_pages
    part.write_cache_pages = min(grown, float(part.cap))
    return part.write_cache_pages


def shrink_write_cache(part: DramPartition) -> float:
    """Shrink from w units to ``max(1, w - 2^(w-1))`` units. Returns the new size."""
    w = part.write_cache_pages / part.def_write_cache_pages
    part.write_cache_pages = max(1.0, w - 2.0 ** (w - 1)) * part.def_write_cache_pages
    return part.write_cache_pages


def _discard(directory: "OrderedDict[int, None]", page: int) -> bool:
    if page in directory:
        del directory[page]
        return True
    return False


@dataclass(slots=True)
class FlushEntry:
    page: int
    seq: int
    issued_us: float
    completion_us: float


class TicaCache(CacheEngine):
    """The three-level TICA cache running a fixed or adaptive eviction policy."""

    architecture = Architecture.TICA

    def __init__(
        self,
        dram: DeviceModel,
        ro_ssd: DeviceModel,
        wo_ssd: DeviceModel,
        hdd: DeviceModel,
        policy: PolicyName = PolicyName.ADAPTIVE,
        page_size: int = 4096,
        clock: ClockMode = ClockMode.CLOSED,
        internal_reserve_pages: int = 4,
        def_write_fraction: float = 0.2,
        min_read_fraction: float = 0.1,
        eq_pages: Optional[int] = None,
        thresholds: Optional[ThresholdConfig] = None,
        record_events: bool = False,
        record_evictions: bool = False,
        track_changes: bool = False,
    ):
        super().__init__(
            hdd, page_size=page_size, clock=clock, policy=policy,
            record_events=record_events, record_evictions=record_evictions, track_changes=track_changes,
        )
        self.dram = self._new_device(dram)
        self.ro = self._new_device(ro_ssd)
        self.wo = self._new_device(wo_ssd)

        self.partition = DramPartition.for_dram(
            dram.capacity_pages - internal_reserve_pages, def_write_fraction, min_read_fraction
        )
        self.ro_capacity = ro_ssd.capacity_pages - internal_reserve_pages
        self.wo_capacity = wo_ssd.capacity_pages - internal_reserve_pages
        if self.ro_capacity < 1 or self.wo_capacity < 1:
            raise ConfigError(
                f"SSDs need at least one usable page beyond the {internal_reserve_pages}-page reserve"
            )
        self.eq_pages = eq_pages

        self.dram_read: "OrderedDict[int, None]" = self._directory()
        # page -> sequence number of its latest flush; insertion order is FIFO order
        self.dram_write: "OrderedDict[int, int]" = self._directory()
        self.rossd: "OrderedDict[int, None]" = self._directory()
        self.wossd: "OrderedDict[int, None]" = self._directory()
        self.eq: "OrderedDict[int, None]" = OrderedDict()
        self.dirty: Set[int] = self._page_set()
        self.flush_queue: Deque[FlushEntry] = deque()
        self._flush_seq = 0

        # page -> (level, since) for every dirty page
        self._exposure: Dict[int, Tuple[CacheDevice, float]] = {}
        self.dram_exposure_us = 0.0
        self.ro_exposure_us = 0.0

        self.flushes_completed = 0
        self.wed_copies = 0
        self.eq_hits = 0

        self.adaptive: Optional[AdaptivePolicy] = None
        if self.policy_name is PolicyName.ADAPTIVE:
            self.adaptive = AdaptivePolicy(2 * self.partition.dram_pages, thresholds)
            self.mode = PolicyMode.EF
        else:
            self.mode = PolicyMode(self.policy_name.value)

        logger.debug(
            f"TICA cache: dram={self.partition.dram_pages} ro={self.ro_capacity} "
            f"wo={self.wo_capacity} def_write={self.partition.def_write_cache_pages} policy={self.policy_name.value}"
        )

    @property
    def devices(self) -> Dict[str, DeviceState]:
        return {"dram": self.dram, "ro_ssd": self.ro, "wo_ssd": self.wo, "hdd": self.hdd}

    @property
    def eq_capacity(self) -> int:
        return self.eq_pages or self.partition.read_cache_pages

    def read_capacity(self) -> int:
        """Pages the read partition may hold right now."""
        return self.partition.dram_pages - max(self.partition.write_slots, len(self.dram_write))

    def lookup(self, page: int) -> Level:
        if page in self.dram_read or page in self.dram_write:
            return Level.DRAM
        if page in self.rossd:
            return Level.RO_SSD
        if page in self.wossd:
            return Level.WO_SSD
        return Level.MISS

    def access(self, page: int, op: Op, clock: float) -> RequestResult:
        self.flush_tick(clock)
        if self.adaptive is not None:
            level = self.lookup(page)
            event = AccessEvent(
                is_read=op is Op.READ,
                hit_dram=level is Level.DRAM,
                hit_eq=page in self.eq,
                hit_cache=level is not Level.MISS,
            )
            self.mode = self.adaptive.observe(event).mode
        if op is Op.WRITE:
            return self.handle_write(page, clock)
        return self.handle_read(page, clock)

    # Write path

    def handle_write(self, page: int, clock: float) -> RequestResult:
        evictions: List[Eviction] = []
        now = clock
        self._invalidate(page)

        if page not in self.dram_write and len(self.dram_write) >= self.partition.write_slots:
            if self.partition.write_cache_pages < self.partition.cap - _SLACK:
                grow_write_cache(self.partition)
                self._fit_read_partition(now, evictions)
            while len(self.dram_write) >= self.partition.write_slots:
                now = self._wait_for_flush(now)

        if page not in self.wossd and len(self.wossd) >= self.wo_capacity:
            now = self.free_wo_ssd(now, evictions)

        dram_done = self.dram.access(Op.WRITE, 1, now)
        wo_done = self.wo.access(Op.WRITE, 1, now)
        completion = max(dram_done, wo_done)

        self._flush_seq += 1
        self.dram_write[page] = self._flush_seq
        self.wossd[page] = None
        self.wossd.move_to_end(page)
        self.dirty.add(page)
        self._expose(page, CacheDevice.DRAM, completion)

        ro_done = self.ro.access(Op.WRITE, 1, completion)
        self.flush_queue.append(FlushEntry(page, self._flush_seq, completion, ro_done))

        return RequestResult(page, Op.WRITE, completion - clock, ServedBy.WRITE_BUFFERED, completion, evictions)

    def _invalidate(self, page: int) -> None:
        """Drop stale copies before a new version of the page is written."""
        self.dram_read.pop(page, None)
        if _discard(self.rossd, page):
            self.ro.trim()
        if _discard(self.wossd, page):
            self.wo.trim()

    def _wait_for_flush(self, now: float) -> float:
        head = self.flush_queue[0]
        now = max(now, head.completion_us)
        self.flush_tick(now)
        return now

    def _fit_read_partition(self, now: float, evictions: List[Eviction]) -> None:
        while len(self.dram_read) > self.read_capacity():
            self._evict_read_tail(now, evictions)

    def _evict_read_tail(self, now: float, evictions: List[Eviction]) -> None:
        page, _ = self.dram_read.popitem(last=False)
        self.eq[page] = None
        self.eq.move_to_end(page)
        while len(self.eq) > self.eq_capacity:
            self.eq.popitem(last=False)

        if self.mode is PolicyMode.WED and page not in self.wossd and page not in self.rossd:
            # background copy, not part of any request latency
            if len(self.wossd) >= self.wo_capacity:
                self.free_wo_ssd(now, evictions)
            self.wo.access(Op.WRITE, 1, now)
            self.wossd[page] = None
            self.wed_copies += 1
            self._evicted(evictions, page, EvictionTarget.WO_SSD)
        else:
            self._evicted(evictions, page, EvictionTarget.EQ)

    # Read path

    def handle_read(self, page: int, clock: float) -> RequestResult:
        evictions: List[Eviction] = []
        level = self.lookup(page)

        if level is Level.DRAM:
            done = self.dram.access(Op.READ, 1, clock)
            if page in self.dram_read:
                self.dram_read.move_to_end(page)
            return RequestResult(page, Op.READ, done - clock, ServedBy.DRAM_HIT, done)

        if page in self.eq:
            self.eq_hits += 1

        if level is Level.RO_SSD:
            done = self.ro.access(Op.READ, 1, clock)
            self.rossd.move_to_end(page)
            if page in self.wossd:
                self.wossd.move_to_end(page)
            return RequestResult(page, Op.READ, done - clock, ServedBy.RO_SSD_HIT, done)

        if level is Level.WO_SSD:
            done = self.wo.access(Op.READ, 1, clock)
            self.wossd.move_to_end(page)
            return RequestResult(page, Op.READ, done - clock, ServedBy.WO_SSD_HIT, done)

        hdd_done = self.hdd.access(Op.READ, 1, clock)
        if len(self.dram_read) >= self.read_capacity():
            if self.partition.write_cache_pages > self.partition.def_write_cache_pages + _SLACK:
                shrink_write_cache(self.partition)
            while len(self.dram_read) >= self.read_capacity():
                head = self.flush_queue[0] if self.flush_queue else None
                if (
                    head is not None
                    and len(self.dram_write) > self.partition.write_slots
                    and head.completion_us <= hdd_done
                ):
                    self.flush_tick(head.completion_us)
                else:
                    self._evict_read_tail(clock, evictions)

        # the fill is counted on DRAM but overlaps with the reply
        self.dram.access(Op.WRITE, 1, hdd_done)
        self.dram_read[page] = None
        self.eq.pop(page, None)
        return RequestResult(page, Op.READ, hdd_done - clock, ServedBy.HDD_MISS, hdd_done, evictions)

    # Flushing and SSD space management

    def flush_tick(self, now: float) -> int:
        """Complete every flush finished by ``now``; returns how many completed."""
        completed = 0
        while self.flush_queue and self.flush_queue[0].completion_us <= now:
            self._complete_flush(self.flush_queue.popleft())
            completed += 1
        return completed

    def _complete_flush(self, entry: FlushEntry) -> None:
        self.flushes_completed += 1
        if self.dram_write.get(entry.page) != entry.seq:
            # superseded by a later write of the same page
            return
        del self.dram_write[entry.page]
        t = entry.completion_us
        if entry.page not in self.rossd:
            if len(self.rossd) >= self.ro_capacity:
                self.free_ro_ssd(t)
            self.rossd[entry.page] = None
        if entry.page in self.dirty:
            self._expose(entry.page, CacheDevice.RO_SSD, t)

    def free_wo_ssd(self, now: float, evictions: Optional[List[Eviction]] = None) -> float:
        """Evict the WO-SSD LRU page and its RO-SSD twin; returns when the slot is free."""
        victim, _ = self.wossd.popitem(last=False)
        target = EvictionTarget.DISCARD
        if victim in self.dirty:
            now = self._write_back(victim, self.wo, now)
            target = EvictionTarget.HDD
        self.wo.trim()
        if _discard(self.rossd, victim):
            self.ro.trim()
        self.ssd_evictions += 1
        self._evicted(evictions, victim, target)
        return now

    def free_ro_ssd(self, now: float, evictions: Optional[List[Eviction]] = None) -> float:
        """Evict the RO-SSD LRU page and its WO-SSD twin; returns when the slot is free."""
        victim, _ = self.rossd.popitem(last=False)
        target = EvictionTarget.DISCARD
        if victim in self.dirty:
            now = self._write_back(victim, self.ro, now)
            target = EvictionTarget.HDD
        self.ro.trim()
        if _discard(self.wossd, victim):
            self.wo.trim()
        self.ssd_evictions += 1
        self._evicted(evictions, victim, target)
        return now

    def _write_back(self, page: int, source: DeviceState, now: float) -> float:
        read_done = source.access(Op.READ, 1, now)
        done = self.hdd.access(Op.WRITE, 1, read_done)
        self.dirty.discard(page)
        self._close_exposure(page, done)
        self.writebacks += 1
        return done

    # Exposure (alpha) accounting

    def _expose(self, page: int, level: CacheDevice, since: float) -> None:
        self._close_exposure(page, since)
        self._exposure[page] = (level, since)

    def _close_exposure(self, page: int, until: float) -> None:
        current = self._exposure.pop(page, None)
        if current is None:
            return
        level, since = current
        start = max(since, self.origin)
        span = max(0.0, until - start)
        if level is CacheDevice.DRAM:
            self.dram_exposure_us += span
        else:
            self.ro_exposure_us += span

    def alpha(self) -> float:
        total = self.dram_exposure_us + self.ro_exposure_us
        return self.dram_exposure_us / total if total > 0 else 1.0

    # Lifecycle

    def begin_measurement(self) -> None:
        super().begin_measurement()
        self.dram_exposure_us = self.ro_exposure_us = 0.0
        self.flushes_completed = 0
        self.wed_copies = 0
        self.eq_hits = 0
        if self.adaptive is not None:
            self.adaptive.switches.clear()

    def drain(self) -> None:
        while self.flush_queue:
            self._complete_flush(self.flush_queue.popleft())
        end = self.end_time()
        for page in list(self._exposure):
            self._close_exposure(page, end)

    def extra_stats(self) -> dict:
        return {
            "dram_exposure_us": self.dram_exposure_us,
            "ro_exposure_us": self.ro_exposure_us,
            "alpha_observed": self.alpha(),
            "flushes_completed": self.flushes_completed,
            "wed_copies": self.wed_copies,
            "eq_hits": self.eq_hits,
            "policy_switches": list(self.adaptive.switches) if self.adaptive else [],
        }

    # Failure injection and auditing

    def copies_of(self, page: int) -> Set[CacheDevice]:
        copies = set()
        if page in self.dram_write:
            copies.add(CacheDevice.DRAM)
        if page in self.rossd:
            copies.add(CacheDevice.RO_SSD)
        if page in self.wossd:
            copies.add(CacheDevice.WO_SSD)
        return copies

    def fail_device(self, failed: Iterable[CacheDevice], pages: Optional[Iterable[int]] = None) -> RecoverabilityReport:
        """
        Which dirty pages would be lost if ``failed`` devices died now.

        ``pages`` restricts the scan to the given pages; by default every dirty
        page is examined.
        """
        failed = [CacheDevice(d) for d in failed]
        candidates = self.dirty if pages is None else [p for p in pages if p in self.dirty]
        lost = sorted(page for page in candidates if not (self.copies_of(page) - set(failed)))
        return RecoverabilityReport(failed=failed, dirty_pages=len(self.dirty), unrecoverable=lost)

    def check_invariants(self, event_index: Optional[int] = None, pages: Optional[Iterable[int]] = None) -> None:
        """
        Raise InvariantViolation on the first broken directory invariant.

        Per-page invariants are checked for ``pages`` only when given (the pages
        whose membership changed since the previous check), otherwise for every
        cached or dirty page.
        """
        part = self.partition
        if not part.def_write_cache_pages - _SLACK <= part.write_cache_pages <= part.cap + _SLACK:
            raise InvariantViolation(
                "write-cache-bounds", f"write cache {part.write_cache_pages} outside "
                f"[{part.def_write_cache_pages}, {part.cap}]", event_index=event_index,
            )
        if len(self.dram_read) + len(self.dram_write) > part.dram_pages:
            raise InvariantViolation(
                "dram-occupancy", f"{len(self.dram_read)} read + {len(self.dram_write)} write pages "
                f"exceed {part.dram_pages}", event_index=event_index,
            )
        if len(self.rossd) > self.ro_capacity or len(self.wossd) > self.wo_capacity:
            raise InvariantViolation(
                "ssd-occupancy", f"RO {len(self.rossd)}/{self.ro_capacity}, WO {len(self.wossd)}/{self.wo_capacity}",
                event_index=event_index,
            )
        if pages is None:
            pages = self.dram_read.keys() | self.dram_write.keys() | self.dirty
        for page in sorted(pages):
            in_read = page in self.dram_read
            if in_read and page in self.dram_write:
                raise InvariantViolation("dram-exclusive", "page in both DRAM partitions", page=page, event_index=event_index)
            if page not in self.dirty:
                continue
            if in_read:
                raise InvariantViolation("clean-read-partition", "dirty page in read partition", page=page, event_index=event_index)
            copies = self.copies_of(page)
            if len(copies) < 2:
                raise InvariantViolation(
                    "dirty-redundancy",
                    f"dirty page held by {sorted(c.value for c in copies) or 'no device'}",
                    page=page, event_index=event_index,
                )
