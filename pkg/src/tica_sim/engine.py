"""
Common replay loop for every cache architecture.

An engine takes one Request at a time, decomposes it into page operations and
hands each to ``access``. In closed-loop mode the next page operation issues
when the previous one completes; in open-loop mode every request issues at its
trace arrival time and queues behind busy devices.
"""

import logging
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Set

from .devices import DeviceState
from .models import (
    Architecture,
    ClockMode,
    DeviceModel,
    EvictionTarget,
    Op,
    PolicyName,
    Request,
    RunStats,
    ServedBy,
)

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class Eviction:
    page: int
    target: EvictionTarget


@dataclass(slots=True)
class RequestResult:
    page: int
    op: Op
    latency_us: float
    served_by: ServedBy
    completion_us: float
    evictions: List[Eviction] = field(default_factory=list)


class TrackedDict(OrderedDict):
    """OrderedDict that notes every key whose membership may have changed."""

    def __init__(self, touched: Set[int]):
        super().__init__()
        self.touched = touched

    def __setitem__(self, key, value):
        self.touched.add(key)
        super().__setitem__(key, value)

    def __delitem__(self, key):
        self.touched.add(key)
        super().__delitem__(key)

    def pop(self, key, *default):
        self.touched.add(key)
        return super().pop(key, *default)

    def popitem(self, last: bool = True):
        key, value = super().popitem(last=last)
        self.touched.add(key)
        return key, value


class TrackedSet(set):
    """Set counterpart of TrackedDict."""

    def __init__(self, touched: Set[int]):
        super().__init__()
        self.touched = touched

    def add(self, item):
        self.touched.add(item)
        super().add(item)

    def discard(self, item):
        self.touched.add(item)
        super().discard(item)

    def remove(self, item):
        self.touched.add(item)
        super().remove(item)


class CacheEngine(ABC):
    """Replay loop, clock and hit accounting shared by TICA and the baselines."""

    architecture: Architecture = Architecture.TICA

    def __init__(
        self,
        hdd: DeviceModel,
        page_size: int = 4096,
        clock: ClockMode = ClockMode.CLOSED,
        policy: PolicyName = PolicyName.EF,
        record_events: bool = False,
        record_evictions: bool = False,
        track_changes: bool = False,
    ):
        self.page_size = page_size
        self.clock_mode = ClockMode(clock)
        self.policy_name = PolicyName(policy)
        self.record_events = record_events
        self.hdd = self._new_device(hdd)
        # every eviction of the run, in order, including background ones
        self.eviction_log: Optional[List[Eviction]] = [] if record_evictions else None
        # pages whose directory membership changed since the last take_touched()
        self.touched: Optional[Set[int]] = set() if track_changes else None

        self.now = 0.0
        self.horizon = 0.0
        self.origin = 0.0
        self.page_ops = 0
        self.requests = 0
        self.finished = False
        # called after every page operation with (engine, page_op_index)
        self.checker: Optional[Callable[["CacheEngine", int], None]] = None

        self.dram_hits = 0
        self.ro_hits = 0
        self.wo_hits = 0
        self.ssd_hits = 0
        self.hdd_reads = 0
        self.user_reads = 0
        self.user_writes = 0
        self.latency_sum_us = 0.0
        self.latency_count = 0
        self.writebacks = 0
        self.ssd_evictions = 0

    def _new_device(self, model: DeviceModel) -> DeviceState:
        return DeviceState(model, events=[] if self.record_events else None)

    def _directory(self) -> "OrderedDict[int, None]":
        return OrderedDict() if self.touched is None else TrackedDict(self.touched)

    def _page_set(self) -> Set[int]:
        return set() if self.touched is None else TrackedSet(self.touched)

    def take_touched(self) -> Optional[Set[int]]:
        """Pages changed since the previous call, or None when changes are not tracked."""
        if self.touched is None:
            return None
        pages = set(self.touched)
        self.touched.clear()
        return pages

    def _evicted(self, evictions: Optional[List[Eviction]], page: int, target: EvictionTarget) -> None:
        eviction = Eviction(page, target)
        if evictions is not None:
            evictions.append(eviction)
        if self.eviction_log is not None:
            self.eviction_log.append(eviction)

    @property
    @abstractmethod
    def devices(self) -> Dict[str, DeviceState]:
        """All devices of the architecture keyed by role, HDD included."""

    @abstractmethod
    def access(self, page: int, op: Op, clock: float) -> RequestResult:
        """Serve one page operation issued at ``clock``."""

    def drain(self) -> None:
        """Complete outstanding background work before the run is closed."""

    def submit(self, request: Request) -> List[RequestResult]:
        """Step API: one Request in, one RequestResult per page out."""
        if self.clock_mode is ClockMode.OPEN:
            issue = max(self.now, float(request.arrival_us))
        else:
            issue = self.now

        results = []
        for page in range(request.lba, request.lba + request.pages):
            result = self.access(page, request.op, issue)
            self._record(result)
            self.page_ops += 1
            if self.checker is not None:
                self.checker(self, self.page_ops)
            if self.clock_mode is ClockMode.CLOSED:
                issue = result.completion_us
            results.append(result)

        self.now = issue
        self.requests += 1
        return results

    def _record(self, result: RequestResult) -> None:
        if result.completion_us > self.horizon:
            self.horizon = result.completion_us
        self.latency_sum_us += result.latency_us
        self.latency_count += 1
        if result.op is Op.WRITE:
            self.user_writes += 1
            return
        self.user_reads += 1
        served = result.served_by
        if served is ServedBy.DRAM_HIT:
            self.dram_hits += 1
        elif served is ServedBy.RO_SSD_HIT:
            self.ro_hits += 1
        elif served is ServedBy.WO_SSD_HIT:
            self.wo_hits += 1
        elif served is ServedBy.SSD_HIT:
            self.ssd_hits += 1
        else:
            self.hdd_reads += 1

    def begin_measurement(self) -> None:
        """Warm-up boundary: keep cache state, zero every counter."""
        # every later access starts no earlier than the next issue time
        self.origin = self.now
        self.requests = 0
        self.dram_hits = self.ro_hits = self.wo_hits = self.ssd_hits = 0
        self.hdd_reads = self.user_reads = self.user_writes = 0
        self.latency_sum_us = 0.0
        self.latency_count = 0
        self.writebacks = 0
        self.ssd_evictions = 0
        for device in self.devices.values():
            device.reset_counters()
        logger.debug(f"Measurement starts at {self.origin} us")

    def end_time(self) -> float:
        return max([self.now, self.horizon] + [d.last_release_us for d in self.devices.values()])

    def finish(self) -> RunStats:
        """Drain background work and return the run's counters."""
        if not self.finished:
            self.drain()
            self.finished = True
        return self.run_stats()

    def run_stats(self) -> RunStats:
        total = max(0.0, self.end_time() - self.origin)
        return RunStats(
            architecture=self.architecture,
            policy=self.policy_name,
            page_size_bytes=self.page_size,
            requests=self.requests,
            dram_hits=self.dram_hits,
            ro_hits=self.ro_hits,
            wo_hits=self.wo_hits,
            ssd_hits=self.ssd_hits,
            hdd_reads=self.hdd_reads,
            user_reads=self.user_reads,
            user_writes=self.user_writes,
            devices={role: device.snapshot() for role, device in self.devices.items()},
            total_sim_us=total,
            latency_sum_us=self.latency_sum_us,
            latency_count=self.latency_count,
            writebacks=self.writebacks,
            ssd_evictions=self.ssd_evictions,
            **self.extra_stats(),
        )

    def extra_stats(self) -> dict:
        return {}

    def run(self, trace: Iterable[Request], warmup_requests: int = 0) -> RunStats:
        """Replay a whole trace; the first ``warmup_requests`` only warm the cache."""
        for index, request in enumerate(trace):
            if warmup_requests and index == warmup_requests:
                self.begin_measurement()
            self.submit(request)
        return self.finish()
