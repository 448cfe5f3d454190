"""
Adaptive EF/WED policy selection.

Two detectors watch the request stream and vote for the WED policy:

* the DRAM low-capacity identifier, which compares DRAM and ghost-queue (EQ)
  read hits over a window of ``2 * DRAM pages`` requests, and
* SMBI, a small state machine that enters WED while HDD reads and cache hits
  are both high, and backs off through a wait state otherwise.

Both compare ratios (counts divided by the window or sample size) against
their thresholds. Decisions are taken only at window/sample boundaries.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from .models import DecisionSource, PolicyMode, PolicySwitch, ThresholdConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class AccessEvent:
    """Classification of one page access, taken before the directory is updated."""
    is_read: bool
    hit_dram: bool = False
    hit_eq: bool = False
    hit_cache: bool = False


@dataclass(frozen=True, slots=True)
class PolicyDecision:
    mode: PolicyMode
    source: DecisionSource


@dataclass(slots=True)
class CapacityWindow:
    window_size: int
    t_min: float = 0.15
    t_max: float = 0.25
    prose_variant: bool = False
    request_counter: int = 0
    eq_hit: int = 0
    dram_read_hit: int = 0
    mode: PolicyMode = PolicyMode.EF


def capacity_estimator(win: CapacityWindow, event: AccessEvent) -> Optional[PolicyMode]:
    """
    Count one request; at the window boundary decide EF or WED and reset.

    Returns the decided mode at a boundary, None otherwise.
    """
    win.request_counter += 1
    if event.is_read:
        if event.hit_dram:
            win.dram_read_hit += 1
        elif event.hit_eq:
            win.eq_hit += 1

    if win.request_counter < win.window_size:
        return None

    eq_ratio = win.eq_hit / win.window_size
    combined_ratio = (win.eq_hit + win.dram_read_hit) / win.window_size
    if win.prose_variant:
        # high EF hit ratio wins regardless of the ghost queue
        if win.dram_read_hit / win.window_size > win.t_max:
            mode = PolicyMode.EF
        elif eq_ratio > win.t_min:
            mode = PolicyMode.WED
        else:
            mode = PolicyMode.EF
    elif combined_ratio > win.t_max:
        mode = PolicyMode.WED
    elif eq_ratio > win.t_min:
        mode = PolicyMode.WED
    else:
        mode = PolicyMode.EF

    logger.debug(
        f"Capacity window closed: eq={eq_ratio:.3f} combined={combined_ratio:.3f} -> {mode.value}"
    )
    win.request_counter = win.eq_hit = win.dram_read_hit = 0
    win.mode = mode
    return mode


class SmbiPhase(str, Enum):
    INITIAL = "initial"
    WED = "wed"
    WAIT = "wait"


@dataclass(slots=True)
class SmbiState:
    sample_size: int
    steps: int = 4
    t_hdd: float = 0.2
    t_read: float = 0.2
    state: SmbiPhase = SmbiPhase.INITIAL
    counter: int = -1
    disk_read: int = 0
    read_hit: int = 0
    request_counter: int = 0

    def __post_init__(self):
        if self.counter < 0:
            self.counter = self.steps

    @property
    def mode(self) -> PolicyMode:
        return PolicyMode.WED if self.state is SmbiPhase.WED else PolicyMode.EF


def smbi(state: SmbiState, event: AccessEvent) -> Optional[PolicyMode]:
    """
    Count one request; at the sample boundary step the state machine and reset.

    Returns the mode in force after the step, None between boundaries.
    """
    state.request_counter += 1
    if event.is_read:
        if event.hit_cache:
            state.read_hit += 1
        else:
            state.disk_read += 1

    if state.request_counter < state.sample_size:
        return None

    disk_high = state.disk_read / state.sample_size > state.t_hdd
    hit_high = state.read_hit / state.sample_size > state.t_read
    previous = state.state

    if state.state is SmbiPhase.INITIAL:
        if disk_high:
            state.counter = state.steps - 1
            state.state = SmbiPhase.WED
    elif state.state is SmbiPhase.WED:
        if disk_high:
            if not hit_high:
                state.state = SmbiPhase.WAIT
        elif hit_high:
            state.counter = state.steps
            state.state = SmbiPhase.INITIAL
    else:
        if state.counter == 0 or hit_high:
            state.counter = state.steps
            state.state = SmbiPhase.INITIAL
        else:
            state.counter -= 1

    if state.state is not previous:
        logger.debug(f"SMBI {previous.value} -> {state.state.value} (counter={state.counter})")
    state.disk_read = state.read_hit = state.request_counter = 0
    return state.mode


def combine(capacity_mode: PolicyMode, smbi_mode: PolicyMode) -> PolicyDecision:
    """WED when either detector demands it, EF otherwise."""
    if capacity_mode is PolicyMode.WED:
        return PolicyDecision(PolicyMode.WED, DecisionSource.CAPACITY)
    if smbi_mode is PolicyMode.WED:
        return PolicyDecision(PolicyMode.WED, DecisionSource.SMBI)
    return PolicyDecision(PolicyMode.EF, DecisionSource.DEFAULT)


class AdaptivePolicy:
    """Runs both detectors on every page access and keeps the combined decision."""

    def __init__(self, window_size: int, thresholds: Optional[ThresholdConfig] = None):
        thresholds = thresholds or ThresholdConfig()
        self.window = CapacityWindow(
            window_size=window_size,
            t_min=thresholds.t_min,
            t_max=thresholds.t_max,
            prose_variant=thresholds.capacity_prose_variant,
        )
        self.smbi = SmbiState(
            sample_size=thresholds.sample_size or window_size,
            steps=thresholds.steps,
            t_hdd=thresholds.t_hdd,
            t_read=thresholds.t_read,
        )
        self.decision = PolicyDecision(PolicyMode.EF, DecisionSource.DEFAULT)
        self.switches: List[PolicySwitch] = []
        self.page_ops = 0

    @property
    def mode(self) -> PolicyMode:
        return self.decision.mode

    def observe(self, event: AccessEvent) -> PolicyDecision:
        self.page_ops += 1
        boundary = capacity_estimator(self.window, event) is not None
        boundary = smbi(self.smbi, event) is not None or boundary
        if boundary:
            decision = combine(self.window.mode, self.smbi.mode)
            if decision.mode is not self.decision.mode:
                self.switches.append(
                    PolicySwitch(page_op=self.page_ops, mode=decision.mode, source=decision.source)
                )
                logger.debug(f"Policy switch at page op {self.page_ops}: {decision.mode.value} ({decision.source.value})")
            self.decision = decision
        return self.decision
