"""
Error hierarchy shared by the simulator, the CLI and the HTTP service.
"""

from typing import Optional


class SimulatorError(Exception):
    """Base class for every error raised by tica_sim."""

    exit_code = 1


class ConfigError(SimulatorError):
    """Invalid experiment configuration or device model."""

    exit_code = 2


class TraceError(SimulatorError):
    """Trace could not be read or has too many malformed records."""

    exit_code = 3


class TraceParseError(TraceError):
    """A single trace record does not follow the expected grammar."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class AccountingError(SimulatorError):
    """Device or cache bookkeeping became inconsistent."""

    exit_code = 4


class InvariantViolation(AccountingError):
    """An audited cache invariant failed."""

    def __init__(self, invariant: str, detail: str, page: Optional[int] = None, event_index: Optional[int] = None):
        self.invariant = invariant
        self.detail = detail
        self.page = page
        self.event_index = event_index
        where = f" (page {page})" if page is not None else ""
        super().__init__(f"{invariant} violated{where}: {detail}")
