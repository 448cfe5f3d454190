"""
Block trace ingestion, synthetic workload generation and workload statistics.

Two on-disk formats are supported:

* MSR-Cambridge CSV: ``Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime``
  with timestamps in 100 ns Windows ticks and offsets/sizes in bytes.
* NativeJsonLines: one ``{"arrival_us","lba","pages","op"}`` object per line.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from .exceptions import TraceError, TraceParseError
from .models import Locality, Op, Request, SyntheticSpec, TraceFormat, WorkloadStats

logger = logging.getLogger(__name__)

MSR_FIELD_COUNT = 7
MSR_HEADER = ("timestamp", "hostname", "disknumber", "type", "offset", "size", "responsetime")
TICKS_PER_US = 10
# Below this many records the error fraction is not enforced
MIN_RECORDS_FOR_ABORT = 100

_OPS = {"read": Op.READ, "write": Op.WRITE}

# Read share of well-known block traces (MSR Cambridge, TPC-C, Postmark, ...)
WORKLOAD_PRESETS: Dict[str, float] = {
    "tpcc": 0.70,
    "webserver": 0.61,
    "devtoolrel": 0.68,
    "livemapsbe": 0.71,
    "msnfs": 0.65,
    "exchange": 0.24,
    "postmark": 0.29,
    "stg_1": 0.64,
    "rsrch_0": 0.09,
    "src1_2": 0.57,
    "wdev_0": 0.20,
    "ts_0": 0.18,
    "usr_0": 0.40,
    "hm_1": 0.94,
    "mds_0": 0.31,
    "prn_0": 0.22,
    "prxy_0": 0.05,
}


def _parse_int(value: str, what: str, line_number: int) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise TraceParseError(line_number, f"non-numeric {what} '{value.strip()}'")


def parse_msr_line(line: str, page_size: int = 4096, line_number: int = 0, origin_ticks: int = 0) -> Request:
    """
    Parse one MSR-Cambridge record into a page-granular Request.

    ``origin_ticks`` is the timestamp of the first record of the trace; the
    arrival time is the distance to it in microseconds.
    """
    fields = line.strip().split(",")
    if len(fields) != MSR_FIELD_COUNT:
        raise TraceParseError(line_number, f"expected {MSR_FIELD_COUNT} fields, got {len(fields)}")

    ticks = _parse_int(fields[0], "timestamp", line_number)
    op = _OPS.get(fields[3].strip().lower())
    if op is None:
        raise TraceParseError(line_number, f"unknown request type '{fields[3].strip()}'")
    offset = _parse_int(fields[4], "offset", line_number)
    size = _parse_int(fields[5], "size", line_number)
    if offset < 0:
        raise TraceParseError(line_number, f"negative offset {offset}")
    if size <= 0:
        raise TraceParseError(line_number, f"non-positive size {size}")

    lba, within = divmod(offset, page_size)
    pages = -(-(within + size) // page_size)
    arrival_us = max(0, (ticks - origin_ticks) // TICKS_PER_US)
    return Request(arrival_us=arrival_us, lba=lba, pages=pages, op=op)


def _is_msr_header(line: str) -> bool:
    names = tuple(field.strip().lower().replace(" ", "") for field in line.split(","))
    return names == MSR_HEADER


def _decode(raw: bytes, line_number: int) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise TraceParseError(line_number, f"invalid UTF-8 at byte {e.start}")


class TraceReader:
    """
    Iterable over the Requests of one trace file.

    Malformed records are skipped and counted (``on_error="skip"``) or raised
    (``on_error="abort"``). When the stream is exhausted, a skip fraction above
    ``max_error_fraction`` raises TraceError.
    """

    def __init__(
        self,
        path: Union[str, Path],
        format: TraceFormat = TraceFormat.MSR,
        page_size: int = 4096,
        on_error: str = "skip",
        max_error_fraction: float = 0.01,
    ):
        self.path = Path(path)
        self.format = TraceFormat(format)
        self.page_size = page_size
        self.on_error = on_error
        self.max_error_fraction = max_error_fraction
        self.skipped = 0
        self.records = 0

    def __iter__(self) -> Iterator[Request]:
        self.skipped = 0
        self.records = 0
        try:
            with self.path.open("rb") as fh:
                if self.format is TraceFormat.MSR:
                    yield from self._read_msr(fh)
                else:
                    yield from self._read_jsonl(fh)
        except OSError as e:
            raise TraceError(f"cannot read trace {self.path}: {e}") from e
        self._check_error_fraction()

    def _lines(self, fh) -> Iterator[Tuple[int, str]]:
        """(line_number, text) for non-blank lines; undecodable lines count as malformed."""
        for line_number, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield line_number, _decode(raw, line_number)
            except TraceParseError as e:
                self.records += 1
                self._handle_error(e)

    def _read_msr(self, fh) -> Iterator[Request]:
        origin: Optional[int] = None
        last_arrival = 0
        first = True
        for line_number, line in self._lines(fh):
            if first and _is_msr_header(line):
                first = False
                logger.debug(f"Skipping header line of {self.path}")
                continue
            first = False
            self.records += 1
            try:
                if origin is None:
                    origin = _parse_int(line.split(",", 1)[0], "timestamp", line_number)
                request = parse_msr_line(line, self.page_size, line_number, origin)
            except TraceParseError as e:
                self._handle_error(e)
                continue
            # MSR traces are sorted by time; clamp stray records to keep arrivals monotone
            if request.arrival_us < last_arrival:
                request = request.model_copy(update={"arrival_us": last_arrival})
            last_arrival = request.arrival_us
            yield request

    def _read_jsonl(self, fh) -> Iterator[Request]:
        origin: Optional[int] = None
        last_arrival = 0
        for line_number, line in self._lines(fh):
            self.records += 1
            try:
                request = Request.model_validate_json(line)
            except ValidationError as e:
                self._handle_error(TraceParseError(line_number, f"invalid record: {e.errors()[0]['msg']}"))
                continue
            if origin is None:
                origin = request.arrival_us
            arrival = max(last_arrival, request.arrival_us - origin)
            if arrival != request.arrival_us:
                request = request.model_copy(update={"arrival_us": arrival})
            last_arrival = arrival
            yield request

    def _handle_error(self, error: TraceParseError) -> None:
        if self.on_error == "abort":
            raise error
        self.skipped += 1
        logger.warning(f"{self.path}: skipping malformed record ({error})")

    def _check_error_fraction(self) -> None:
        if self.records < MIN_RECORDS_FOR_ABORT or self.skipped == 0:
            return
        fraction = self.skipped / self.records
        if fraction > self.max_error_fraction:
            raise TraceError(
                f"{self.path}: {self.skipped} of {self.records} records malformed "
                f"({fraction:.2%} > {self.max_error_fraction:.2%})"
            )


def load_trace(
    path: Union[str, Path],
    format: TraceFormat = TraceFormat.MSR,
    page_size: int = 4096,
    on_error: str = "skip",
    max_error_fraction: float = 0.01,
) -> TraceReader:
    """Open a trace file; iterate the result for Requests, then read ``.skipped``."""
    path = Path(path)
    if not path.is_file():
        raise TraceError(f"trace file {path} does not exist")
    return TraceReader(path, format, page_size, on_error, max_error_fraction)


def dump_trace(requests: Iterable[Request], path: Union[str, Path]) -> int:
    """Write Requests as NativeJsonLines; returns the number of records."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for request in requests:
            fh.write(request.model_dump_json())
            fh.write("\n")
            count += 1
    return count


def zipf_weights(pages: int, s: float) -> np.ndarray:
    """Normalized Zipf probabilities for ranks 1..pages."""
    ranks = np.arange(1, pages + 1, dtype=np.float64)
    weights = ranks ** -s
    return weights / weights.sum()


def gen_synthetic(spec: SyntheticSpec) -> List[Request]:
    """
    Generate a deterministic synthetic trace.

    Page ranks map directly to LBAs, so under Zipf locality page 0 is the hottest.
    """
    rng = np.random.default_rng(spec.rng_seed)
    n = spec.request_count
    span = spec.request_pages
    pages = max(1, spec.working_set_pages - span + 1)

    is_read = rng.random(n) < spec.read_fraction
    if spec.locality is Locality.UNIFORM:
        lbas = rng.integers(0, pages, size=n)
    elif spec.locality is Locality.ZIPF:
        lbas = rng.choice(pages, size=n, p=zipf_weights(pages, spec.zipf_s))
    else:
        lbas = np.minimum((np.arange(n) * span) % spec.working_set_pages, pages - 1)

    return [
        Request(
            arrival_us=i * spec.inter_arrival_us,
            lba=int(lbas[i]),
            pages=span,
            op=Op.READ if is_read[i] else Op.WRITE,
        )
        for i in range(n)
    ]


def preset_spec(name: str, **updates) -> SyntheticSpec:
    """SyntheticSpec carrying the read share of a named workload."""
    key = name.lower()
    if key not in WORKLOAD_PRESETS:
        raise KeyError(f"unknown workload preset '{name}'; known: {', '.join(sorted(WORKLOAD_PRESETS))}")
    return SyntheticSpec(read_fraction=WORKLOAD_PRESETS[key], locality=Locality.ZIPF, **updates)


def trace_stats(trace: Iterable[Request], page_size: int = 4096) -> WorkloadStats:
    """Exact request counts and working-set sizes of a trace."""
    total = reads = writes = total_pages = 0
    touched = set()
    read_touched = set()
    for request in trace:
        total += 1
        total_pages += request.pages
        extent = range(request.lba, request.lba + request.pages)
        touched.update(extent)
        if request.op is Op.READ:
            reads += 1
            read_touched.update(extent)
        else:
            writes += 1
    return WorkloadStats(
        total_requests=total,
        read_requests=reads,
        write_requests=writes,
        total_bytes=total_pages * page_size,
        working_set_pages=len(touched),
        read_working_set_pages=len(read_touched),
    )
