from decimal import Decimal
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Trace models
class Op(str, Enum):
    READ = "R"
    WRITE = "W"

class TraceFormat(str, Enum):
    MSR = "msr"
    JSONL = "jsonl"

class Locality(str, Enum):
    UNIFORM = "uniform"
    ZIPF = "zipf"
    SEQUENTIAL = "sequential"

class Request(BaseModel):
    """One block I/O, page-granular. Serialized as one NativeJsonLines record."""
    model_config = ConfigDict(frozen=True)

    arrival_us: int = Field(0, ge=0)
    lba: int = Field(..., ge=0)
    pages: int = Field(1, ge=1)
    op: Op

    @property
    def is_write(self) -> bool:
        return self.op is Op.WRITE

class WorkloadStats(BaseModel):
    total_requests: int = 0
    read_requests: int = 0
    write_requests: int = 0
    total_bytes: int = 0
    working_set_pages: int = 0
    read_working_set_pages: int = 0

class SyntheticSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    request_count: int = Field(10_000, ge=1)
    read_fraction: float = Field(0.7, ge=0.0, le=1.0)
    working_set_pages: int = Field(100_000, ge=1)
    locality: Locality = Locality.ZIPF
    zipf_s: float = Field(1.0, gt=0.0, description="Zipf exponent, used when locality is zipf")
    page_size_bytes: int = Field(4096, ge=512)
    rng_seed: int = 0
    inter_arrival_us: int = Field(100, ge=0, description="Arrival spacing written into the trace")
    request_pages: int = Field(1, ge=1, description="Extent of every generated request")

class TraceSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str
    format: TraceFormat = TraceFormat.MSR
    page_size_bytes: int = Field(4096, ge=512)
    on_error: Literal["skip", "abort"] = "skip"
    max_error_fraction: float = Field(0.01, ge=0.0, le=1.0)

# Device models
class DeviceKind(str, Enum):
    DRAM = "dram"
    SSD = "ssd"
    HDD = "hdd"

class DeviceModel(BaseModel):
    """Static parameters of one storage device."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: DeviceKind
    capacity_pages: int = Field(1, ge=1)
    read_latency_us: float = Field(..., gt=0)
    write_latency_us: float = Field(..., gt=0)
    read_power_w: float = Field(..., ge=0)
    write_power_w: float = Field(..., ge=0)
    idle_power_w: float = Field(..., ge=0)
    mttf_hours: float = Field(..., gt=0)
    cost_per_gb_usd: float = Field(0.0, ge=0)
    endurance_writes_per_gb: Optional[float] = Field(None, gt=0, description="None means unlimited")

class DeviceOverride(BaseModel):
    """Partial DeviceModel used to override catalog values from a config file."""
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    capacity_pages: Optional[int] = Field(None, ge=1)
    read_latency_us: Optional[float] = Field(None, gt=0)
    write_latency_us: Optional[float] = Field(None, gt=0)
    read_power_w: Optional[float] = Field(None, ge=0)
    write_power_w: Optional[float] = Field(None, ge=0)
    idle_power_w: Optional[float] = Field(None, ge=0)
    mttf_hours: Optional[float] = Field(None, gt=0)
    cost_per_gb_usd: Optional[float] = Field(None, ge=0)
    endurance_writes_per_gb: Optional[float] = Field(None, gt=0)

class DeviceSnapshot(BaseModel):
    model: DeviceModel
    reads: int = 0
    writes: int = 0
    busy_us: float = 0.0
    last_release_us: float = 0.0
    trims: int = 0

# Cache models
class Level(str, Enum):
    DRAM = "dram"
    RO_SSD = "ro_ssd"
    WO_SSD = "wo_ssd"
    MISS = "miss"

class ServedBy(str, Enum):
    DRAM_HIT = "dram_hit"
    RO_SSD_HIT = "ro_ssd_hit"
    WO_SSD_HIT = "wo_ssd_hit"
    SSD_HIT = "ssd_hit"
    HDD_MISS = "hdd_miss"
    WRITE_BUFFERED = "write_buffered"

class EvictionTarget(str, Enum):
    EQ = "eq"
    WO_SSD = "wo_ssd"
    HDD = "hdd"
    DISCARD = "discard"

class CacheDevice(str, Enum):
    DRAM = "dram"
    RO_SSD = "ro_ssd"
    WO_SSD = "wo_ssd"

class RecoverabilityReport(BaseModel):
    failed: List[CacheDevice]
    dirty_pages: int = 0
    unrecoverable: List[int] = []

    @property
    def recoverable(self) -> bool:
        return not self.unrecoverable

# Policy models
class PolicyMode(str, Enum):
    EF = "ef"
    WED = "wed"

class PolicyName(str, Enum):
    EF = "ef"
    WED = "wed"
    ADAPTIVE = "adaptive"

class DecisionSource(str, Enum):
    CAPACITY = "capacity"
    SMBI = "smbi"
    DEFAULT = "default"

class PolicySwitch(BaseModel):
    page_op: int
    mode: PolicyMode
    source: DecisionSource

# Run and report models
class Architecture(str, Enum):
    TICA = "tica"
    MIRRORED_WB = "mirrored_wb"
    SINGLE_SSD = "single_ssd"
    RAID1_RO = "raid1_ro"
    RAID1_WO = "raid1_wo"
    RAID1_MIXED = "raid1_mixed"

class ClockMode(str, Enum):
    CLOSED = "closed"
    OPEN = "open"

class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"

class BaselineConfig(BaseModel):
    """A reference architecture: optional DRAM front plus one or two mirrored SSDs."""
    model_config = ConfigDict(extra="forbid")

    kind: Architecture
    members: List[DeviceModel]
    hdd: DeviceModel
    dram: Optional[DeviceModel] = None
    internal_reserve_pages: int = Field(4, ge=0)

    @model_validator(mode="after")
    def check_layout(self):
        expected = 1 if self.kind is Architecture.SINGLE_SSD else 2
        if self.kind is Architecture.TICA:
            raise ValueError("TICA is not a baseline architecture")
        if len(self.members) != expected:
            raise ValueError(f"{self.kind.value} needs {expected} SSD member(s), got {len(self.members)}")
        if (self.dram is not None) != (self.kind is Architecture.MIRRORED_WB):
            raise ValueError("only mirrored_wb has a DRAM front")
        return self

class RunStats(BaseModel):
    """Counters gathered by one engine run; input of every analytics function."""
    architecture: Architecture = Architecture.TICA
    policy: PolicyName = PolicyName.EF
    page_size_bytes: int = 4096
    requests: int = 0
    dram_hits: int = 0
    ro_hits: int = 0
    wo_hits: int = 0
    ssd_hits: int = 0
    hdd_reads: int = 0
    user_reads: int = 0
    user_writes: int = 0
    devices: Dict[str, DeviceSnapshot] = {}
    total_sim_us: float = 0.0
    latency_sum_us: float = 0.0
    latency_count: int = 0
    dram_exposure_us: float = 0.0
    ro_exposure_us: float = 0.0
    alpha_observed: float = Field(1.0, ge=0.0, le=1.0)
    flushes_completed: int = 0
    wed_copies: int = 0
    writebacks: int = 0
    ssd_evictions: int = 0
    eq_hits: int = 0
    policy_switches: List[PolicySwitch] = []

    @property
    def cache_hits(self) -> int:
        return self.dram_hits + self.ro_hits + self.wo_hits + self.ssd_hits

class ReliabilityReport(BaseModel):
    alpha: float
    mission_hours: Optional[float] = None
    r_dram: Decimal
    r_ro_ssd: Decimal
    r_wo_ssd: Decimal
    r_tica: Decimal
    r_mirrored: Decimal
    u_tica: float
    u_mirrored: float

class MetricReport(BaseModel):
    schema_version: int = 1
    architecture: Architecture
    policy: PolicyName
    requests: int
    user_reads: int
    user_writes: int
    hits: Dict[str, int]
    hit_ratio: float
    mean_latency_us: float
    total_sim_us: float
    cwaf: Optional[float]
    energy_j: float
    ssd_writes: Dict[str, int]
    ssd_writes_total: int
    alpha: float
    reliability: float
    unreliability: float
    mirrored_unreliability: float
    endurance_fraction: Dict[str, float]
    lifetime_days: Dict[str, Optional[float]]
    cost_usd: float
    policy_switches: int

# Experiment configuration
class SizingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ssd_fraction: float = Field(0.10, gt=0.0, le=1.0)
    dram_fraction: float = Field(0.01, gt=0.0, le=1.0)
    dram_pages: Optional[int] = Field(None, ge=2, description="Explicit usable DRAM pages; overrides dram_fraction")
    ssd_pages: Optional[int] = Field(None, ge=1, description="Explicit usable pages per SSD; overrides ssd_fraction")
    def_write_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    min_read_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    internal_reserve_pages: int = Field(4, ge=0)
    eq_pages: Optional[int] = Field(None, ge=1, description="Ghost queue size; defaults to the read partition size")
    ssd_model: Literal["wo_ssd", "ro_ssd", "c_ssd"] = "wo_ssd"

class ThresholdConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_min: float = Field(0.15, ge=0.0, le=1.0)
    t_max: float = Field(0.25, ge=0.0, le=1.0)
    t_hdd: float = Field(0.2, ge=0.0, le=1.0)
    t_read: float = Field(0.2, ge=0.0, le=1.0)
    sample_size: Optional[int] = Field(None, ge=1, description="SMBI sample; defaults to the capacity window")
    steps: int = Field(4, ge=1)
    capacity_prose_variant: bool = False

class AnalyticsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: Optional[float] = Field(None, ge=0.0, le=1.0, description="Fixed alpha; estimated from the run when unset")
    dram_idle_at_ro_power: bool = False
    mission_hours: Optional[float] = Field(None, gt=0)

class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    format: ReportFormat = ReportFormat.JSON

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trace: Optional[TraceSource] = None
    synthetic: Optional[SyntheticSpec] = None
    architecture: Architecture = Architecture.TICA
    policy: PolicyName = PolicyName.ADAPTIVE
    clock: ClockMode = ClockMode.CLOSED
    seed: Optional[int] = None
    warmup_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    sizing: SizingConfig = Field(default_factory=SizingConfig)
    thresholds: ThresholdConfig = Field(default_factory=ThresholdConfig)
    devices: Dict[Literal["dram", "ro_ssd", "wo_ssd", "hdd", "c_ssd"], DeviceOverride] = {}
    analytics: AnalyticsConfig = Field(default_factory=AnalyticsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def check_single_trace_source(self):
        if (self.trace is None) == (self.synthetic is None):
            raise ValueError("exactly one of 'trace' or 'synthetic' must be configured")
        return self

    @field_validator("seed")
    @classmethod
    def check_seed(cls, v):
        if v is not None and v < 0:
            raise ValueError("seed must be non-negative")
        return v

    @property
    def page_size_bytes(self) -> int:
        source = self.trace or self.synthetic
        return source.page_size_bytes

    def effective_synthetic(self) -> Optional[SyntheticSpec]:
        """Synthetic spec with the top-level seed applied."""
        if self.synthetic is None:
            return None
        if self.seed is None:
            return self.synthetic
        return self.synthetic.model_copy(update={"rng_seed": self.seed})
