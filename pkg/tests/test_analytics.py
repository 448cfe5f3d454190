import csv
import io
import json
from decimal import Decimal, localcontext

import pytest

from tica_sim.analytics import (
    STATED_UNRELIABILITY,
    alpha_estimate,
    build_report,
    compare_architectures,
    cwaf,
    device_cost,
    device_reliability,
    energy,
    hit_ratio,
    normalize_to,
    reliability,
    reliability_discrepancy,
    render_report,
    render_rows,
)
from tica_sim.devices import DEFAULT_CATALOG, with_capacity
from tica_sim.exceptions import AccountingError, ConfigError
from tica_sim.models import Architecture, DeviceSnapshot, PolicyName, ReportFormat, RunStats

from helpers import build_tica, random_trace, writes
from oracle import energy_from_events


def idle_stats(total_us: float, **counts) -> RunStats:
    devices = {role: DeviceSnapshot(model=DEFAULT_CATALOG[role]) for role in ("dram", "ro_ssd", "wo_ssd", "hdd")}
    for role, (reads, writes_) in counts.items():
        devices[role] = DeviceSnapshot(model=DEFAULT_CATALOG[role], reads=reads, writes=writes_)
    return RunStats(devices=devices, total_sim_us=total_us)


class TestCwaf:
    def test_ef_distinct_writes(self):
        stats = build_tica(ssd_pages=50).run(writes(*range(10)))
        assert cwaf(stats) == pytest.approx(2.0)

    def test_no_writes(self):
        assert cwaf(RunStats()) is None

    def test_wed_copies_raise_cwaf(self):
        trace = random_trace(3, 600, 60, read_fraction=0.8)
        ef = build_tica(dram_pages=10, ssd_pages=80, policy=PolicyName.EF).run(trace)
        wed = build_tica(dram_pages=10, ssd_pages=80, policy=PolicyName.WED).run(trace)
        assert wed.wed_copies > 0
        assert cwaf(wed) > cwaf(ef)

    def test_hit_ratio_without_reads(self):
        assert hit_ratio(RunStats()) == 0.0


class TestEnergy:
    def test_idle_floor(self):
        # one second idle: DRAM 4.0 W + RO 0.07 W + WO 1.3 W, HDD excluded
        assert energy(idle_stats(1e6)) == pytest.approx(5.37)

    def test_verbatim_dram_idle_power(self):
        assert energy(idle_stats(1e6), dram_idle_at_ro_power=True) == pytest.approx(0.07 + 0.07 + 1.3)

    def test_busy_beyond_total(self):
        with pytest.raises(AccountingError):
            energy(idle_stats(1000.0, ro_ssd=(100, 0)))

    def test_matches_per_access_log(self):
        cache = build_tica(dram_pages=10, ssd_pages=30, record_events=True)
        stats = cache.run(random_trace(7, 500, 80))
        assert energy(stats) == pytest.approx(energy_from_events(cache, stats.total_sim_us), rel=1e-9)


RELIABILITY_FORMS = pytest.mark.parametrize("mission_hours", [None, 8760.0], ids=["annual", "mission"])


class TestReliability:
    @RELIABILITY_FORMS
    def test_alpha_extremes(self, mission_hours):
        models = DEFAULT_CATALOG
        r_dram = device_reliability(models["dram"], mission_hours)
        r_ro = device_reliability(models["ro_ssd"], mission_hours)
        r_wo = device_reliability(models["wo_ssd"], mission_hours)
        with localcontext() as ctx:
            ctx.prec = 50
            assert reliability(models, 1.0, mission_hours).u_tica == pytest.approx(float((1 - r_wo) * (1 - r_dram)), rel=1e-9)
            assert reliability(models, 0.0, mission_hours).u_tica == pytest.approx(float((1 - r_wo) * (1 - r_ro)), rel=1e-9)

    @RELIABILITY_FORMS
    def test_values_strictly_between_zero_and_one(self, mission_hours):
        for alpha in (0.0, 0.5, 0.8, 1.0):
            report = reliability(DEFAULT_CATALOG, alpha, mission_hours)
            assert Decimal(0) < report.r_tica < Decimal(1)
            assert Decimal(0) < report.r_mirrored < Decimal(1)
            assert 0.0 < report.u_tica < 1.0

    @RELIABILITY_FORMS
    def test_mirrored_pair(self, mission_hours):
        report = reliability(DEFAULT_CATALOG, 0.5, mission_hours)
        with localcontext() as ctx:
            ctx.prec = 50
            expected = (1 - report.r_wo_ssd) ** 2
            assert abs((1 - report.r_mirrored) - expected) <= expected * Decimal("1e-12")
        assert report.u_mirrored == pytest.approx(float(expected), rel=1e-12)

    @RELIABILITY_FORMS
    def test_monotone_in_alpha(self, mission_hours):
        assert device_reliability(DEFAULT_CATALOG["dram"], mission_hours) > device_reliability(
            DEFAULT_CATALOG["ro_ssd"], mission_hours
        )
        values = [reliability(DEFAULT_CATALOG, a / 10, mission_hours).r_tica for a in range(11)]
        assert all(low < high for low, high in zip(values, values[1:]))

    @RELIABILITY_FORMS
    def test_tica_not_below_mirrored(self, mission_hours):
        for alpha in (0.0, 0.3, 0.8, 1.0):
            report = reliability(DEFAULT_CATALOG, alpha, mission_hours)
            assert report.r_tica >= report.r_mirrored

    def test_alpha_out_of_range(self):
        with pytest.raises(ConfigError):
            reliability(DEFAULT_CATALOG, 1.5)

    def test_discrepancy_report(self):
        report = reliability_discrepancy()
        assert report["stated"] == STATED_UNRELIABILITY
        assert report["alpha"] == 0.8
        assert report["mission_time"]["tica"] <= report["mission_time"]["mirrored"]
        assert report["printed_exponent"]["tica"] < report["mission_time"]["tica"]

    def test_alpha_estimate(self):
        assert alpha_estimate(RunStats()) == 1.0
        assert alpha_estimate(RunStats(dram_exposure_us=3.0, ro_exposure_us=1.0)) == 0.75


class TestArchitectureComparison:
    def test_normalized_latencies(self):
        table = compare_architectures()
        assert table["raid1_mixed"]["write"] == pytest.approx(10.0)
        assert table["tica"]["write"] == pytest.approx(1.0)
        assert table["tica"]["read_hit"] == pytest.approx(1.0)
        assert table["raid1_wo"]["read_hit"] == pytest.approx(110 / 90)

    def test_tica_read_miss_skips_ssd_fill(self):
        table = compare_architectures()
        assert table["tica"]["read_miss_fill"] < min(
            table[arch]["read_miss_fill"] for arch in ("raid1_ro", "raid1_wo", "raid1_mixed")
        )

    def test_cost_of_mixed_pair(self):
        ro = with_capacity(DEFAULT_CATALOG["ro_ssd"], 262_144)
        wo = with_capacity(DEFAULT_CATALOG["wo_ssd"], 262_144)
        assert device_cost([ro, wo]) == pytest.approx(0.74 + 0.842)
        assert device_cost([ro, wo]) < device_cost([wo, wo])
        assert device_cost([DEFAULT_CATALOG["hdd"]]) == 0.0


class TestRendering:
    @pytest.fixture
    def report(self):
        stats = build_tica(dram_pages=10, ssd_pages=30).run(random_trace(5, 300, 60))
        return build_report(stats)

    def test_report_fields(self, report):
        assert report.architecture is Architecture.TICA
        assert report.requests == 300
        assert 0.0 <= report.hit_ratio <= 1.0
        assert report.ssd_writes_total == sum(report.ssd_writes.values())
        assert 0.0 <= report.unreliability <= 1.0

    def test_json_is_deterministic(self, report):
        config = {"seed": 5, "policy": "ef"}
        first = render_report(report, ReportFormat.JSON, config)
        assert first == render_report(report, ReportFormat.JSON, config)
        document = json.loads(first)
        assert document["seed"] == 5
        assert document["report"]["architecture"] == "tica"

    def test_csv_one_row(self, report):
        rows = list(csv.DictReader(io.StringIO(render_report(report, ReportFormat.CSV))))
        assert len(rows) == 1
        assert rows[0]["architecture"] == "tica"
        assert "hits.dram" in rows[0]

    def test_rows_keep_first_seen_columns(self):
        text = render_rows([{"a": 1, "b": {"c": 2}}, {"a": 3, "d": 4}])
        assert text.splitlines() == ["a,b.c,d", "1,2,", "3,,4"]


def test_normalize_to_reference_rows():
    rows = [
        {"architecture": "tica", "ssd_pages": 10, "mean_latency_us": 50.0, "energy_j": 2.0, "ssd_writes_total": 10},
        {"architecture": "mirrored_wb", "ssd_pages": 10, "mean_latency_us": 100.0, "energy_j": 4.0, "ssd_writes_total": 20},
        {"architecture": "tica", "ssd_pages": 20, "error": "boom"},
    ]
    normalize_to(rows, Architecture.MIRRORED_WB, group_by=["ssd_pages"])
    assert rows[0]["mean_latency_us_normalized"] == 0.5
    assert rows[0]["ssd_writes_total_normalized"] == 0.5
    assert rows[1]["energy_j_normalized"] == 1.0
    assert rows[2]["mean_latency_us_normalized"] is None
