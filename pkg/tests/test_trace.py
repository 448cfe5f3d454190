from collections import Counter

import numpy as np
import pytest

from tica_sim.exceptions import TraceError, TraceParseError
from tica_sim.models import Locality, Op, Request, SyntheticSpec, TraceFormat
from tica_sim.trace import (
    dump_trace,
    gen_synthetic,
    load_trace,
    parse_msr_line,
    preset_spec,
    trace_stats,
)


class TestParseMsrLine:
    def test_aligned_read(self):
        request = parse_msr_line("128166372003061629,hm,1,Read,8192,4096,559", page_size=4096)
        assert (request.lba, request.pages, request.op) == (2, 1, Op.READ)

    def test_straddling_write(self):
        request = parse_msr_line("0,hm,1,Write,6144,4096,10")
        assert (request.lba, request.pages, request.op) == (1, 2, Op.WRITE)

    def test_timestamp_relative_to_origin(self):
        request = parse_msr_line("1000,hm,1,read,0,512,1", origin_ticks=500)
        assert request.arrival_us == 50

    @pytest.mark.parametrize(
        "line",
        [
            "1,hm,1,Read,0,4096",
            "1,hm,1,Trim,0,4096,1",
            "1,hm,1,Read,abc,4096,1",
            "1,hm,1,Read,0,zero,1",
            "1,hm,1,Read,-4096,4096,1",
            "1,hm,1,Read,0,0,1",
        ],
    )
    def test_malformed_lines(self, line):
        with pytest.raises(TraceParseError) as info:
            parse_msr_line(line, line_number=7)
        assert info.value.line_number == 7

    def test_total_on_well_formed_records(self):
        rng = np.random.default_rng(17)
        for _ in range(2000):
            page_size = int(rng.choice([512, 4096, 8192]))
            offset = int(rng.integers(0, 2 ** 40))
            size = int(rng.integers(1, 2 ** 20))
            ticks = int(rng.integers(0, 2 ** 62))
            kind = str(rng.choice(["Read", "Write", "read", "WRITE"]))
            request = parse_msr_line(f"{ticks},host,{int(rng.integers(0, 8))},{kind},{offset},{size},0", page_size)
            first, last = offset // page_size, (offset + size - 1) // page_size
            assert (request.lba, request.pages) == (first, last - first + 1)
            assert request.arrival_us == ticks // 10


class TestLoadTrace:
    def test_msr_file_with_header(self, msr_file):
        reader = load_trace(msr_file, TraceFormat.MSR)
        requests = list(reader)
        assert [(r.arrival_us, r.lba, r.pages, r.op) for r in requests] == [
            (0, 2, 1, Op.READ),
            (1_000_000, 1, 2, Op.WRITE),
            (2_000_000, 0, 2, Op.READ),
        ]
        assert reader.skipped == 0

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        reader = load_trace(path)
        assert list(reader) == []
        assert reader.skipped == 0

    def test_skip_malformed(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("10,h,0,Read,0,4096,1\n20,h,0,Read,4096,4096,1\nbroken line\n30,h,0,Write,0,4096,1\n")
        reader = load_trace(path)
        assert len(list(reader)) == 3
        assert reader.skipped == 1

    def test_abort_policy(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("10,h,0,Read,0,4096,1\n20,h,0,Erase,0,4096,1\n")
        with pytest.raises(TraceParseError) as info:
            list(load_trace(path, on_error="abort"))
        assert info.value.line_number == 2

    def test_too_many_malformed_lines(self, tmp_path):
        path = tmp_path / "t.csv"
        good = [f"{i},h,0,Read,{i * 4096},4096,1" for i in range(100)]
        path.write_text("\n".join(good + ["x,y"] * 5) + "\n")
        with pytest.raises(TraceError):
            list(load_trace(path))

    def test_invalid_utf8_line_is_skipped(self, tmp_path):
        path = tmp_path / "t.csv"
        lines = [f"{i},h,0,Read,{i * 4096},4096,1".encode() for i in range(150)]
        lines[40] = b"40,h\xff,0,Read,0,4096,1"
        path.write_bytes(b"\n".join(lines) + b"\n")
        reader = load_trace(path)
        requests = list(reader)
        assert len(requests) == 149
        assert (reader.records, reader.skipped) == (150, 1)

    def test_invalid_utf8_aborts_with_line_number(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_bytes(b'{"arrival_us": 0, "lba": 1, "pages": 1, "op": "R"}\n\xff\xfe\n')
        with pytest.raises(TraceParseError) as info:
            list(load_trace(path, TraceFormat.JSONL, on_error="abort"))
        assert info.value.line_number == 2

    def test_garbage_first_line_is_counted_not_taken_as_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("abc,def,ghi\n10,h,0,Read,0,4096,1\n20,h,0,Write,4096,4096,1\n")
        reader = load_trace(path)
        assert len(list(reader)) == 2
        assert reader.skipped == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(TraceError):
            load_trace(tmp_path / "nope.csv")

    def test_jsonl_round_trip(self, tmp_path):
        original = gen_synthetic(SyntheticSpec(request_count=50, working_set_pages=20, rng_seed=4))
        path = tmp_path / "t.jsonl"
        assert dump_trace(original, path) == 50
        assert list(load_trace(path, TraceFormat.JSONL)) == original

    def test_jsonl_arrivals_start_at_zero(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(
            '{"arrival_us": 500, "lba": 1, "pages": 1, "op": "R"}\n'
            '{"arrival_us": 700, "lba": 2, "pages": 1, "op": "W"}\n'
        )
        assert [r.arrival_us for r in load_trace(path, TraceFormat.JSONL)] == [0, 200]


class TestGenSynthetic:
    def test_all_writes(self):
        trace = gen_synthetic(SyntheticSpec(request_count=200, read_fraction=0.0))
        assert all(r.op is Op.WRITE for r in trace)

    def test_single_page_working_set(self):
        trace = gen_synthetic(SyntheticSpec(request_count=100, working_set_pages=1, locality=Locality.UNIFORM))
        assert {r.lba for r in trace} == {0}

    def test_deterministic(self):
        spec = SyntheticSpec(request_count=500, working_set_pages=100, rng_seed=9)
        assert gen_synthetic(spec) == gen_synthetic(spec)

    def test_sequential_scan(self):
        trace = gen_synthetic(SyntheticSpec(request_count=25, working_set_pages=10, locality=Locality.SEQUENTIAL))
        assert [r.lba for r in trace] == [i % 10 for i in range(25)]

    def test_zipf_top_page_frequency(self):
        trace = gen_synthetic(SyntheticSpec(request_count=100_000, working_set_pages=10_000, zipf_s=1.0))
        harmonic = sum(1.0 / k for k in range(1, 10_001))
        top = Counter(r.lba for r in trace)[0] / len(trace)
        assert top == pytest.approx(1.0 / harmonic, rel=0.1)

    @pytest.mark.parametrize("read_fraction", [0.05, 0.3, 0.7, 0.94])
    def test_read_fraction_within_two_percent(self, read_fraction):
        trace = gen_synthetic(SyntheticSpec(request_count=10_000, read_fraction=read_fraction, rng_seed=5))
        share = sum(r.op is Op.READ for r in trace) / len(trace)
        assert abs(share - read_fraction) <= 0.02

    def test_preset(self):
        spec = preset_spec("TPCC", request_count=10)
        assert spec.read_fraction == 0.70
        assert spec.locality is Locality.ZIPF
        with pytest.raises(KeyError):
            preset_spec("nosuchworkload")


class TestTraceStats:
    def test_empty(self):
        stats = trace_stats([])
        assert stats.total_requests == stats.working_set_pages == stats.total_bytes == 0

    def test_two_writes_same_page(self):
        stats = trace_stats([Request(lba=3, op=Op.WRITE), Request(lba=3, op=Op.WRITE)])
        assert (stats.total_requests, stats.write_requests, stats.working_set_pages) == (2, 2, 1)
        assert stats.read_working_set_pages == 0

    def test_matches_recount(self):
        trace = gen_synthetic(SyntheticSpec(request_count=2000, working_set_pages=500, request_pages=3, rng_seed=1))
        stats = trace_stats(trace, page_size=4096)
        touched = {p for r in trace for p in range(r.lba, r.lba + r.pages)}
        read_touched = {p for r in trace if r.op is Op.READ for p in range(r.lba, r.lba + r.pages)}
        assert stats.working_set_pages == len(touched)
        assert stats.read_working_set_pages == len(read_touched)
        assert stats.read_requests + stats.write_requests == stats.total_requests == 2000
        assert stats.total_bytes == 2000 * 3 * 4096
