import pytest
from pydantic import ValidationError

from tica_sim.analytics import cwaf
from tica_sim.baselines import MirroredCache, run_baseline
from tica_sim.devices import DEFAULT_CATALOG, with_capacity
from tica_sim.models import Architecture, BaselineConfig, EvictionTarget, PolicyName, ServedBy, SyntheticSpec
from tica_sim.trace import gen_synthetic

from helpers import build_tica, random_trace, reads, writes


def baseline(kind: Architecture, ssd_pages: int = 50, dram_pages: int = 10, roles=None) -> BaselineConfig:
    if roles is None:
        roles = ["wo_ssd"] if kind is Architecture.SINGLE_SSD else ["wo_ssd", "wo_ssd"]
    return BaselineConfig(
        kind=kind,
        members=[with_capacity(DEFAULT_CATALOG[role], ssd_pages) for role in roles],
        hdd=DEFAULT_CATALOG["hdd"],
        dram=with_capacity(DEFAULT_CATALOG["dram"], dram_pages) if kind is Architecture.MIRRORED_WB else None,
        internal_reserve_pages=0,
    )


class TestLayoutValidation:
    def test_tica_is_not_a_baseline(self):
        with pytest.raises(ValidationError):
            baseline(Architecture.TICA)

    def test_member_count(self):
        with pytest.raises(ValidationError):
            baseline(Architecture.SINGLE_SSD, roles=["wo_ssd", "wo_ssd"])

    def test_dram_only_on_mirrored_wb(self):
        with pytest.raises(ValidationError):
            BaselineConfig(
                kind=Architecture.RAID1_WO,
                members=[DEFAULT_CATALOG["wo_ssd"]] * 2,
                hdd=DEFAULT_CATALOG["hdd"],
                dram=DEFAULT_CATALOG["dram"],
            )


class TestMirroredWriteBack:
    def test_write_only_doubles_ssd_writes(self):
        stats = run_baseline(baseline(Architecture.MIRRORED_WB), writes(*range(30)))
        assert stats.devices["ssd_a"].writes == stats.devices["ssd_b"].writes == 30
        assert cwaf(stats) == pytest.approx(2.0)
        assert stats.architecture is Architecture.MIRRORED_WB

    def test_written_page_hits_dram(self):
        cache = MirroredCache(baseline(Architecture.MIRRORED_WB))
        cache.submit(writes(4)[0])
        [result] = cache.submit(reads(4)[0])
        assert result.served_by is ServedBy.DRAM_HIT

    def test_ssd_hit_after_dram_eviction(self):
        cache = MirroredCache(baseline(Architecture.MIRRORED_WB, dram_pages=1))
        for request in reads(1, 2, 1):
            [result] = cache.submit(request)
        assert result.served_by is ServedBy.SSD_HIT
        # queued behind the background fill of page 2
        assert result.latency_us == 90.0 + 110.0

    def test_read_miss_fills_both_members(self):
        cache = MirroredCache(baseline(Architecture.MIRRORED_WB))
        [result] = cache.submit(reads(9)[0])
        assert result.served_by is ServedBy.HDD_MISS
        assert result.latency_us == 5000.0
        assert cache.members[0].writes == cache.members[1].writes == 1
        assert 9 in cache.ssd_lru and 9 not in cache.dirty

    def test_dirty_eviction_writes_back(self):
        cache = MirroredCache(baseline(Architecture.MIRRORED_WB, ssd_pages=2))
        results = [r for request in writes(0, 1, 2) for r in cache.submit(request)]
        assert [(e.page, e.target) for e in results[-1].evictions] == [(0, EvictionTarget.HDD)]
        assert cache.hdd.writes == 1
        assert [m.trims for m in cache.members] == [1, 1]
        assert 0 not in cache.dirty

    def test_invariants_hold_on_random_trace(self):
        cache = MirroredCache(baseline(Architecture.MIRRORED_WB, ssd_pages=12, dram_pages=5))
        cache.checker = lambda engine, index: engine.check_invariants(index)
        cache.run(random_trace(4, 500, 40))
        assert len(cache.ssd_lru) <= 12


class TestRaidPairs:
    def test_mixed_pair_write_waits_for_slow_member(self):
        cache = MirroredCache(baseline(Architecture.RAID1_MIXED, roles=["ro_ssd", "wo_ssd"]))
        [result] = cache.submit(writes(1)[0])
        assert result.latency_us == 900.0

    def test_mixed_pair_reads_from_faster_member(self):
        cache = MirroredCache(baseline(Architecture.RAID1_MIXED, roles=["ro_ssd", "wo_ssd"]))
        cache.submit(writes(1)[0])
        [result] = cache.submit(reads(1)[0])
        assert result.served_by is ServedBy.SSD_HIT
        assert result.latency_us == 90.0
        assert cache.reader.model.name == "RO-SSD"

    def test_single_ssd_writes_once(self):
        single = run_baseline(baseline(Architecture.SINGLE_SSD), writes(*range(30)))
        mirrored = run_baseline(baseline(Architecture.RAID1_WO), writes(*range(30)))
        assert cwaf(single) == pytest.approx(1.0)
        assert cwaf(mirrored) == pytest.approx(2.0)


class TestSingleVersusMirrored:
    SEEDS = range(20)

    @staticmethod
    def zipf_trace(seed: int):
        return gen_synthetic(SyntheticSpec(request_count=2000, working_set_pages=400, read_fraction=0.7, rng_seed=seed))

    def test_single_ssd_of_same_size_hits_less(self):
        wins = 0
        for seed in self.SEEDS:
            trace = self.zipf_trace(seed)
            single = run_baseline(baseline(Architecture.SINGLE_SSD, ssd_pages=50), trace)
            mirrored = run_baseline(baseline(Architecture.MIRRORED_WB, ssd_pages=50, dram_pages=10), trace)
            wins += single.cache_hits <= mirrored.cache_hits
        assert wins > len(self.SEEDS) // 2

    def test_single_ssd_with_the_dram_pages_added_hits_more(self):
        # an SSD of ssd+dram pages sees every access in recency order
        wins = 0
        for seed in self.SEEDS:
            trace = self.zipf_trace(seed)
            single = run_baseline(baseline(Architecture.SINGLE_SSD, ssd_pages=60), trace)
            mirrored = run_baseline(baseline(Architecture.MIRRORED_WB, ssd_pages=50, dram_pages=10), trace)
            wins += single.cache_hits >= mirrored.cache_hits
        assert wins > len(self.SEEDS) // 2

    def test_dram_refreshes_can_age_a_page_out_of_the_mirrored_ssds(self):
        # page 0 stays hot in DRAM while the SSD LRU only sees the misses
        trace = reads(0, 1, 0, 2, 0, 3, 0, 4, 5, 0)
        single = run_baseline(baseline(Architecture.SINGLE_SSD, ssd_pages=3), trace)
        mirrored = run_baseline(baseline(Architecture.MIRRORED_WB, ssd_pages=3, dram_pages=2), trace)
        assert (single.cache_hits, mirrored.cache_hits) == (4, 3)


def test_ef_spares_ssds_on_read_misses():
    trace = reads(*range(40)) * 2
    tica = build_tica(dram_pages=10, ssd_pages=50, policy=PolicyName.EF).run(trace)
    mirrored = run_baseline(baseline(Architecture.MIRRORED_WB), trace)
    tica_ssd_writes = tica.devices["ro_ssd"].writes + tica.devices["wo_ssd"].writes
    mirrored_ssd_writes = mirrored.devices["ssd_a"].writes + mirrored.devices["ssd_b"].writes
    assert tica_ssd_writes == 0
    assert mirrored_ssd_writes == 80
