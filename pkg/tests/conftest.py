import pytest

from tica_sim.devices import DEFAULT_CATALOG

from helpers import build_tica


@pytest.fixture
def make_tica():
    return build_tica


@pytest.fixture
def catalog():
    return dict(DEFAULT_CATALOG)


@pytest.fixture
def msr_file(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text(
        "Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime\n"
        "128166372003061629,hm,1,Read,8192,4096,559\n"
        "128166372013061629,hm,1,Write,6144,4096,100\n"
        "128166372023061629,hm,1,Read,0,8192,120\n"
    )
    return path


@pytest.fixture
def synthetic_config():
    """Plain-dict experiment config over a small synthetic workload."""
    return {
        "synthetic": {
            "request_count": 600,
            "read_fraction": 0.7,
            "working_set_pages": 300,
            "locality": "zipf",
            "rng_seed": 3,
        },
        "sizing": {"dram_pages": 16, "ssd_pages": 40, "internal_reserve_pages": 4},
        "policy": "adaptive",
    }
