"""Builders shared by the test modules."""

import random
from typing import List

from tica_sim.cache_core import TicaCache
from tica_sim.devices import DEFAULT_CATALOG, with_capacity
from tica_sim.models import Op, PolicyName, Request


def build_tica(dram_pages=10, ssd_pages=10, policy=PolicyName.EF, ro_pages=None, **kwargs) -> TicaCache:
    """TICA cache with exact usable capacities (no internal reserve)."""
    return TicaCache(
        with_capacity(DEFAULT_CATALOG["dram"], dram_pages),
        with_capacity(DEFAULT_CATALOG["ro_ssd"], ro_pages or ssd_pages),
        with_capacity(DEFAULT_CATALOG["wo_ssd"], ssd_pages),
        DEFAULT_CATALOG["hdd"],
        policy=policy,
        internal_reserve_pages=0,
        **kwargs,
    )


def random_trace(seed: int, length: int, pages: int, read_fraction: float = 0.6) -> List[Request]:
    rng = random.Random(seed)
    return [
        Request(
            arrival_us=i,
            lba=rng.randrange(pages),
            pages=rng.choice((1, 1, 1, 2)),
            op=Op.READ if rng.random() < read_fraction else Op.WRITE,
        )
        for i in range(length)
    ]


def reads(*lbas) -> List[Request]:
    return [Request(lba=lba, op=Op.READ) for lba in lbas]


def writes(*lbas) -> List[Request]:
    return [Request(lba=lba, op=Op.WRITE) for lba in lbas]
