"""Time-triggered flows and the four synthetic test-case families.

A flow is the tuple (id, src, dst, period, deadline, size); sizes include
headers, times are integer microseconds.  Families:

* RSD -- periods {1000, 2500, 5000, 10000} us, sizes 55..1500 B, deadline < period
* TSD -- periods {100, 500, 1000} us, sizes 55..200 B, deadline < period
* RLD -- RSD periods/sizes with deadline == period
* TLD -- TSD periods/sizes with deadline == period
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InsufficientEndStations, InvalidParams, NonDivisible
from .topology import Network

SIZE_MIN_B = 55
SIZE_MAX_B = 1500


@dataclass(frozen=True)
class TTFlow:
    id: int
    src: int
    dst: int
    period_us: int
    deadline_us: int
    size_b: int

    def __post_init__(self):
        if self.period_us <= 0:
            raise InvalidParams(f"flow {self.id}: period must be > 0")
        if not 0 < self.deadline_us <= self.period_us:
            raise InvalidParams(f"flow {self.id}: deadline must be in (0, period]")
        if not SIZE_MIN_B <= self.size_b <= SIZE_MAX_B:
            raise InvalidParams(
                f"flow {self.id}: size must be in [{SIZE_MIN_B}, {SIZE_MAX_B}] B"
            )
        if self.src == self.dst:
            raise InvalidParams(f"flow {self.id}: src and dst must differ")


class FlowSet:
    """Ordered, immutable collection of flows with a cached hyperperiod."""

    def __init__(self, flows: Iterable[TTFlow]):
        self._flows = tuple(flows)
        if not self._flows:
            raise InvalidParams("flow set must not be empty")
        ids = [f.id for f in self._flows]
        if len(set(ids)) != len(ids):
            raise InvalidParams("duplicate flow ids")
        self._by_id = {f.id: f for f in self._flows}
        self._hyperperiod = math.lcm(*(f.period_us for f in self._flows))

    def __len__(self) -> int:
        return len(self._flows)

    def __iter__(self) -> Iterator[TTFlow]:
        return iter(self._flows)

    def __getitem__(self, i: int) -> TTFlow:
        return self._flows[i]

    @property
    def flows(self) -> tuple[TTFlow, ...]:
        return self._flows

    @property
    def hyperperiod_us(self) -> int:
        return self._hyperperiod

    def by_id(self, flow_id: int) -> TTFlow:
        return self._by_id[flow_id]

    def to_json_dict(self) -> dict:
        return {
            "flows": [
                {
                    "id": f.id,
                    "src": f.src,
                    "dst": f.dst,
                    "period_us": f.period_us,
                    "deadline_us": f.deadline_us,
                    "size_b": f.size_b,
                }
                for f in self._flows
            ]
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FlowSet":
        return cls(
            TTFlow(
                int(f["id"]),
                int(f["src"]),
                int(f["dst"]),
                int(f["period_us"]),
                int(f["deadline_us"]),
                int(f["size_b"]),
            )
            for f in data["flows"]
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FlowSet":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


class TestCaseKind(str, Enum):
    RSD = "rsd"
    TSD = "tsd"
    RLD = "rld"
    TLD = "tld"


_FAMILY = {
    TestCaseKind.RSD: ((1000, 2500, 5000, 10000), (55, 1500), False),
    TestCaseKind.TSD: ((100, 500, 1000), (55, 200), False),
    TestCaseKind.RLD: ((1000, 2500, 5000, 10000), (55, 1500), True),
    TestCaseKind.TLD: ((100, 500, 1000), (55, 200), True),
}


def generate_testcase(
    kind: TestCaseKind | str, net: Network, n_flows: int, seed: int
) -> FlowSet:
    """Draw a reproducible flow set of the given family on the network.

    Endpoints are distinct end stations chosen uniformly.  For the small
    deadline families the deadline is uniform over [period/2, period).
    """
    kind = TestCaseKind(kind)
    if n_flows < 1:
        raise InvalidParams("n_flows must be >= 1")
    stations = net.end_stations()
    if len(stations) < 2:
        raise InsufficientEndStations(
            f"need >= 2 end stations, network has {len(stations)}"
        )
    periods, (size_lo, size_hi), deadline_is_period = _FAMILY[kind]
    rng = random.Random(seed)
    flows = []
    for i in range(n_flows):
        src, dst = rng.sample(stations, 2)
        period = rng.choice(periods)
        size = rng.randint(size_lo, size_hi)
        if deadline_is_period:
            deadline = period
        else:
            deadline = rng.randint(period // 2, period - 1)
        flows.append(TTFlow(i, src, dst, period, deadline, size))
    return FlowSet(flows)


def hyperperiod(flows: FlowSet) -> int:
    """Least common multiple of all flow periods, in microseconds."""
    return flows.hyperperiod_us


def frame_count(flow: TTFlow, hyperperiod_us: int) -> int:
    """Number of frames the flow sends within one hyperperiod."""
    if hyperperiod_us % flow.period_us != 0:
        raise NonDivisible(
            f"hyperperiod {hyperperiod_us} not divisible by period {flow.period_us}"
        )
    return hyperperiod_us // flow.period_us
