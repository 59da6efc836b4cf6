"""Queue-group configuration, delay bounds, cycle constraints, and capacity.

A Multi-CQF egress port runs 1..3 queue groups.  A 2-queue group forwards a
frame to the next node every cycle; a 3-queue group additionally holds frames
in a tolerating queue, charging up to one extra cycle per switch.  The
constraint catalog used throughout (and in validation messages) is:

  C1  worst-case delay within deadline
  C2  hyperperiod = lcm of periods
  C3  frames per hyperperiod = H / period
  C4  cycle >= transmit time of the largest frame plus overheads (t_min)
  C5  cycle <= gcd of periods (t_max)
  C6  hyperperiod divisible by every group cycle
  C7  every period divisible by every group cycle
  C8  t_min <= cycle <= t_max
  C9  group cycles strictly increasing
  C10 each group cycle divides the next
  C11 per-link average rate within the group's bandwidth share
  C12 injection offset below period / cycle
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidParams
from .topology import Network, NodeKind, Route
from .traffic import FlowSet, TTFlow, frame_count


@dataclass(frozen=True)
class SyncOverheads:
    """Lumped per-cycle overheads: processing, propagation, sync error (us)."""

    proc_us: float = 1.0
    prop_us: float = 0.5
    sync_us: float = 0.5

    @property
    def total_us(self) -> float:
        return self.proc_us + self.prop_us + self.sync_us


@dataclass(frozen=True)
class QueueGroupConfig:
    """One CQF (2 queues) or CSQF (3 queues) instance on the egress port."""

    index: int
    cycle_us: int
    queue_count: int
    share: float

    def __post_init__(self):
        if self.index not in (1, 2, 3):
            raise InvalidParams("queue group index must be 1, 2, or 3")
        if self.cycle_us <= 0:
            raise InvalidParams("cycle must be > 0")
        if self.queue_count not in (2, 3):
            raise InvalidParams("queue count must be 2 or 3")
        if not 0 < self.share <= 1:
            raise InvalidParams("bandwidth share must be in (0, 1]")


@dataclass(frozen=True)
class McqfConfig:
    """Ordered queue groups plus overhead decomposition.

    Validates the cycle-chain constraints: strictly increasing cycles (C9)
    and divisibility of each cycle by its predecessor (C10).
    """

    groups: tuple[QueueGroupConfig, ...]
    xi: SyncOverheads = field(default_factory=SyncOverheads)

    def __post_init__(self):
        if not 1 <= len(self.groups) <= 3:
            raise InvalidParams("need 1 to 3 queue groups")
        object.__setattr__(self, "groups", tuple(self.groups))
        for want, qg in enumerate(self.groups, start=1):
            if qg.index != want:
                raise InvalidParams("group indices must be 1..n in order")
        cycles = [qg.cycle_us for qg in self.groups]
        for lo, hi in zip(cycles, cycles[1:]):
            if not lo < hi:
                raise InvalidConfig("C9", f"cycles must strictly increase, got {cycles}")
            if hi % lo != 0:
                raise InvalidConfig("C10", f"{hi} is not a multiple of {lo}")
        if sum(qg.share for qg in self.groups) > 1 + 1e-9:
            raise InvalidParams("bandwidth shares must sum to <= 1")

    @property
    def cycles(self) -> tuple[int, ...]:
        return tuple(qg.cycle_us for qg in self.groups)

    def to_json_dict(self) -> dict:
        return {
            "groups": [
                {"cycle_us": qg.cycle_us, "queues": qg.queue_count, "share": qg.share}
                for qg in self.groups
            ],
            "xi_us": {
                "proc": self.xi.proc_us,
                "prop": self.xi.prop_us,
                "sync": self.xi.sync_us,
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "McqfConfig":
        groups = tuple(
            QueueGroupConfig(i + 1, int(g["cycle_us"]), int(g["queues"]), float(g["share"]))
            for i, g in enumerate(data["groups"])
        )
        xi = data.get("xi_us", {})
        return cls(
            groups,
            SyncOverheads(
                float(xi.get("proc", 1.0)),
                float(xi.get("prop", 0.5)),
                float(xi.get("sync", 0.5)),
            ),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "McqfConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def default_config(cycles: Sequence[int], queue_counts: Sequence[int] = (3, 2, 2),
                   shares: Sequence[float] = (0.4, 0.3, 0.2),
                   xi: SyncOverheads = SyncOverheads()) -> McqfConfig:
    """Build a config from parallel per-group sequences (1 to 3 groups)."""
    n = len(cycles)
    if not (len(queue_counts) >= n and len(shares) >= n):
        raise InvalidParams("need a queue count and share for every cycle")
    groups = tuple(
        QueueGroupConfig(i + 1, int(cycles[i]), int(queue_counts[i]), float(shares[i]))
        for i in range(n)
    )
    return McqfConfig(groups, xi)


# ---------------------------------------------------------------------------
# Delay formulas and deadline check
# ---------------------------------------------------------------------------

def queuing_delay(qg: QueueGroupConfig) -> int:
    """Worst-case per-switch queuing delay: one cycle with a tolerating queue."""
    return qg.cycle_us if qg.queue_count == 3 else 0


def wcd(phi: int, sw_num: int, qg: QueueGroupConfig) -> int:
    """Worst-case end-to-end delay in us for an offset and switch count.

    One cycle per hop (switch count + 1 hops), phi cycles of injection delay
    at the source, plus the per-switch tolerating-queue penalty.
    """
    return (phi + sw_num + 1) * qg.cycle_us + sw_num * queuing_delay(qg)


def check_deadline(flow: TTFlow, route: Route, qg: QueueGroupConfig, phi: int) -> bool:
    """C1: the route's worst-case delay fits the flow's deadline."""
    return wcd(phi, route.switch_count, qg) <= flow.deadline_us


# ---------------------------------------------------------------------------
# Cycle bounds and candidate enumeration
# ---------------------------------------------------------------------------

def t_min(flows: FlowSet, bw_bps: int, xi_us: float) -> int:
    """Smallest admissible cycle: largest frame's transmit time plus overheads,
    rounded up to a whole microsecond."""
    if bw_bps <= 0:
        raise InvalidParams("bandwidth must be > 0")
    largest = max(f.size_b for f in flows)
    exact = Fraction(largest * 8 * 1_000_000, bw_bps) + Fraction(str(xi_us))
    return math.ceil(exact)


def t_max(flows: FlowSet) -> int:
    """Largest admissible cycle: gcd of all flow periods."""
    return math.gcd(*(f.period_us for f in flows))


def candidate_cycles(flows: FlowSet, bw_bps: int, xi_us: float) -> list[int]:
    """All cycle lengths satisfying C6, C7, and C8, sorted ascending.

    Any value dividing the period gcd divides every period and the
    hyperperiod, so candidates are exactly the gcd's divisors at or above
    t_min.  Returns an empty list when t_min exceeds t_max.
    """
    lo = t_min(flows, bw_bps, xi_us)
    hi = t_max(flows)
    hp = flows.hyperperiod_us
    out = []
    for t in range(lo, hi + 1):
        if hi % t == 0 and hp % t == 0 and all(f.period_us % t == 0 for f in flows):
            out.append(t)
    return out


def validate_combination(t1: int, t2: int, t3: int, candidates: Sequence[int]) -> bool:
    """True iff the triple satisfies C9 (increasing) and C10 (divisibility chain)."""
    cand = set(candidates)
    if not {t1, t2, t3} <= cand:
        return False
    return t1 < t2 < t3 and t2 % t1 == 0 and t3 % t2 == 0


# ---------------------------------------------------------------------------
# Bandwidth budgets
# ---------------------------------------------------------------------------

def _share_fraction(share: float) -> Fraction:
    # Decimal-faithful so 0.4 of 1 Gbps is exactly 400 Mbps.
    return Fraction(str(share))


def share_bits(share: float, bw_bps: int, cycle_us: int) -> int:
    """Bits a bandwidth share may transmit during one cycle (floored)."""
    exact = _share_fraction(share) * bw_bps * Fraction(cycle_us, 1_000_000)
    return math.floor(exact)


def bits_per_cycle(qg: QueueGroupConfig, bw_bps: int) -> int:
    """Bits the group may transmit on one link during one cycle (floored)."""
    return share_bits(qg.share, bw_bps, qg.cycle_us)


def flow_rate_bps(flow: TTFlow) -> Fraction:
    """Average rate of a flow in bits per second."""
    return Fraction(flow.size_b * 8 * 1_000_000, flow.period_us)


def avg_rate_check(
    assignment: Mapping[int, Sequence[tuple[TTFlow, Route]]],
    net: Network,
    shares: Sequence[float],
) -> dict[tuple[tuple[int, int], int], bool]:
    """C11: per-(link, group) average-rate check against the group's share.

    ``assignment`` maps group index (1-based) to (flow, route) pairs.  The
    result maps (link endpoints, group index) to pass/fail for every link
    carrying at least one flow of that group; violations are reported, never
    raised.
    """
    bw = net.bandwidth_bps
    loads: dict[tuple[tuple[int, int], int], Fraction] = {}
    for gidx, pairs in assignment.items():
        for flow, route in pairs:
            rate = flow_rate_bps(flow)
            for link in route.links():
                key = (link, gidx)
                loads[key] = loads.get(key, Fraction(0)) + rate
    result = {}
    for (link, gidx), load in loads.items():
        budget = _share_fraction(shares[gidx - 1]) * bw
        result[(link, gidx)] = load <= budget
    return result


def ti_bound(flow: TTFlow, qg: QueueGroupConfig) -> int:
    """C12: exclusive upper bound on the injection offset, period / cycle."""
    return flow.period_us // qg.cycle_us


# ---------------------------------------------------------------------------
# Capacity ledger
# ---------------------------------------------------------------------------

def slot_offsets(route: Route, net: Network, tolerating: bool) -> list[tuple[int, int]]:
    """(link index, slot offset) per hop for a frame entering at cycle 0.

    Hop h transmits h cycles after injection; with a tolerating queue every
    switch already traversed adds one further cycle.
    """
    out = []
    switches_before = 0
    for h, (u, v) in enumerate(zip(route.nodes, route.nodes[1:])):
        if h > 0 and net.kind(u) is NodeKind.SWITCH:
            switches_before += 1
        offset = h + (switches_before if tolerating else 0)
        out.append((net.link_index(u, v), offset))
    return out


class CapacityLedger:
    """Per-(link, group, cycle-slot) bit occupancy over one hyperperiod.

    Placement is atomic: a rejected flow leaves every counter untouched.
    """

    def __init__(self, config: McqfConfig, net: Network, hyperperiod_us: int):
        self.config = config
        self.net = net
        self.hyperperiod_us = hyperperiod_us
        n_links = len(net.links)
        self._slots: list[np.ndarray] = []
        self._caps: list[int] = []
        for qg in config.groups:
            if hyperperiod_us % qg.cycle_us != 0:
                raise InvalidConfig(
                    "C6", f"hyperperiod {hyperperiod_us} not divisible by {qg.cycle_us}"
                )
            self._slots.append(
                np.zeros((n_links, hyperperiod_us // qg.cycle_us), dtype=np.int64)
            )
            self._caps.append(bits_per_cycle(qg, net.bandwidth_bps))

    def counters(self, group_index: int) -> np.ndarray:
        """Bit counters for a 1-based group index, shaped (links, slots)."""
        return self._slots[group_index - 1]

    def capacity(self, group_index: int) -> int:
        return self._caps[group_index - 1]

    def placement_cells(
        self, flow: TTFlow, route: Route, group_index: int, phi: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """(link indices, slot indices) every frame of the flow would occupy."""
        qg = self.config.groups[group_index - 1]
        if flow.period_us % qg.cycle_us != 0:
            raise InvalidConfig(
                "C7", f"period {flow.period_us} not divisible by cycle {qg.cycle_us}"
            )
        if not 0 <= phi < ti_bound(flow, qg):
            raise InvalidParams(f"offset {phi} outside C12 bound for flow {flow.id}")
        n_slots = self.hyperperiod_us // qg.cycle_us
        stride = flow.period_us // qg.cycle_us
        frames = frame_count(flow, self.hyperperiod_us)
        hops = slot_offsets(route, self.net, tolerating=qg.queue_count == 3)
        links = np.array([l for l, _ in hops], dtype=np.int64)
        offsets = np.array([o for _, o in hops], dtype=np.int64)
        starts = np.arange(frames, dtype=np.int64) * stride + phi
        slot_idx = (starts[:, None] + offsets[None, :]) % n_slots
        link_idx = np.broadcast_to(links, (frames, len(links)))
        return link_idx.reshape(-1), slot_idx.reshape(-1)

    def try_place_flow(
        self, flow: TTFlow, route: Route, group_index: int, phi: int
    ) -> bool:
        """Reserve capacity for every frame of the flow along the route.

        Commits and returns True only if every touched slot stays within the
        group's per-cycle bit budget; otherwise nothing changes.
        """
        links, slots = self.placement_cells(flow, route, group_index, phi)
        grid = self._slots[group_index - 1]
        bits = flow.size_b * 8
        if np.any(grid[links, slots] + bits > self._caps[group_index - 1]):
            return False
        # Cells are pairwise distinct for one placement (each hop uses a
        # different link; frames of one flow land in different slots), so a
        # fancy-indexed += adds every reservation exactly once.
        grid[links, slots] += bits
        return True
