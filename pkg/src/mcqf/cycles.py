"""Heuristic search for the best queue-group cycle combination.

Enumerates every cycle triple allowed by the candidate list (C9/C10), scores
each one with a cheap greedy pass (shortest route, zero offset), and keeps
the first triple attaining the highest schedulability.  This runs before the
metaheuristics and is independent of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from .core import (
    CapacityLedger,
    McqfConfig,
    SyncOverheads,
    candidate_cycles,
    check_deadline,
    default_config,
    flow_rate_bps,
    _share_fraction,
)
from .errors import NoFeasibleCombination
from .mapping import MappingStrategy, QgAssignment, map_flows
from .topology import Network, Route, k_shortest_paths
from .traffic import FlowSet


@dataclass(frozen=True)
class CycleCombination:
    cycles: tuple[int, int, int]
    score: float


def enumerate_combinations(candidates: Sequence[int]) -> list[tuple[int, int, int]]:
    """All (T1, T2, T3) triples from the candidates passing C9 and C10."""
    cand = sorted(candidates)
    out = []
    for t1, t2, t3 in combinations(cand, 3):
        if t2 % t1 == 0 and t3 % t2 == 0:
            out.append((t1, t2, t3))
    return out


def greedy_schedulability(
    net: Network,
    flows: FlowSet,
    config: McqfConfig,
    assignment: QgAssignment,
    routes: dict[int, Route],
) -> float:
    """Scheduled fraction under shortest routes and zero offsets.

    A flow counts as scheduled when it passes the deadline check (C1), keeps
    every crossed link within its group's average-rate budget (C11), and fits
    the per-slot bit budgets of the capacity ledger.
    """
    ledger = CapacityLedger(config, net, flows.hyperperiod_us)
    bw = net.bandwidth_bps
    budgets = [_share_fraction(qg.share) * bw for qg in config.groups]
    loads: dict[tuple[tuple[int, int], int], Fraction] = {}
    scheduled = 0
    for gidx, ids in enumerate(assignment.groups, start=1):
        if gidx > len(config.groups):
            break
        qg = config.groups[gidx - 1]
        for fid in ids:
            flow = flows.by_id(fid)
            route = routes[fid]
            if flow.period_us % qg.cycle_us != 0:
                continue
            if not check_deadline(flow, route, qg, 0):
                continue
            rate = flow_rate_bps(flow)
            keys = [(link, gidx) for link in route.links()]
            if any(loads.get(k, Fraction(0)) + rate > budgets[gidx - 1] for k in keys):
                continue
            if not ledger.try_place_flow(flow, route, gidx, 0):
                continue
            for k in keys:
                loads[k] = loads.get(k, Fraction(0)) + rate
            scheduled += 1
    return scheduled / len(flows)


def shortest_routes(net: Network, flows: FlowSet) -> dict[int, Route]:
    """One shortest route per flow id."""
    return {f.id: k_shortest_paths(net, f.src, f.dst, 1)[0] for f in flows}


def best_cycle_combination(
    net: Network,
    flows: FlowSet,
    bw_bps: int | None = None,
    shares: Sequence[float] = (0.4, 0.3, 0.2),
    mapping_strategy: MappingStrategy | str = MappingStrategy.DBM,
    *,
    queue_counts: Sequence[int] = (3, 2, 2),
    xi: SyncOverheads = SyncOverheads(),
    splits: Sequence[float] = (0.5, 0.3, 0.2),
    mapping_seed: int = 0,
    scored: list[CycleCombination] | None = None,
) -> CycleCombination:
    """Best-scoring valid cycle triple for the flow set on this network.

    Ties break toward the smaller triple because enumeration is ascending
    and only strict improvements replace the incumbent.  Pass ``scored`` to
    collect every evaluated combination.
    """
    bw = net.bandwidth_bps if bw_bps is None else bw_bps
    cands = candidate_cycles(flows, bw, xi.total_us)
    combos = enumerate_combinations(cands)
    if not combos:
        raise NoFeasibleCombination(
            f"no valid cycle triple among candidates {cands}"
        )
    routes = shortest_routes(net, flows)
    assignment = map_flows(flows, mapping_strategy, splits, seed=mapping_seed)
    best: CycleCombination | None = None
    for combo in combos:
        config = default_config(combo, queue_counts, shares, xi)
        score = greedy_schedulability(net, flows, config, assignment, routes)
        entry = CycleCombination(combo, score)
        if scored is not None:
            scored.append(entry)
        if best is None or score > best.score:
            best = entry
    return best
