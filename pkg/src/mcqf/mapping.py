"""Flow sorting and flow-to-queue-group mapping.

Partitioning flows across queue groups before optimization shrinks the
search space: each flow only explores offsets within its own group's cycle.
Strategies: deadline-based (DBM), periodicity-based (PBM), random (RM).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import InvalidSplits
from .traffic import FlowSet


class MappingStrategy(str, Enum):
    DBM = "dbm"
    PBM = "pbm"
    RM = "rm"


@dataclass(frozen=True)
class QgAssignment:
    """Disjoint ordered flow-id lists for QG1, QG2, QG3.

    The order within each group is the scheduling order fed to the
    optimizers.
    """

    groups: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]
    splits: tuple[float, float, float]

    def group_of(self) -> dict[int, int]:
        """Flow id -> 1-based group index."""
        out = {}
        for gidx, ids in enumerate(self.groups, start=1):
            for fid in ids:
                out[fid] = gidx
        return out

    def ordered_ids(self) -> list[int]:
        """All flow ids in scheduling order (QG1 first)."""
        return [fid for ids in self.groups for fid in ids]


def group_sizes(n: int, splits: Sequence[float]) -> tuple[int, int, int]:
    """Half-up rounded sizes for QG1 and QG2; QG3 takes the remainder."""
    l, m, _ = splits
    n1 = min(int(l * n + 0.5), n)
    n2 = min(int(m * n + 0.5), n - n1)
    return n1, n2, n - n1 - n2


def map_flows(
    flows: FlowSet,
    strategy: MappingStrategy | str,
    splits: Sequence[float] = (0.5, 0.3, 0.2),
    seed: int = 0,
) -> QgAssignment:
    """Partition flows into three queue groups at the given split fractions.

    DBM sorts ascending by deadline, PBM by period (flow id breaks ties);
    the first l share goes to QG1, the next m share to QG2, the rest to QG3.
    RM partitions a seeded uniform shuffle at the same sizes.
    """
    strategy = MappingStrategy(strategy)
    splits = tuple(float(s) for s in splits)
    if len(splits) != 3 or any(s <= 0 for s in splits) or abs(sum(splits) - 1) > 1e-9:
        raise InvalidSplits(f"splits must be three positive fractions summing to 1, got {splits}")
    if strategy is MappingStrategy.DBM:
        ordered = sorted(flows, key=lambda f: (f.deadline_us, f.id))
    elif strategy is MappingStrategy.PBM:
        ordered = sorted(flows, key=lambda f: (f.period_us, f.id))
    else:
        ordered = list(flows)
        random.Random(seed).shuffle(ordered)
    ids = [f.id for f in ordered]
    n1, n2, _ = group_sizes(len(ids), splits)
    groups = (tuple(ids[:n1]), tuple(ids[n1 : n1 + n2]), tuple(ids[n1 + n2 :]))
    return QgAssignment(groups, splits)


def single_group_assignment(flows: FlowSet) -> QgAssignment:
    """All flows in QG1, in flow-id order (plain CQF / CSQF operation)."""
    ids = tuple(sorted(f.id for f in flows))
    return QgAssignment((ids, (), ()), (1.0, 0.0, 0.0))
