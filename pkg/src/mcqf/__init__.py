"""Multi-CQF configuration toolkit for time-sensitive networks.

Builds TSN topologies and periodic flow sets, derives feasible queue-group
cycle combinations, maps flows to queue groups, and searches routes plus
injection offsets with SA / GA / GASA to maximize the number of scheduled
flows under deadline and bandwidth constraints.
"""

from .core import (
    CapacityLedger,
    McqfConfig,
    QueueGroupConfig,
    SyncOverheads,
    avg_rate_check,
    bits_per_cycle,
    candidate_cycles,
    check_deadline,
    default_config,
    queuing_delay,
    t_max,
    t_min,
    ti_bound,
    validate_combination,
    wcd,
)
from .cycles import (
    CycleCombination,
    best_cycle_combination,
    enumerate_combinations,
    greedy_schedulability,
)
from .errors import (
    DisconnectedGraph,
    InsufficientEndStations,
    InvalidConfig,
    InvalidParams,
    InvalidSplits,
    McqfError,
    NoFeasibleCombination,
    NodeNotFound,
    NonDivisible,
    NoPath,
)
from .mapping import MappingStrategy, QgAssignment, map_flows, single_group_assignment
from .optimizers import (
    CrossoverMode,
    FitnessBreakdown,
    Individual,
    RunResult,
    SearchContext,
    SearchParams,
    crossover,
    evaluate_solution,
    fitness,
    mutate,
    run_ga,
    run_gasa,
    run_sa,
)
from .topology import (
    Link,
    Network,
    Node,
    NodeKind,
    Route,
    TopologyKind,
    generate_topology,
    k_shortest_paths,
)
from .traffic import (
    FlowSet,
    TestCaseKind,
    TTFlow,
    frame_count,
    generate_testcase,
    hyperperiod,
)

__version__ = "0.1.0"
