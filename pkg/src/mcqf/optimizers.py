"""Metaheuristic search over per-flow route choices and injection offsets.

Three algorithms share one encoding: for every flow (in queue-group order) an
individual carries a route index, the derived switch count, and an injection
offset in cycles.  Fitness combines the normalized worst-case delay with
penalty terms for deadline (C1) and bandwidth (C11) violations; lower is
better.  SA anneals a single solution, GA evolves a population with elitist
halving, and GASA replaces GA's random mutation with a bounded inner
annealing search and admits weaker parents with a temperature-dependent
probability.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    McqfConfig,
    bits_per_cycle,
    queuing_delay,
    slot_offsets,
    ti_bound,
    _share_fraction,
)
from .errors import InvalidConfig, InvalidParams
from .mapping import QgAssignment
from .topology import Network, Route, k_shortest_paths
from .traffic import FlowSet, TTFlow


class CrossoverMode(str, Enum):
    WHOLE_FLOW = "wholeflow"
    GENE_MIX = "genemix"


@dataclass
class SearchParams:
    population_size: int = 50
    elite_fraction: float = 0.5
    mutation_rate: float = 0.1
    crossover_mode: CrossoverMode = CrossoverMode.WHOLE_FLOW
    sa_initial_temp: float = 1.0
    sa_cooling: float = 0.95
    sa_iterations: int = 2000
    stall_limit: int = 50
    max_generations: int = 100
    gasa_inner_iterations: int = 20
    seed: int = 0
    ti_enabled: bool = False
    alpha: float = 2.0
    beta: float = 2.0

    def __post_init__(self):
        if self.population_size < 4:
            raise InvalidParams("population_size must be >= 4")
        if not 0 < self.elite_fraction < 1:
            raise InvalidParams("elite_fraction must be in (0, 1)")
        if not 0 <= self.mutation_rate <= 1:
            raise InvalidParams("mutation_rate must be in [0, 1]")
        for name in ("sa_initial_temp", "sa_cooling", "sa_iterations",
                     "stall_limit", "max_generations", "gasa_inner_iterations"):
            if getattr(self, name) <= 0:
                raise InvalidParams(f"{name} must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParams("alpha and beta must be >= 0")
        self.crossover_mode = CrossoverMode(self.crossover_mode)


@dataclass(frozen=True)
class FitnessBreakdown:
    delay_term: float
    c1_violations: int
    c11_violations: int
    total: float
    scheduled: int


@dataclass
class Individual:
    """Per-flow (route index, switch count, injection offset) state vector."""

    route_idx: list[int]
    sw_count: list[int]
    phi: list[int]
    fitness: FitnessBreakdown | None = None

    def clone(self) -> "Individual":
        return Individual(
            list(self.route_idx), list(self.sw_count), list(self.phi), self.fitness
        )


class SearchContext:
    """Frozen problem instance: flows in group order with candidate routes,
    per-route placement cells, and per-group budgets.

    Evaluation owns no shared mutable state; every call builds a private
    occupancy grid, so contexts are safe to reuse across runs.
    """

    def __init__(
        self,
        net: Network,
        flows: FlowSet,
        assignment: QgAssignment,
        config: McqfConfig,
        k_routes: int = 4,
        ti_enabled: bool = False,
    ):
        self.net = net
        self.flows = flows
        self.assignment = assignment
        self.config = config
        self.k_routes = k_routes
        self.ti_enabled = ti_enabled
        self.hyperperiod_us = flows.hyperperiod_us

        group_of = assignment.group_of()
        missing = {f.id for f in flows} - set(group_of)
        if missing:
            raise InvalidParams(f"assignment misses flows {sorted(missing)}")

        self.order: list[TTFlow] = [flows.by_id(fid) for fid in assignment.ordered_ids()]
        self.n_flows = len(self.order)
        self.group_idx: list[int] = []          # 1-based queue group per flow
        self.routes: list[list[Route]] = []
        self.deadline: list[int] = []
        self.bits: list[int] = []
        self.wcd_base: list[list[int]] = []     # per flow, per route: wcd at phi=0
        self.cycle: list[int] = []
        self.bound: list[int] = []              # effective offset bound (1 if TI off)
        self._cells: list[list[tuple[np.ndarray, np.ndarray]]] = []
        self._route_links: list[list[np.ndarray]] = []
        self._rate_scaled: list[int] = []

        h = self.hyperperiod_us
        n_links = len(net.links)
        self.n_links = n_links
        self.n_groups = len(config.groups)
        self.n_slots = [h // qg.cycle_us for qg in config.groups]
        self.cap = [bits_per_cycle(qg, net.bandwidth_bps) for qg in config.groups]
        # Budget num/den so "load <= share * bw * H" compares as integers.
        self._budget = []
        for qg in config.groups:
            frac = _share_fraction(qg.share) * net.bandwidth_bps * h
            self._budget.append((frac.numerator, frac.denominator))

        for flow in self.order:
            gidx = group_of[flow.id]
            if gidx > len(config.groups):
                raise InvalidParams(
                    f"flow {flow.id} mapped to group {gidx}, config has {len(config.groups)}"
                )
            qg = config.groups[gidx - 1]
            if flow.period_us % qg.cycle_us != 0:
                raise InvalidConfig(
                    "C7", f"period {flow.period_us} not divisible by cycle {qg.cycle_us}"
                )
            self.group_idx.append(gidx)
            self.cycle.append(qg.cycle_us)
            self.deadline.append(flow.deadline_us)
            self.bits.append(flow.size_b * 8)
            self.bound.append(ti_bound(flow, qg) if ti_enabled else 1)
            self._rate_scaled.append(flow.size_b * 8 * 1_000_000 * (h // flow.period_us))
            routes = k_shortest_paths(net, flow.src, flow.dst, k_routes)
            self.routes.append(routes)
            dq = queuing_delay(qg)
            self.wcd_base.append(
                [(r.switch_count + 1) * qg.cycle_us + r.switch_count * dq for r in routes]
            )
            stride = flow.period_us // qg.cycle_us
            frames = h // flow.period_us
            cells = []
            links_per_route = []
            for route in routes:
                hops = slot_offsets(route, net, tolerating=qg.queue_count == 3)
                links = np.array([l for l, _ in hops], dtype=np.int64)
                offsets = np.array([o for _, o in hops], dtype=np.int64)
                starts = np.arange(frames, dtype=np.int64) * stride
                base = (starts[:, None] + offsets[None, :]).reshape(-1)
                cells.append((np.tile(links, frames), base))
                links_per_route.append(links)
            self._cells.append(cells)
            self._route_links.append(links_per_route)

    # ------------------------------------------------------------------

    def random_individual(self, rng: random.Random) -> Individual:
        route_idx, sw, phi = [], [], []
        for i in range(self.n_flows):
            r = rng.randrange(len(self.routes[i]))
            route_idx.append(r)
            sw.append(self.routes[i][r].switch_count)
            phi.append(rng.randrange(self.bound[i]))
        return Individual(route_idx, sw, phi)

    def check_invariants(self, ind: Individual) -> None:
        for i in range(self.n_flows):
            r = ind.route_idx[i]
            if not 0 <= r < len(self.routes[i]):
                raise InvalidParams(f"route index {r} out of range for flow {i}")
            if ind.sw_count[i] != self.routes[i][r].switch_count:
                raise InvalidParams(f"stale switch count for flow {i}")
            if not 0 <= ind.phi[i] < self.bound[i]:
                raise InvalidParams(f"offset {ind.phi[i]} out of bound for flow {i}")

    def place(self, ind: Individual) -> tuple[list[np.ndarray], list[bool]]:
        """Greedy in-order placement; returns occupancy grids and placed flags."""
        grids = [
            np.zeros((self.n_links, self.n_slots[g]), dtype=np.int64)
            for g in range(self.n_groups)
        ]
        placed = []
        for i in range(self.n_flows):
            g = self.group_idx[i] - 1
            links, base = self._cells[i][ind.route_idx[i]]
            slots = (base + ind.phi[i]) % self.n_slots[g]
            grid = grids[g]
            bits = self.bits[i]
            if np.any(grid[links, slots] + bits > self.cap[g]):
                placed.append(False)
            else:
                grid[links, slots] += bits
                placed.append(True)
        return grids, placed

    def rate_violations(self, ind: Individual) -> int:
        """Count of (link, group) pairs whose average rate exceeds the share."""
        viol = 0
        for g in range(self.n_groups):
            load = np.zeros(self.n_links, dtype=np.int64)
            any_flow = False
            for i in range(self.n_flows):
                if self.group_idx[i] - 1 != g:
                    continue
                any_flow = True
                np.add.at(load, self._route_links[i][ind.route_idx[i]], self._rate_scaled[i])
            if not any_flow:
                continue
            num, den = self._budget[g]
            viol += int(np.count_nonzero(load * den > num))
        return viol


def fitness(
    ind: Individual, ctx: SearchContext, alpha: float = 2.0, beta: float = 2.0
) -> FitnessBreakdown:
    """Penalty-augmented normalized delay; in [0, 1] when nothing is violated.

    Flows are placed in group order against a fresh occupancy grid.  Each
    scheduled flow contributes WCD/deadline; every other flow contributes 1,
    so dropping a flow never beats scheduling it tightly.  Violation counts
    are normalized by the number of flows before weighting.
    """
    _, placed = ctx.place(ind)
    n = ctx.n_flows
    c1 = 0
    scheduled = 0
    delay_sum = 0.0
    for i in range(n):
        w = ctx.wcd_base[i][ind.route_idx[i]] + ind.phi[i] * ctx.cycle[i]
        meets = w <= ctx.deadline[i]
        if not meets:
            c1 += 1
        if placed[i] and meets:
            scheduled += 1
            delay_sum += w / ctx.deadline[i]
        else:
            delay_sum += 1.0
    c11 = ctx.rate_violations(ind) + (n - sum(placed))
    delay_term = delay_sum / n
    total = delay_term + alpha * c1 / n + beta * c11 / n
    return FitnessBreakdown(delay_term, c1, c11, total, scheduled)


@dataclass(frozen=True)
class FlowOutcome:
    flow_id: int
    group: int
    route: tuple[int, ...]
    ti: int
    wcd_us: int
    meets_deadline: bool
    placed: bool
    scheduled: bool


@dataclass
class SolutionReport:
    breakdown: FitnessBreakdown
    outcomes: list[FlowOutcome]
    grids: list[np.ndarray]

    @property
    def scheduled(self) -> int:
        return self.breakdown.scheduled


def evaluate_solution(
    ind: Individual, ctx: SearchContext, alpha: float = 2.0, beta: float = 2.0
) -> SolutionReport:
    """Replay of the fitness evaluation exposing per-flow outcomes."""
    grids, placed = ctx.place(ind)
    outcomes = []
    c1 = 0
    scheduled = 0
    delay_sum = 0.0
    for i, flow in enumerate(ctx.order):
        r = ind.route_idx[i]
        w = ctx.wcd_base[i][r] + ind.phi[i] * ctx.cycle[i]
        meets = w <= ctx.deadline[i]
        ok = placed[i] and meets
        if not meets:
            c1 += 1
        if ok:
            scheduled += 1
            delay_sum += w / ctx.deadline[i]
        else:
            delay_sum += 1.0
        outcomes.append(
            FlowOutcome(
                flow.id,
                ctx.group_idx[i],
                ctx.routes[i][r].nodes,
                ind.phi[i],
                w,
                meets,
                placed[i],
                ok,
            )
        )
    n = ctx.n_flows
    c11 = ctx.rate_violations(ind) + (n - sum(placed))
    delay_term = delay_sum / n
    total = delay_term + alpha * c1 / n + beta * c11 / n
    return SolutionReport(
        FitnessBreakdown(delay_term, c1, c11, total, scheduled), outcomes, grids
    )


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------

def crossover(
    p1: Individual,
    p2: Individual,
    mode: CrossoverMode,
    rng: random.Random,
    ctx: SearchContext,
) -> tuple[Individual, Individual]:
    """Two children built by per-flow block choice or per-gene mixing."""
    mode = CrossoverMode(mode)
    kids = []
    for _ in range(2):
        route_idx, sw, phi = [], [], []
        for i in range(ctx.n_flows):
            if mode is CrossoverMode.WHOLE_FLOW:
                src = p1 if rng.random() < 0.5 else p2
                r, off = src.route_idx[i], src.phi[i]
            else:
                r = (p1 if rng.random() < 0.5 else p2).route_idx[i]
                off = (p1 if rng.random() < 0.5 else p2).phi[i]
            route_idx.append(r)
            sw.append(ctx.routes[i][r].switch_count)
            phi.append(off)
        kids.append(Individual(route_idx, sw, phi))
    return kids[0], kids[1]


def mutate(
    ind: Individual, ctx: SearchContext, rate: float, rng: random.Random
) -> Individual:
    """Re-roll route or offset per flow block with the given probability."""
    out = ind.clone()
    changed = False
    for i in range(ctx.n_flows):
        if rng.random() >= rate:
            continue
        _reroll_gene(out, ctx, i, rng)
        changed = True
    if changed:
        out.fitness = None
    return out


def _reroll_gene(ind: Individual, ctx: SearchContext, i: int, rng: random.Random) -> None:
    pick_phi = ctx.ti_enabled and ctx.bound[i] > 1 and rng.random() < 0.5
    if pick_phi:
        ind.phi[i] = rng.randrange(ctx.bound[i])
    else:
        r = rng.randrange(len(ctx.routes[i]))
        ind.route_idx[i] = r
        ind.sw_count[i] = ctx.routes[i][r].switch_count
    ind.fitness = None


def _neighbor(ind: Individual, ctx: SearchContext, rng: random.Random) -> Individual:
    out = ind.clone()
    _reroll_gene(out, ctx, rng.randrange(ctx.n_flows), rng)
    return out


# ---------------------------------------------------------------------------
# Search drivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    generation: int
    best_fitness: float
    scheduled: int
    evals: int


@dataclass
class RunResult:
    algorithm: str
    best: Individual
    trace: list[TraceEntry]
    evaluations: int
    evals_to_best: int
    wall_ms: float

    @property
    def generations_to_best(self) -> int:
        final = self.trace[-1].best_fitness
        for entry in self.trace:
            if entry.best_fitness == final:
                return entry.generation
        return self.trace[-1].generation


class _Evaluator:
    """Counts fitness evaluations; the count doubles as a logical clock."""

    def __init__(self, ctx: SearchContext, params: SearchParams):
        self.ctx = ctx
        self.params = params
        self.count = 0

    def __call__(self, ind: Individual) -> FitnessBreakdown:
        if ind.fitness is None:
            ind.fitness = fitness(ind, self.ctx, self.params.alpha, self.params.beta)
            self.count += 1
        return ind.fitness


def run_sa(ctx: SearchContext, params: SearchParams) -> RunResult:
    """Single-solution simulated annealing over the encoding."""
    rng = random.Random(params.seed)
    ev = _Evaluator(ctx, params)
    start = time.perf_counter()
    cur = ctx.random_individual(rng)
    ev(cur)
    best = cur.clone()
    evals_to_best = ev.count
    trace = [TraceEntry(0, best.fitness.total, best.fitness.scheduled, ev.count)]
    temp = params.sa_initial_temp
    stall = 0
    for it in range(1, params.sa_iterations + 1):
        cand = _neighbor(cur, ctx, rng)
        ev(cand)
        delta = cand.fitness.total - cur.fitness.total
        if delta < 0 or (temp > 0 and rng.random() < math.exp(-delta / temp)):
            cur = cand
        if cand.fitness.total < best.fitness.total:
            best = cand.clone()
            evals_to_best = ev.count
            stall = 0
        else:
            stall += 1
        temp *= params.sa_cooling
        trace.append(TraceEntry(it, best.fitness.total, best.fitness.scheduled, ev.count))
        if stall >= params.stall_limit:
            break
    wall_ms = (time.perf_counter() - start) * 1000
    return RunResult("sa", best, trace, ev.count, evals_to_best, wall_ms)


def _ga_loop(ctx: SearchContext, params: SearchParams, hybrid: bool) -> RunResult:
    rng = random.Random(params.seed)
    ev = _Evaluator(ctx, params)
    start = time.perf_counter()
    pop = [ctx.random_individual(rng) for _ in range(params.population_size)]
    for ind in pop:
        ev(ind)
    best = min(pop, key=lambda x: x.fitness.total).clone()
    evals_to_best = ev.count
    trace = [TraceEntry(0, best.fitness.total, best.fitness.scheduled, ev.count)]
    n_elite = max(2, round(params.population_size * params.elite_fraction))
    stall = 0
    for gen in range(1, params.max_generations + 1):
        temp = params.sa_initial_temp * params.sa_cooling ** (gen - 1)
        pop.sort(key=lambda x: x.fitness.total)
        elites = pop[:n_elite]
        need = params.population_size - n_elite
        children: list[Individual] = []
        while len(children) < need:
            if hybrid:
                p1 = _sa_pick_parent(pop, n_elite, temp, rng)
                p2 = _sa_pick_parent(pop, n_elite, temp, rng)
            else:
                i, j = rng.sample(range(n_elite), 2)
                p1, p2 = elites[i], elites[j]
            c1, c2 = crossover(p1, p2, params.crossover_mode, rng, ctx)
            for child in (c1, c2):
                if hybrid:
                    ev(child)
                    child = _inner_sa(child, ctx, params, temp, rng, ev)
                else:
                    child = mutate(child, ctx, params.mutation_rate, rng)
                    ev(child)
                children.append(child)
        children = children[:need]
        pop = elites + children
        gen_best = min(pop, key=lambda x: x.fitness.total)
        if gen_best.fitness.total < best.fitness.total:
            best = gen_best.clone()
            evals_to_best = ev.count
            stall = 0
        else:
            stall += 1
        trace.append(TraceEntry(gen, best.fitness.total, best.fitness.scheduled, ev.count))
        if stall >= params.stall_limit:
            break
    wall_ms = (time.perf_counter() - start) * 1000
    name = "gasa" if hybrid else "ga"
    return RunResult(name, best, trace, ev.count, evals_to_best, wall_ms)


def _sa_pick_parent(
    pop: list[Individual], n_elite: int, temp: float, rng: random.Random
) -> Individual:
    """Elite parent selection that admits weaker members probabilistically."""
    idx = rng.randrange(len(pop))
    if idx < n_elite:
        return pop[idx]
    delta = pop[idx].fitness.total - pop[n_elite - 1].fitness.total
    if temp > 0 and rng.random() < math.exp(-delta / temp):
        return pop[idx]
    return pop[rng.randrange(n_elite)]


def _inner_sa(
    child: Individual,
    ctx: SearchContext,
    params: SearchParams,
    temp: float,
    rng: random.Random,
    ev: _Evaluator,
) -> Individual:
    """Bounded annealing from the child; the result is never worse."""
    cur = child
    best = child
    t = temp
    for _ in range(params.gasa_inner_iterations):
        cand = _neighbor(cur, ctx, rng)
        ev(cand)
        delta = cand.fitness.total - cur.fitness.total
        if delta < 0 or (t > 0 and rng.random() < math.exp(-delta / t)):
            cur = cand
        if cand.fitness.total < best.fitness.total:
            best = cand
        t *= params.sa_cooling
    return best


def run_ga(ctx: SearchContext, params: SearchParams) -> RunResult:
    """Elitist genetic algorithm: crossover plus random mutation."""
    return _ga_loop(ctx, params, hybrid=False)


def run_gasa(ctx: SearchContext, params: SearchParams) -> RunResult:
    """GA with annealing-based mutation and temperature-gated parent choice."""
    return _ga_loop(ctx, params, hybrid=True)
