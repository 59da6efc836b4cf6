"""Experiment harness: generate inputs, pick cycles, schedule, aggregate.

Subcommands
-----------
* ``gen``      -- write topology.json and flows.json for a seeded instance
* ``cycles``   -- print the best cycle triple (optionally all valid triples)
* ``schedule`` -- run SA / GA / GASA and write solution, trace, and summary
* ``report``   -- aggregate a summary CSV per algorithm

Exit codes: 0 success, 2 constraint violation / infeasibility / bad usage,
1 internal error.  All outputs are deterministic for fixed flags and seed;
the trace CSV's elapsed_ms column is a logical clock counting fitness
evaluations so that repeated runs are byte-identical (wall-clock time is
recorded in the summary CSV only).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from statistics import mean, median

from . import cycles as cycles_mod
from .core import McqfConfig, SyncOverheads, default_config, t_max, t_min
from .errors import InvalidConfig, McqfError, NoFeasibleCombination
from .mapping import map_flows, single_group_assignment
from .optimizers import (
    RunResult,
    SearchContext,
    SearchParams,
    evaluate_solution,
    run_ga,
    run_gasa,
    run_sa,
)
from .topology import Network, generate_topology
from .traffic import FlowSet, generate_testcase

TOPOLOGY_FILE = "topology.json"
FLOWS_FILE = "flows.json"
SUMMARY_FILE = "summary.csv"

SUMMARY_COLUMNS = [
    "algo", "ti", "mapping", "splits", "cycles", "queues", "shares",
    "alpha", "beta", "seed", "rep", "n_flows", "scheduled", "schedulability",
    "wcd_min_qg1", "wcd_mean_qg1", "wcd_max_qg1",
    "wcd_min_qg2", "wcd_mean_qg2", "wcd_max_qg2",
    "wcd_min_qg3", "wcd_mean_qg3", "wcd_max_qg3",
    "wall_ms", "trace_path", "solution_path",
]

_RUNNERS = {"sa": run_sa, "ga": run_ga, "gasa": run_gasa}


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x != ""]


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcqf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate topology and flow files")
    gen.add_argument("--topo", choices=["erg", "rrg", "bag", "ring"], required=True)
    gen.add_argument("--n", type=int, help="switch count for erg/rrg/bag")
    gen.add_argument("--p", type=float, help="edge probability for erg")
    gen.add_argument("--d", type=int, help="degree for rrg")
    gen.add_argument("--m", type=int, help="attachment edges for bag")
    gen.add_argument("--switches", type=int, help="switch count for ring")
    gen.add_argument("--hosts-per-switch", type=int, default=1)
    gen.add_argument("--bw-bps", type=int, default=100_000_000)
    gen.add_argument("--kind", choices=["rsd", "tsd", "rld", "tld"], required=True)
    gen.add_argument("--flows", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)

    cyc = sub.add_parser("cycles", help="search the best cycle combination")
    _add_input_flags(cyc)
    _add_config_flags(cyc)
    cyc.add_argument("--list", action="store_true", help="print every valid triple with its score")

    sched = sub.add_parser("schedule", help="run an optimizer and record results")
    _add_input_flags(sched)
    _add_config_flags(sched)
    sched.add_argument("--algo", choices=["sa", "ga", "gasa"], required=True)
    sched.add_argument("--cycles", default="auto",
                       help="comma-separated cycle list (1 or 3 values) or 'auto'")
    sched.add_argument("--ti", choices=["on", "off"], default="off")
    sched.add_argument("--alpha", type=float, default=2.0)
    sched.add_argument("--beta", type=float, default=2.0)
    sched.add_argument("--seed", type=int, default=0)
    sched.add_argument("--reps", type=int, default=1)
    sched.add_argument("--out", type=Path, required=True)
    sched.add_argument("--k-routes", type=int, default=4)
    sched.add_argument("--pop", type=int, default=50)
    sched.add_argument("--mutation-rate", type=float, default=0.1)
    sched.add_argument("--crossover", choices=["wholeflow", "genemix"], default="wholeflow")
    sched.add_argument("--max-generations", type=int, default=100)
    sched.add_argument("--sa-iterations", type=int, default=2000)
    sched.add_argument("--sa-temp", type=float, default=1.0)
    sched.add_argument("--sa-cooling", type=float, default=0.95)
    sched.add_argument("--inner-iterations", type=int, default=20)
    sched.add_argument("--stall", type=int, default=50)

    rep = sub.add_parser("report", help="aggregate a summary CSV")
    rep.add_argument("--summary", type=Path, required=True)
    rep.add_argument("--out", type=Path, help="write aggregate rows to this CSV")
    return parser


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--inputs", type=Path, required=True,
                   help="directory holding topology.json and flows.json")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--queues", default="3,2,2",
                   help="queues per group, e.g. 3,2,2 (values 2 or 3)")
    p.add_argument("--shares", default="0.4,0.3,0.2",
                   help="bandwidth share per group")
    p.add_argument("--mapping", choices=["dbm", "pbm", "rm"], default="dbm")
    p.add_argument("--splits", default="0.5,0.3,0.2",
                   help="flow fractions for QG1,QG2,QG3")
    p.add_argument("--mapping-seed", type=int, default=0)
    p.add_argument("--xi", default="1,0.5,0.5",
                   help="proc,prop,sync overhead in us")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "cycles":
            return cmd_cycles(args)
        if args.command == "schedule":
            return cmd_schedule(args)
        return cmd_report(args)
    except (McqfError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


def cmd_gen(args) -> int:
    net = generate_topology(
        args.topo,
        link_bw_bps=args.bw_bps,
        seed=args.seed,
        n=args.n,
        p=args.p,
        d=args.d,
        m=args.m,
        switches=args.switches,
        hosts_per_switch=args.hosts_per_switch,
    )
    flows = generate_testcase(args.kind, net, args.flows, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    net.save(args.out / TOPOLOGY_FILE)
    flows.save(args.out / FLOWS_FILE)
    print(f"wrote {args.out / TOPOLOGY_FILE} and {args.out / FLOWS_FILE}")
    return 0


def _load_inputs(args) -> tuple[Network, FlowSet]:
    net = Network.load(args.inputs / TOPOLOGY_FILE)
    flows = FlowSet.load(args.inputs / FLOWS_FILE)
    return net, flows


def _parse_xi(text: str) -> SyncOverheads:
    vals = _csv_floats(text)
    if len(vals) != 3:
        raise ValueError("--xi needs proc,prop,sync")
    return SyncOverheads(*vals)


def cmd_cycles(args) -> int:
    net, flows = _load_inputs(args)
    xi = _parse_xi(args.xi)
    scored: list[cycles_mod.CycleCombination] = []
    try:
        best = cycles_mod.best_cycle_combination(
            net,
            flows,
            shares=_csv_floats(args.shares),
            mapping_strategy=args.mapping,
            queue_counts=_csv_ints(args.queues),
            xi=xi,
            splits=_csv_floats(args.splits),
            mapping_seed=args.mapping_seed,
            scored=scored,
        )
    except NoFeasibleCombination as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.list:
        for entry in scored:
            print(json.dumps({"cycles": list(entry.cycles), "score": entry.score}))
    print(json.dumps({"best": list(best.cycles), "score": best.score,
                      "evaluated": len(scored)}))
    return 0


def _validate_cycles(cycles: list[int], flows: FlowSet, bw_bps: int, xi_us: float) -> None:
    """Check C6..C10 for an explicit cycle list, naming the first violation."""
    hp = flows.hyperperiod_us
    for t in cycles:
        if t <= 0 or hp % t != 0:
            raise InvalidConfig("C6", f"hyperperiod {hp} is not a multiple of cycle {t}")
    for t in cycles:
        for f in flows:
            if f.period_us % t != 0:
                raise InvalidConfig(
                    "C7", f"period {f.period_us} of flow {f.id} is not a multiple of {t}"
                )
    lo, hi = t_min(flows, bw_bps, xi_us), t_max(flows)
    for t in cycles:
        if not lo <= t <= hi:
            raise InvalidConfig("C8", f"cycle {t} outside [{lo}, {hi}]")
    for a, b in zip(cycles, cycles[1:]):
        if not a < b:
            raise InvalidConfig("C9", f"cycles must strictly increase, got {cycles}")
    for a, b in zip(cycles, cycles[1:]):
        if b % a != 0:
            raise InvalidConfig("C10", f"{b} is not a multiple of {a}")


def _resolve_config(args, net: Network, flows: FlowSet) -> McqfConfig:
    xi = _parse_xi(args.xi)
    queues = _csv_ints(args.queues)
    shares = _csv_floats(args.shares)
    if args.cycles == "auto":
        best = cycles_mod.best_cycle_combination(
            net, flows, shares=shares, mapping_strategy=args.mapping,
            queue_counts=queues, xi=xi, splits=_csv_floats(args.splits),
            mapping_seed=args.mapping_seed,
        )
        cycle_list = list(best.cycles)
    else:
        cycle_list = _csv_ints(args.cycles)
        if len(cycle_list) not in (1, 2, 3):
            raise ValueError("--cycles needs 1 to 3 values or 'auto'")
        _validate_cycles(cycle_list, flows, net.bandwidth_bps, xi.total_us)
    return default_config(cycle_list, queues, shares, xi)


def cmd_schedule(args) -> int:
    net, flows = _load_inputs(args)
    try:
        config = _resolve_config(args, net, flows)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NoFeasibleCombination as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if len(config.groups) == 1:
        assignment = single_group_assignment(flows)
    else:
        assignment = map_flows(flows, args.mapping, _csv_floats(args.splits),
                               seed=args.mapping_seed)
    ctx = SearchContext(net, flows, assignment, config,
                        k_routes=args.k_routes, ti_enabled=args.ti == "on")
    args.out.mkdir(parents=True, exist_ok=True)
    config.save(args.out / "mcqf_config.json")

    def one_rep(rep: int) -> tuple[int, RunResult, dict]:
        params = SearchParams(
            population_size=args.pop,
            mutation_rate=args.mutation_rate,
            crossover_mode=args.crossover,
            sa_initial_temp=args.sa_temp,
            sa_cooling=args.sa_cooling,
            sa_iterations=args.sa_iterations,
            stall_limit=args.stall,
            max_generations=args.max_generations,
            gasa_inner_iterations=args.inner_iterations,
            seed=args.seed + rep,
            ti_enabled=args.ti == "on",
            alpha=args.alpha,
            beta=args.beta,
        )
        result = _RUNNERS[args.algo](ctx, params)
        report = evaluate_solution(result.best, ctx, args.alpha, args.beta)
        tag = f"{args.algo}_seed{args.seed + rep}"
        trace_path = args.out / f"trace_{tag}.csv"
        sol_path = args.out / f"solution_{tag}.json"
        write_trace(trace_path, result)
        write_solution(sol_path, report, len(flows))
        row = _summary_row(args, rep, result, report, ctx, trace_path, sol_path)
        return rep, result, row

    workers = int(os.environ.get("MCQF_THREADS", "1"))
    reps = range(args.reps)
    if workers > 1 and args.reps > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_rep, reps))
    else:
        results = [one_rep(r) for r in reps]
    results.sort(key=lambda t: t[0])
    summary_path = args.out / SUMMARY_FILE
    _append_summary(summary_path, [row for _, _, row in results])
    for rep, result, row in results:
        print(
            f"rep {rep}: scheduled {row['scheduled']}/{row['n_flows']} "
            f"(fitness {result.best.fitness.total:.4f}, {row['wall_ms']} ms)"
        )
    return 0


def write_trace(path: Path, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_fitness", "scheduled", "elapsed_ms"])
        for entry in result.trace:
            writer.writerow([entry.generation, repr(entry.best_fitness),
                             entry.scheduled, entry.evals])


def write_solution(path: Path, report, total_flows: int) -> None:
    doc = {
        "scheduled": report.scheduled,
        "total": total_flows,
        "schedulability": report.scheduled / total_flows,
        "flows": [
            {
                "id": o.flow_id,
                "qg": o.group,
                "route": list(o.route),
                "ti": o.ti,
                "wcd_us": o.wcd_us,
                "scheduled": o.scheduled,
            }
            for o in sorted(report.outcomes, key=lambda o: o.flow_id)
        ],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _summary_row(args, rep, result: RunResult, report, ctx: SearchContext,
                 trace_path: Path, sol_path: Path) -> dict:
    row = {
        "algo": args.algo,
        "ti": args.ti,
        "mapping": args.mapping,
        "splits": args.splits,
        "cycles": ",".join(str(c) for c in ctx.config.cycles),
        "queues": ",".join(str(g.queue_count) for g in ctx.config.groups),
        "shares": ",".join(repr(g.share) for g in ctx.config.groups),
        "alpha": repr(args.alpha),
        "beta": repr(args.beta),
        "seed": args.seed + rep,
        "rep": rep,
        "n_flows": len(ctx.flows),
        "scheduled": report.scheduled,
        "schedulability": repr(report.scheduled / len(ctx.flows)),
        "wall_ms": round(result.wall_ms),
        "trace_path": str(trace_path),
        "solution_path": str(sol_path),
    }
    for g in range(1, 4):
        wcds = [o.wcd_us for o in report.outcomes if o.group == g and o.scheduled]
        row[f"wcd_min_qg{g}"] = min(wcds) if wcds else ""
        row[f"wcd_mean_qg{g}"] = repr(mean(wcds)) if wcds else ""
        row[f"wcd_max_qg{g}"] = max(wcds) if wcds else ""
    return row


def _append_summary(path: Path, rows: list[dict]) -> None:
    new_file = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        if new_file:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def convergence_generation(trace_path: Path) -> int:
    """First generation whose best fitness equals the final best fitness."""
    with open(trace_path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"empty trace {trace_path}")
    final = rows[-1]["best_fitness"]
    for row in rows:
        if row["best_fitness"] == final:
            return int(row["generation"])
    return int(rows[-1]["generation"])


def cmd_report(args) -> int:
    if not args.summary.exists():
        print(f"error: {args.summary} does not exist", file=sys.stderr)
        return 2
    with open(args.summary) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("error: summary has no rows", file=sys.stderr)
        return 2
    grouped: dict[str, list[dict]] = {}
    for row in rows:
        key = row["algo"] + ("+ti" if row["ti"] == "on" else "")
        grouped.setdefault(key, []).append(row)
    out_rows = []
    for key in sorted(grouped):
        members = grouped[key]
        scheds = [float(r["schedulability"]) for r in members]
        convs = [convergence_generation(Path(r["trace_path"])) for r in members]
        out_rows.append({
            "algorithm": key,
            "runs": len(members),
            "mean_schedulability": repr(mean(scheds)),
            "median_schedulability": repr(median(scheds)),
            "mean_convergence_generation": repr(mean(convs)),
        })
    header = ["algorithm", "runs", "mean_schedulability",
              "median_schedulability", "mean_convergence_generation"]
    print(",".join(header))
    for row in out_rows:
        print(",".join(str(row[h]) for h in header))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            writer.writerows(out_rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
