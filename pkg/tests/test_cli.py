import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from mcqf import CapacityLedger, FlowSet, Network, default_config
from mcqf.cli import build_parser, convergence_generation, main
from mcqf.core import check_deadline, flow_rate_bps, _share_fraction
from mcqf.cycles import shortest_routes
from mcqf.mapping import map_flows


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("inputs")
    code = run([
        "gen", "--topo", "ring", "--switches", "6", "--kind", "tsd",
        "--flows", "40", "--seed", "1", "--bw-bps", "1000000000",
        "--out", str(out),
    ])
    assert code == 0
    return out


def test_gen_is_byte_identical(tmp_path):
    args = ["gen", "--topo", "erg", "--n", "10", "--p", "0.3", "--kind", "rsd",
            "--flows", "25", "--seed", "4"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    for name in ("topology.json", "flows.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen_erg_matches_library(tmp_path):
    out = tmp_path / "erg"
    assert run(["gen", "--topo", "erg", "--n", "10", "--p", "0.3", "--kind", "tsd",
                "--flows", "10", "--seed", "1", "--out", str(out)]) == 0
    net = Network.load(out / "topology.json")
    assert len(net.switches()) == 10


def test_cycles_lists_canonical_triple(inputs, capsys):
    assert run(["cycles", "--inputs", str(inputs), "--list"]) == 0
    lines = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    best = lines[-1]
    assert set(best) == {"best", "score", "evaluated"}
    listed = [tuple(entry["cycles"]) for entry in lines[:-1]]
    assert (25, 50, 100) in listed
    assert best["evaluated"] == len(listed)
    assert 0 <= best["score"] <= 1


def test_cycles_score_matches_independent_greedy(inputs, capsys):
    assert run(["cycles", "--inputs", str(inputs)]) == 0
    best = json.loads(capsys.readouterr().out.splitlines()[-1])

    net = Network.load(inputs / "topology.json")
    flows = FlowSet.load(inputs / "flows.json")
    config = default_config(tuple(best["best"]))
    assignment = map_flows(flows, "dbm")
    routes = shortest_routes(net, flows)
    # independent greedy replay with plain dict bookkeeping
    ledger = CapacityLedger(config, net, flows.hyperperiod_us)
    loads = {}
    scheduled = 0
    for gidx, ids in enumerate(assignment.groups, start=1):
        qg = config.groups[gidx - 1]
        budget = _share_fraction(qg.share) * net.bandwidth_bps
        for fid in ids:
            flow, route = flows.by_id(fid), routes[fid]
            if not check_deadline(flow, route, qg, 0):
                continue
            keys = [(l, gidx) for l in route.links()]
            rate = flow_rate_bps(flow)
            if any(loads.get(k, Fraction(0)) + rate > budget for k in keys):
                continue
            if not ledger.try_place_flow(flow, route, gidx, 0):
                continue
            for k in keys:
                loads[k] = loads.get(k, Fraction(0)) + rate
            scheduled += 1
    assert best["score"] == scheduled / len(flows)


def test_schedule_rejects_decreasing_cycles(inputs, capsys):
    code = run(["schedule", "--inputs", str(inputs), "--algo", "ga",
                "--cycles", "50,25,100", "--out", str(inputs / "bad")])
    assert code == 2
    assert "C9" in capsys.readouterr().err


def test_schedule_rejects_non_multiple_cycles(inputs, capsys):
    code = run(["schedule", "--inputs", str(inputs), "--algo", "ga",
                "--cycles", "20,50,100", "--out", str(inputs / "bad2")])
    assert code == 2
    assert "C10" in capsys.readouterr().err


def test_schedule_rejects_non_dividing_cycle(inputs, capsys):
    code = run(["schedule", "--inputs", str(inputs), "--algo", "ga",
                "--cycles", "30,60,120", "--out", str(inputs / "bad3")])
    assert code == 2
    err = capsys.readouterr().err
    assert "C6" in err or "C7" in err


_FAST = ["--pop", "12", "--max-generations", "6", "--stall", "4",
         "--inner-iterations", "4", "--sa-iterations", "150"]


def _schedule(inputs, out, algo="gasa", extra=()):
    return run(["schedule", "--inputs", str(inputs), "--algo", algo,
                "--cycles", "25,50,100", "--ti", "on", "--seed", "5",
                "--out", str(out), *_FAST, *extra])


def test_schedule_outputs(inputs, tmp_path):
    out = tmp_path / "run"
    assert _schedule(inputs, out) == 0
    sol = json.loads((out / "solution_gasa_seed5.json").read_text())
    assert sol["total"] == 40
    assert 0 <= sol["scheduled"] <= 40
    assert sol["schedulability"] == sol["scheduled"] / 40
    for entry in sol["flows"]:
        assert set(entry) == {"id", "qg", "route", "ti", "wcd_us", "scheduled"}
    with open(out / "trace_gasa_seed5.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["generation", "best_fitness", "scheduled", "elapsed_ms"]
    assert len(rows) > 1
    with open(out / "summary.csv") as fh:
        summary = list(csv.DictReader(fh))
    assert len(summary) == 1
    assert summary[0]["algo"] == "gasa"
    assert summary[0]["scheduled"] == str(sol["scheduled"])
    assert (out / "mcqf_config.json").exists()


def test_schedule_is_byte_identical(inputs, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _schedule(inputs, a) == 0
    assert _schedule(inputs, b) == 0
    for name in ("solution_gasa_seed5.json", "trace_gasa_seed5.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_schedule_reps_append_summary(inputs, tmp_path):
    out = tmp_path / "reps"
    assert _schedule(inputs, out, algo="sa", extra=["--reps", "3"]) == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["rep"] for r in rows] == ["0", "1", "2"]
    assert [r["seed"] for r in rows] == ["5", "6", "7"]


def test_report_aggregates(inputs, tmp_path, capsys):
    out = tmp_path / "cmp"
    for algo in ("sa", "ga", "gasa"):
        assert _schedule(inputs, out, algo=algo) == 0
    capsys.readouterr()
    agg_path = tmp_path / "agg.csv"
    assert run(["report", "--summary", str(out / "summary.csv"),
                "--out", str(agg_path)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed[0].startswith("algorithm,runs,")
    with open(agg_path) as fh:
        rows = list(csv.DictReader(fh))
    assert sorted(r["algorithm"] for r in rows) == ["ga+ti", "gasa+ti", "sa+ti"]
    # aggregates recompute exactly from the raw rows
    with open(out / "summary.csv") as fh:
        raw = list(csv.DictReader(fh))
    for row in rows:
        algo = row["algorithm"].removesuffix("+ti")
        vals = [float(r["schedulability"]) for r in raw if r["algo"] == algo]
        assert float(row["mean_schedulability"]) == sum(vals) / len(vals)


def test_convergence_of_constant_trace(tmp_path):
    trace = tmp_path / "trace.csv"
    trace.write_text(
        "generation,best_fitness,scheduled,elapsed_ms\n"
        "0,0.5,3,10\n1,0.5,3,20\n2,0.5,3,30\n"
    )
    assert convergence_generation(trace) == 0


def test_report_empty_summary(tmp_path, capsys):
    path = tmp_path / "summary.csv"
    path.write_text("algo,ti\n")
    assert run(["report", "--summary", str(path)]) == 2
    assert run(["report", "--summary", str(tmp_path / "missing.csv")]) == 2


def test_cycles_infeasible_exits_2(tmp_path, capsys):
    out = tmp_path / "inf"
    # periods {100} with 1000 B frames at 100 Mbps: t_min 82 leaves only {100}.
    assert run(["gen", "--topo", "ring", "--switches", "3", "--kind", "tld",
                "--flows", "5", "--seed", "2", "--out", str(out)]) == 0
    flows = json.loads((out / "flows.json").read_text())
    for f in flows["flows"]:
        f["period_us"] = f["deadline_us"] = 100
        f["size_b"] = 1000
    (out / "flows.json").write_text(json.dumps(flows))
    assert run(["cycles", "--inputs", str(out)]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_flags_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["schedule", "--inputs", "x"])  # missing --algo/--out
    assert exc.value.code == 2
