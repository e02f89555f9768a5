"""``qcut`` command line: gen-qaoa, plan, cuts, run, worker, bench."""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import subprocess
import sys
import time
from pathlib import Path

from qcut.circuit import CircuitError, emit_circuit, parse_circuit, qaoa_circuit, random_regular_graph
from qcut.contraction import RankLimitError, default_max_rank, estimate_cost
from qcut.cutting import DEFAULT_MAX_JOBS, CutSet, JobLimitError, graph_hash
from qcut.distributed import MasterConfig, NoWorkersError, RunAborted, run_worker
from qcut.network import build_network, network_graph
from qcut.ordering import best_order
from qcut.pipeline import plan_for_cut, run_network, search_cuts, sweep_cuts

SCHEMA_VERSION = 1

log = logging.getLogger("qcut")

EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_RUNTIME = 4


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps({"v": SCHEMA_VERSION, **obj}, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_circuit(path: str):
    return parse_circuit(Path(path).read_text())


def _load_cut(path: str | None, tn) -> CutSet:
    if not path:
        return CutSet()
    obj = json.loads(Path(path).read_text())
    src = obj.get("source_graph_hash")
    if src and src != graph_hash(network_graph(tn)):
        raise CircuitError(f"cut set {path} was computed for a different network")
    return CutSet(tuple(obj["edges"]))


def _parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


# -- subcommands ---------------------------------------------------------------


def cmd_gen_qaoa(args) -> int:
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for k in range(args.samples):
        seed = args.seed + k
        g = random_regular_graph(args.n, args.degree, seed)
        c = qaoa_circuit(g, args.gamma, args.beta, args.layers, args.z)
        stem = prefix if args.samples == 1 else prefix.with_name(f"{prefix.name}-{k:03d}")
        circ_path = stem.with_suffix(".circ")
        graph_path = stem.with_suffix(".graph")
        circ_path.write_text(emit_circuit(c))
        graph_path.write_text(g.to_text())
        written.append({"seed": seed, "circuit": str(circ_path), "graph": str(graph_path)})
    _emit({"n": args.n, "degree": args.degree, "samples": written}, None)
    return 0


def cmd_plan(args) -> int:
    tn = build_network(_load_circuit(args.circuit))
    cut = _load_cut(args.cuts, tn)
    g = network_graph(tn).without_edges(cut.edge_ids)
    _, width = best_order(g, restarts=args.restarts, seed=args.seed)
    plan = plan_for_cut(tn, cut, args.restarts, args.seed)
    cost = estimate_cost(plan)
    if args.dump_plan:
        Path(args.dump_plan).write_text(json.dumps(plan.to_json(), indent=1) + "\n")
    _emit(
        {
            "width": width,
            "peak_rank": plan.peak_rank,
            "cost_estimate": cost.cost_estimate,
            "bytes_peak": cost.bytes_peak,
            "m": cut.m,
            "vertices": len(tn.tensors),
            "edges": len(tn.edges),
            "within_guard": plan.peak_rank <= args.max_rank,
        },
        args.out,
    )
    return 0


def cmd_cuts(args) -> int:
    tn = build_network(_load_circuit(args.circuit))
    res = search_cuts(tn, args.M, args.N, args.T, args.seed, args.restarts)
    out = res.to_json(network_graph(tn))
    out.pop("v")
    _emit(out, args.out)
    return 0


def _local_workers(n: int, host: str, port: int) -> list[subprocess.Popen]:
    cmd = [sys.executable, "-m", "qcut", "worker", "--connect", f"{host}:{port}"]
    return [subprocess.Popen(cmd + ["--id", f"local{i}"]) for i in range(n)]


def cmd_run(args) -> int:
    c = _load_circuit(args.circuit)
    tn = build_network(c)
    if args.sweep_cuts:
        rows = sweep_cuts(
            tn,
            _parse_range(args.sweep_cuts),
            args.N,
            args.T,
            args.seed,
            args.restarts,
            args.max_rank,
            contract_max_jobs=args.sweep_max_jobs,
            warm_start=not args.no_warm_start,
        )
        _emit({"sweep": [r.to_json(not args.no_timings) for r in rows]}, args.out)
        return 0

    if args.cuts:
        cut = _load_cut(args.cuts, tn)
    elif args.M:
        cut = search_cuts(tn, args.M, args.N, args.T, args.seed, args.restarts).cut
    else:
        cut = CutSet()
    plan = plan_for_cut(tn, cut, args.restarts, args.seed)
    procs: list[subprocess.Popen] = []

    def spawn(host, port):
        if args.spawn_workers:
            procs.extend(_local_workers(args.spawn_workers, host, port))

    master = None
    if args.backend == "distributed":
        host, port = _hostport(args.listen) if args.listen else ("127.0.0.1", 0)
        master = MasterConfig(
            host=host,
            port=port,
            workers=args.spawn_workers or args.workers,
            timeout_secs=args.timeout_secs,
            connect_timeout=args.connect_timeout,
        )
    try:
        report = run_network(
            tn,
            cut,
            plan,
            args.backend,
            args.workers,
            args.batch_size,
            args.max_rank,
            args.max_jobs,
            master,
            spawn,
        )
    finally:
        for p in procs:
            try:
                p.wait(timeout=30)
            except subprocess.TimeoutExpired:
                p.kill()
    out = report.to_json(not args.no_timings)
    out.update({"m": cut.m, "edges": list(cut.edge_ids), "peak_rank": plan.peak_rank})
    _emit(out, args.out)
    return 0


def cmd_worker(args) -> int:
    host, port = _hostport(args.connect)
    return run_worker(host, port, args.id, args.slots, args.reconnects)


def cmd_bench(args) -> int:
    """Average pipeline time and width over random QAOA samples."""
    rows = []
    for k in range(args.samples):
        seed = args.seed + k
        g = random_regular_graph(args.n, 3, seed)
        tn = build_network(qaoa_circuit(g, args.gamma, args.beta, args.layers))
        t0 = time.perf_counter()
        res = search_cuts(tn, args.M, args.N, args.T, seed, args.restarts)
        t_search = time.perf_counter() - t0
        plan = plan_for_cut(tn, res.cut, args.restarts, seed)
        row = {"seed": seed, "width": res.width, "peak_rank": plan.peak_rank, "m": args.M}
        try:
            report = run_network(
                tn, res.cut, plan, args.backend, args.workers, None, args.max_rank, args.max_jobs
            )
        except RankLimitError as exc:
            row.update({"status": "rejected", "why": str(exc)})
        else:
            row.update(
                {
                    "status": "ok",
                    "amplitude": {"re": report.amplitude.real, "im": report.amplitude.imag},
                    "rounds": report.rounds,
                }
            )
            if not args.no_timings:
                row.update({"search_seconds": t_search, "run_seconds": report.wall_time})
        rows.append(row)
        log.info("sample %d: %s", seed, row.get("status"))
    ok = [r for r in rows if r["status"] == "ok"]
    summary = {
        "n": args.n,
        "samples": args.samples,
        "succeeded": len(ok),
        "mean_width": statistics.fmean(r["width"] for r in rows),
    }
    if ok and not args.no_timings:
        summary["mean_run_seconds"] = statistics.fmean(r["run_seconds"] for r in ok)
    _emit({"summary": summary, "rows": rows}, args.out)
    return 0


# -- argument parsing ----------------------------------------------------------


def _ga_args(p: argparse.ArgumentParser, m_default: int | None = None) -> None:
    p.add_argument("--M", type=int, default=m_default, help="edges to cut")
    p.add_argument("--N", type=int, default=11, help="GA population size")
    p.add_argument("--T", type=int, default=4, help="GA iterations")
    p.add_argument("--restarts", type=int, default=1, help="restarts per ordering heuristic")
    p.add_argument("--seed", type=int, default=0)


def _backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["serial", "pool", "process", "distributed"], default="serial")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-jobs", type=int, default=DEFAULT_MAX_JOBS)
    p.add_argument("--max-rank", type=int, default=default_max_rank())
    p.add_argument("--no-timings", action="store_true", help="omit timings for golden output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcut", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-qaoa", help="random 3-regular QAOA instance(s)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--z", default=None, help="measured bitstring (default all zeros)")
    p.add_argument("--out", required=True, help="output prefix for .circ/.graph files")
    p.set_defaults(func=cmd_gen_qaoa)

    p = sub.add_parser("plan", help="width and contraction cost, no contraction")
    p.add_argument("circuit")
    p.add_argument("--cuts", default=None, help="cut-set JSON file")
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rank", type=int, default=default_max_rank())
    p.add_argument("--dump-plan", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("cuts", help="genetic search for a cut set")
    p.add_argument("circuit")
    _ga_args(p, 1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cuts)

    p = sub.add_parser("run", help="contract a circuit, optionally cut")
    p.add_argument("circuit")
    p.add_argument("--cuts", default=None, help="cut-set JSON file")
    _ga_args(p, 0)
    _backend_args(p)
    p.add_argument("--listen", default=None, help="host:port for the distributed master")
    p.add_argument("--spawn-workers", type=int, default=0, help="local worker processes to start")
    p.add_argument("--timeout-secs", type=float, default=300.0)
    p.add_argument("--connect-timeout", type=float, default=60.0)
    p.add_argument("--sweep-cuts", default=None, help="cut counts, e.g. 0..6")
    p.add_argument("--sweep-max-jobs", type=int, default=4**3, help="contract sweep rows up to this many subnetworks")
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("worker", help="connect to a master and contract batches")
    p.add_argument("--connect", required=True, help="master host:port")
    p.add_argument("--id", default=None)
    p.add_argument("--slots", type=int, default=1)
    p.add_argument("--reconnects", type=int, default=3)
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("bench", help="average the pipeline over random QAOA samples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--layers", type=int, default=1)
    _ga_args(p, 0)
    _backend_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except RankLimitError as exc:
        print(f"qcut: guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (CircuitError, JobLimitError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"qcut: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoWorkersError, RunAborted, ConnectionRefusedError) as exc:
        print(f"qcut: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
