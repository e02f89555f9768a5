"""End-to-end helpers shared by the CLI, the benchmark harness and tests."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

from qcut.contraction import ContractionPlan, best_plan, estimate_cost
from qcut.cutting import CutSet, GAResult, cut_network_template, cut_width, ga_search
from qcut.executor import RunReport, run_pool, serial_report
from qcut.distributed import MasterConfig, run_distributed
from qcut.network import TensorNetwork, network_graph


def plan_for_cut(
    tn: TensorNetwork, cut: CutSet, restarts: int = 2, seed: int = 0
) -> ContractionPlan:
    """One plan for the common topology of every subnetwork of ``cut``."""
    return best_plan(cut_network_template(tn, cut), restarts=restarts, seed=seed)


def search_cuts(
    tn: TensorNetwork,
    M: int,
    N: int = 11,
    T: int = 4,
    seed: int = 0,
    restarts: int = 1,
    seed_individuals=(),
) -> GAResult:
    g = network_graph(tn)
    if M == 0:
        w = cut_width(g, (), restarts, seed)
        return GAResult(CutSet(), w, [w], 1, w, {"M": 0, "N": N, "T": T, "seed": seed})
    return ga_search(g, M, N, T, seed, restarts, seed_individuals)


def run_network(
    tn: TensorNetwork,
    cut: CutSet,
    plan: ContractionPlan,
    backend: str = "serial",
    workers: int = 1,
    batch_size: int | None = None,
    max_rank: int | None = None,
    max_jobs: int | None = None,
    master: MasterConfig | None = None,
    on_listening=None,
) -> RunReport:
    kw = {} if max_jobs is None else {"max_jobs": max_jobs}
    if backend == "serial":
        return serial_report(tn, cut, plan, max_rank, **kw)
    if backend in ("pool", "process"):
        return run_pool(
            tn, cut, plan, workers, batch_size, max_rank, processes=backend == "process", **kw
        )
    if backend == "distributed":
        cfg = master or MasterConfig(workers=workers)
        cfg.max_rank = max_rank
        cfg.batch_size = batch_size
        if max_jobs is not None:
            cfg.max_jobs = max_jobs
        return run_distributed(cfg, tn, cut, plan, on_listening)
    raise ValueError(f"unknown backend {backend!r}")


@dataclass
class SweepRow:
    m: int
    width: int
    peak_rank: int
    cost_estimate: float
    bytes_peak: int
    feasible: bool
    edges: tuple[int, ...]
    history: list[int]
    seconds: float | None = None
    amplitude: complex | None = None

    def to_json(self, timings: bool = True) -> dict:
        out = {
            "m": self.m,
            "width": self.width,
            "peak_rank": self.peak_rank,
            "cost_estimate": self.cost_estimate,
            "bytes_peak": self.bytes_peak,
            "feasible": self.feasible,
            "edges": list(self.edges),
            "history": self.history,
        }
        if self.amplitude is not None:
            out["amplitude"] = {"re": self.amplitude.real, "im": self.amplitude.imag}
        if timings:
            out["seconds"] = self.seconds
        return out


def sweep_cuts(
    tn: TensorNetwork,
    ms,
    N: int = 11,
    T: int = 4,
    seed: int = 0,
    restarts: int = 1,
    max_rank: int | None = None,
    contract_max_jobs: int = 0,
    warm_start: bool = True,
) -> list[SweepRow]:
    """GA-searched width and planned cost for each cut count in ``ms``.

    Feasible rows with at most ``contract_max_jobs`` subnetworks are also
    contracted serially and timed. With ``warm_start`` the previous row's
    cut set plus one random edge joins the next initial population.
    """
    rows: list[SweepRow] = []
    prev: tuple[int, ...] | None = None
    edges = sorted(tn.edges)
    for m in ms:
        seeds = ()
        if warm_start and prev is not None and m == len(prev) + 1:
            extra = [e for e in edges if e not in prev]
            seeds = (prev + (random.Random(f"{seed}:{m}").choice(extra),),)
        res = search_cuts(tn, m, N, T, seed, restarts, seeds)
        plan = plan_for_cut(tn, res.cut, seed=seed)
        cost = estimate_cost(plan)
        feasible = max_rank is None or plan.peak_rank <= max_rank
        row = SweepRow(
            m, res.width, plan.peak_rank, cost.cost_estimate, cost.bytes_peak, feasible,
            res.cut.edge_ids, res.history,
        )
        if feasible and 4**m <= contract_max_jobs:
            t0 = time.perf_counter()
            row.amplitude = serial_report(tn, res.cut, plan, max_rank).amplitude
            row.seconds = time.perf_counter() - t0
        rows.append(row)
        prev = res.cut.edge_ids
    return rows

