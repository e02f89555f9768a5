import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcut.circuit import parse_circuit, qaoa_circuit, random_regular_graph
from qcut.contraction import (
    ContractionPlan,
    RankLimitError,
    best_plan,
    contract_pair,
    estimate_cost,
    execute_plan,
    greedy_plan,
    plan_from_order,
    plan_width,
    tensor_bytes,
)
from qcut.network import Tensor, build_network, network_graph
from qcut.ordering import best_order, min_degree_order
from qcut.oracle import dm_simulate

from conftest import random_circuit


def loop_contract(e: Tensor, f: Tensor) -> Tensor:
    """Explicit index loops, the definition of a pairwise contraction."""
    shared = [x for x in e.legs if x in f.legs]
    free_e = [x for x in e.legs if x not in shared]
    free_f = [x for x in f.legs if x not in shared]
    out = np.zeros((4,) * (len(free_e) + len(free_f)), dtype=complex)
    for free in itertools.product(range(4), repeat=len(free_e) + len(free_f)):
        val = {**dict(zip(free_e, free[: len(free_e)])), **dict(zip(free_f, free[len(free_e) :]))}
        total = 0j
        for s in itertools.product(range(4), repeat=len(shared)):
            val.update(zip(shared, s))
            total += e.data[tuple(val[x] for x in e.legs)] * f.data[tuple(val[x] for x in f.legs)]
        out[free] = total
    return Tensor(out, free_e + free_f)


def rand_tensor(rng, legs):
    shape = (4,) * len(legs)
    return Tensor(rng.normal(size=shape) + 1j * rng.normal(size=shape), list(legs))


class TestContractPair:
    def test_three_plus_two_by_two_plus_three(self, nprng):
        e = rand_tensor(nprng, [1, 2, 3, 10, 11])
        f = rand_tensor(nprng, [11, 4, 10, 5, 6])
        out = contract_pair(e, f)
        assert out.rank == 6 and out.legs == (1, 2, 3, 4, 5, 6)
        ref = loop_contract(e, f)
        np.testing.assert_allclose(out.data, ref.data, atol=1e-12)

    @pytest.mark.parametrize("re,rf,k", [(1, 1, 1), (2, 3, 1), (3, 3, 3), (4, 2, 2)])
    def test_against_loops(self, nprng, re, rf, k):
        e = rand_tensor(nprng, list(range(re)))
        f = rand_tensor(nprng, list(range(re - k, re - k + rf)))
        out = contract_pair(e, f)
        ref = loop_contract(e, f)
        assert out.legs == tuple(ref.legs)
        np.testing.assert_allclose(out.data, ref.data, atol=1e-11)

    def test_explicit_subset_of_shared(self, nprng):
        e = rand_tensor(nprng, [0, 1])
        f = rand_tensor(nprng, [1, 0])
        out = contract_pair(e, f, [1])
        assert out.legs == (0, 0)
        np.testing.assert_allclose(out.data, np.einsum("ab,bc->ac", e.data, f.data))

    def test_no_shared(self, nprng):
        with pytest.raises(ValueError, match="share no legs"):
            contract_pair(rand_tensor(nprng, [0]), rand_tensor(nprng, [1]))

    def test_leg_not_present(self, nprng):
        with pytest.raises(ValueError):
            contract_pair(rand_tensor(nprng, [0]), rand_tensor(nprng, [0]), [5])

    def test_rank_limit(self, nprng):
        e = rand_tensor(nprng, [0, 1, 2])
        f = rand_tensor(nprng, [2, 3, 4])
        with pytest.raises(RankLimitError, match="rank 4") as info:
            contract_pair(e, f, max_rank=3)
        assert info.value.rank == 4 and info.value.max_rank == 3


class TestPlan:
    def test_single_qubit_plan(self):
        tn = build_network(parse_circuit("qubits 1\nh 0\n"))
        plan = plan_from_order(tn, [0, 1, 2])
        assert len(plan.steps) == 2 and plan.peak_rank == 2
        assert execute_plan(tn, plan) == pytest.approx(0.5)

    def test_order_must_be_permutation(self):
        tn = build_network(parse_circuit("qubits 1\nh 0\n"))
        with pytest.raises(ValueError):
            plan_from_order(tn, [0, 1])

    def test_every_order_gives_the_same_value(self, nprng):
        c = random_circuit(nprng, 3, 8)
        tn = build_network(c)
        ref = dm_simulate(c)
        verts = list(tn.tensors)
        for _ in range(20):
            order = list(nprng.permutation(verts))
            assert abs(execute_plan(tn, plan_from_order(tn, order)) - ref) < 1e-12

    def test_star_exceeds_width_plus_one(self):
        # one 2q gate gives a star: width 1, yet the gate tensor alone has rank
        # 4, so peak rank is bounded by degree * (width + 1) and not width + 1
        tn = build_network(parse_circuit("qubits 2\ncz 0 1\n"))
        g = network_graph(tn)
        order = min_degree_order(g.adjacency(), 0)
        plan = plan_from_order(tn, order)
        assert plan_width(tn, plan) == 1
        assert plan.peak_rank == 4  # the gate tensor itself
        assert plan.peak_rank <= 4 * (1 + 1)

    def test_json_round_trip(self, nprng):
        tn = build_network(random_circuit(nprng, 3, 6))
        plan = best_plan(tn)
        back = ContractionPlan.from_json(plan.to_json())
        assert back.steps == plan.steps and back.peak_rank == plan.peak_rank
        assert execute_plan(tn, back) == execute_plan(tn, plan)

    def test_greedy_plan(self, nprng):
        c = random_circuit(nprng, 4, 12)
        tn = build_network(c)
        plan = greedy_plan(tn)
        assert plan.order is None and abs(execute_plan(tn, plan) - dm_simulate(c)) < 1e-12
        with pytest.raises(ValueError):
            plan_width(tn, plan)

    def test_best_plan_not_worse_than_candidates(self):
        tn = build_network(qaoa_circuit(random_regular_graph(10, 3, 5)))
        peak = best_plan(tn).peak_rank
        assert peak <= greedy_plan(tn).peak_rank
        assert peak <= plan_from_order(tn, sorted(tn.tensors)).peak_rank

    def test_best_plan_is_deterministic(self):
        tn = build_network(qaoa_circuit(random_regular_graph(12, 3, 1)))
        assert best_plan(tn, restarts=2, seed=3).steps == best_plan(tn, restarts=2, seed=3).steps

    def test_guard_rejects_before_contracting(self):
        tn = build_network(qaoa_circuit(random_regular_graph(12, 3, 2)))
        plan = best_plan(tn)
        with pytest.raises(RankLimitError, match=f"rank {plan.peak_rank}"):
            execute_plan(tn, plan, max_rank=plan.peak_rank - 1)
        assert execute_plan(tn, plan, max_rank=plan.peak_rank) == execute_plan(tn, plan)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([6, 8, 10, 12, 14, 16]), st.integers(0, 10**6))
def test_peak_rank_bounded_by_degree_times_width(n, seed):
    tn = build_network(qaoa_circuit(random_regular_graph(n, 3, seed)))
    g = network_graph(tn)
    order, w = best_order(g, seed=seed)
    plan = plan_from_order(tn, order)
    assert plan_width(tn, plan) == w
    maxdeg = max(len(t.legs) for t in tn.tensors.values())
    assert plan.peak_rank <= maxdeg * (w + 1)
    assert w >= 1 and len(g.vertices) == len(tn.tensors)


class TestCostEstimate:
    @pytest.mark.parametrize("rank,nbytes", [(0, 16), (1, 64), (13, 2**30), (17, 2**38)])
    def test_tensor_bytes(self, rank, nbytes):
        assert tensor_bytes(rank) == nbytes

    def test_estimate_has_no_side_effects(self):
        tn = build_network(qaoa_circuit(random_regular_graph(8, 3, 0)))
        plan = best_plan(tn)
        cost = estimate_cost(plan)
        assert cost.peak_rank == plan.peak_rank
        assert cost.bytes_peak >= tensor_bytes(plan.peak_rank)
        assert cost.cost_estimate == sum(4.0**s.workspace for s in plan.steps)

    def test_rank_17_rejected(self):
        err = RankLimitError(17, 13)
        assert "rank 17" in str(err) and str(2**38) in str(err)
