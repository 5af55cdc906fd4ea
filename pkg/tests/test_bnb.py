import math
import random

import pytest

from oracles import branch_scores, brute_force_best, node_completion_best
from sppbnb.bnb_core import (
    BnbNode,
    DeadEndError,
    Incumbent,
    NodeList,
    ResourceLimitError,
    SearchContext,
    SolveConfig,
    check_node_invariants,
    enforce_budget,
    expand,
    make_root,
    node_size_bytes,
    process_node,
    select_branch_item,
    solve_sequential,
)
from sppbnb.instance import GeneratorParams, SppInstance, generate

TINY = SppInstance.build(2, [4, 1, 3], [(0, 1), (0,), (1,)], name="tiny")


def random_instance(rng, feasible_only=False):
    while True:
        inst = generate(
            GeneratorParams(
                rng.randint(3, 8), rng.randint(4, 15), rng.choice([0.3, 0.5]),
                seed=rng.getrandbits(32),
                ensure_coverage=rng.random() < 0.7,
            )
        )
        if not feasible_only or brute_force_best(inst)[0] is not None:
            return inst


def test_select_branch_single_item():
    node = BnbNode((1,), (0, 2), (), 0, (0.0,), 0, 0.0)
    assert select_branch_item(node, TINY) == 1


def test_select_branch_tie_goes_to_smallest():
    root = make_root(TINY)
    # scores: item 0 -> delta(v1)+delta(v2) = 0+1, item 1 -> delta(v1)+delta(v3) = 0+1
    assert select_branch_item(root, TINY) == 0


def test_select_branch_matches_raw_scores():
    rng = random.Random(11)
    checked = 0
    for _ in range(100):
        inst = random_instance(rng)
        root = make_root(inst)
        try:
            chosen = select_branch_item(root, inst)
        except DeadEndError:
            continue  # uncovered instance: dead end at the root
        checked += 1
        scores = branch_scores(inst, root.active_items, root.active_vars)
        best = min(scores.values())
        assert scores[chosen] == best
        assert chosen == min(j for j, s in scores.items() if s == best)
    assert checked > 50


def test_select_branch_dead_end():
    inst = SppInstance.build(2, [1], [(0,)])  # item 1 uncovered
    with pytest.raises(DeadEndError) as exc:
        select_branch_item(make_root(inst), inst)
    assert exc.value.item == 1


def test_expand_hand_example():
    root = make_root(TINY)
    root.pi = (1.0, 3.0)
    children = expand(root, TINY, branch_item=0)
    # v1 has delta=0 -> first with empty items; v2 ratio (1-1)/1 = 0 second.
    assert [c.fixed_one[-1] for c in children] == [0, 1]
    assert children[0].active_items == ()
    assert children[0].fixed_cost == 4
    assert children[1].active_items == (1,)
    assert children[1].active_vars == (2,)
    assert children[1].pi == (3.0,)
    assert children[1].level == 1


def test_expand_invariants_random():
    rng = random.Random(5)
    for _ in range(60):
        inst = random_instance(rng)
        node = make_root(inst)
        for _ in range(3):
            try:
                item = select_branch_item(node, inst)
            except DeadEndError:
                break
            children = expand(node, inst, item)
            assert children
            ratios = []
            for child in children:
                assert check_node_invariants(child, inst) == []
                v = child.fixed_one[-1]
                col = inst.columns[v]
                delta = len(node.active_items) - len(col)
                pi_of = dict(zip(node.active_items, node.pi))
                slack = inst.cost[v] - sum(pi_of[j] for j in col)
                ratios.append(-math.inf if delta == 0 else slack / delta)
            assert ratios == sorted(ratios)
            node = next((c for c in children if c.active_items), None)
            if node is None:
                break


def test_node_size_formula():
    empty = BnbNode((), (), (), 0, (), 0, 0.0)
    assert node_size_bytes(empty) == 64
    node = BnbNode((0, 1), (0, 1, 2), (), 0, (0.0, 0.0), 0, 0.0)
    assert node_size_bytes(node) == 120


def test_child_not_larger_than_parent():
    rng = random.Random(17)
    for _ in range(40):
        inst = random_instance(rng)
        node = make_root(inst)
        try:
            children = expand(node, inst)
        except DeadEndError:
            continue
        for child in children:
            assert node_size_bytes(child) <= node_size_bytes(node)


def test_solve_uncovered_is_infeasible():
    inst = SppInstance.build(3, [1, 1], [(0,), (1,)])
    sol = solve_sequential(inst)
    assert sol.status == "Infeasible"
    assert sol.best_cost is None
    assert sol.nodes_pruned_deadend == 1


def test_solve_tiny_keeps_first_feasible_on_tie():
    sol = solve_sequential(TINY)
    assert sol.status == "Optimal"
    assert sol.best_cost == 4
    assert sol.chosen_vars == (0,)  # {v2, v3} also costs 4 but is found later


def test_solve_matches_enumeration():
    rng = random.Random(23)
    for _ in range(60):
        inst = random_instance(rng)
        best, _ = brute_force_best(inst)
        for traversal in ("depth", "breadth"):
            sol = solve_sequential(inst, SolveConfig(traversal=traversal))
            if best is None:
                assert sol.status == "Infeasible"
            else:
                assert sol.best_cost == best
                chosen_cols = [set(inst.columns[v]) for v in sol.chosen_vars]
                covered = set().union(*chosen_cols) if chosen_cols else set()
                assert covered == set(range(inst.m_items))
                assert sum(len(c) for c in chosen_cols) == inst.m_items
                assert sum(inst.cost[v] for v in sol.chosen_vars) == best


def test_counter_conservation():
    rng = random.Random(31)
    for _ in range(30):
        inst = random_instance(rng)
        sol = solve_sequential(inst)
        assert sol.nodes_processed == sol.nodes_generated + 1


def test_bound_safety_on_pruned_nodes():
    rng = random.Random(41)
    prunes = []

    def hook(node, lb, incumbent):
        prunes.append((node.active_items, node.active_vars, node.fixed_cost, lb, incumbent))

    checked = 0
    for _ in range(25):
        inst = random_instance(rng, feasible_only=True)
        prunes.clear()
        solve_sequential(inst, SolveConfig(prune_hook=hook))
        for items, vars_, fixed, lb, incumbent in prunes:
            completion = node_completion_best(inst, items, vars_, fixed)
            if completion is not None:
                checked += 1
                assert completion >= incumbent
    assert checked > 5


def test_budget_noop_under_limit():
    ctx = SearchContext(inst=TINY, incumbent=Incumbent())
    tl = NodeList()
    tl.push(make_root(TINY))
    before = len(tl)
    enforce_budget(tl, 10**9, ctx)
    assert len(tl) == before


def test_budget_zero_degenerates_to_depth_first():
    rng = random.Random(59)
    for _ in range(15):
        inst = random_instance(rng)
        best, _ = brute_force_best(inst)
        sol = solve_sequential(inst, SolveConfig(traversal="breadth", budget_bytes=0))
        assert sol.best_cost == best
        assert sol.status == ("Infeasible" if best is None else "Optimal")


def test_budget_peak_instrumented():
    inst = generate(GeneratorParams(20, 50, 0.15, seed=2))
    for budget in (256, 1024, 4096):
        ctx = SearchContext(inst=inst, incumbent=Incumbent())
        tl = NodeList()
        tl.push(make_root(inst))
        while len(tl):
            node = tl.pop_oldest()
            for child in process_node(node, ctx):
                tl.push(child)
                enforce_budget(tl, budget, ctx)
        assert tl.peak_bytes <= budget + tl.max_node_bytes
        assert ctx.incumbent.cost == brute_force_best(inst)[0] if inst.n_vars <= 22 else True


def test_resource_limit_error():
    inst = generate(GeneratorParams(8, 14, 0.3, seed=4))
    with pytest.raises(ResourceLimitError):
        solve_sequential(inst, SolveConfig(max_nodes=2))
