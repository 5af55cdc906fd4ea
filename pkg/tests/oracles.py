"""Independent reference computations used by the tests.

Everything here is deliberately brute force and shares no code with the
solver: subset enumeration for optimal partitions, direct slack
recomputation for dual feasibility, and raw score recomputation for
branching choices.
"""

from __future__ import annotations

import numpy as np

from sppbnb.instance import SppInstance


def exact_cover_best(m_items: int, columns, costs) -> tuple[int | None, tuple[int, ...]]:
    """Best exact cover by full 2^n subset enumeration (None if none exists)."""
    n = len(columns)
    assert n <= 22, "enumeration oracle capped at 2^22 subsets"
    if n == 0:
        return (0, ()) if m_items == 0 else (None, ())
    A = np.zeros((n, m_items), dtype=np.int64)
    for v, col in enumerate(columns):
        A[v, list(col)] = 1
    cost_vec = np.asarray(costs, dtype=np.int64)
    idx = np.arange(2**n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    cover = bits @ A
    feasible = (cover == 1).all(axis=1)
    if not feasible.any():
        return None, ()
    totals = bits @ cost_vec
    totals = np.where(feasible, totals, np.iinfo(np.int64).max)
    best = int(totals.argmin())
    chosen = tuple(v for v in range(n) if (best >> v) & 1)
    return int(totals[best]), chosen


def brute_force_best(inst: SppInstance) -> tuple[int | None, tuple[int, ...]]:
    return exact_cover_best(inst.m_items, inst.columns, inst.cost)


def node_completion_best(inst: SppInstance, active_items, active_vars, fixed_cost: int):
    """Cheapest completion of a subproblem, or None if it has no completion."""
    items = list(active_items)
    remap = {j: p for p, j in enumerate(items)}
    cols = [tuple(remap[j] for j in inst.columns[v]) for v in active_vars]
    costs = [inst.cost[v] for v in active_vars]
    best, _ = exact_cover_best(len(items), cols, costs)
    return None if best is None else best + fixed_cost


def dual_violation(inst: SppInstance, active_items, active_vars, pi) -> float:
    """Worst relative dual-constraint violation of pi, recomputed from scratch."""
    value = {j: x for j, x in zip(active_items, pi)}
    worst = 0.0
    for v in active_vars:
        cost = inst.cost[v]
        slack = cost - sum(value[j] for j in inst.columns[v])
        worst = max(worst, (-slack) / max(1.0, abs(cost)))
    return worst


def branch_scores(inst: SppInstance, active_items, active_vars) -> dict[int, int]:
    """Raw branching score per item: sum over covering variables of the count
    of active items each one leaves uncovered."""
    active_vars = set(active_vars)
    items = set(active_items)
    scores = {}
    for j in active_items:
        covering = [v for v in inst.rows[j] if v in active_vars]
        scores[j] = sum(len(items - set(inst.columns[v])) for v in covering)
    return scores
