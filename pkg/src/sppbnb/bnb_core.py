"""Branch-and-bound core: nodes, branching, pruning, sequential search.

A node fixes some variables to one; fixing removes the covered items and
every overlapping variable, so each active column always lies inside the
active item set.  Children are ordered by the reduced-cost-per-remaining-
item ratio so that cheap, near-complete fixings are explored first.

Traversal is either plain recursive depth-first or breadth-first over a
FIFO list whose byte footprint is capped: when the list outgrows its
budget, the newest nodes are solved immediately by the recursive
depth-first routine instead of being kept.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .bounds import ActiveView, dual_bound
from .instance import SppInstance

NODE_BASE_BYTES = 64
PRUNE_EPS = 1e-6


class DeadEndError(Exception):
    """An active item has no active covering variable."""

    def __init__(self, item: int):
        super().__init__(f"item {item} has no active covering variable")
        self.item = item


class ResourceLimitError(RuntimeError):
    """A configured node or memory limit was exceeded before completion."""


@dataclass
class BnbNode:
    """One subproblem: remaining items/variables plus the fixed-to-one set."""

    active_items: tuple[int, ...]
    active_vars: tuple[int, ...]
    fixed_one: tuple[int, ...]
    fixed_cost: int
    pi: tuple[float, ...]
    level: int
    lb: float

    def size_bytes(self) -> int:
        return node_size_bytes(self)


def node_size_bytes(node: BnbNode) -> int:
    """Documented accounting: 64 base bytes plus 8 per stored id/float."""
    return NODE_BASE_BYTES + 8 * (
        len(node.active_items) + len(node.active_vars) + len(node.pi) + len(node.fixed_one)
    )


def make_root(inst: SppInstance) -> BnbNode:
    return BnbNode(
        active_items=tuple(range(inst.m_items)),
        active_vars=tuple(range(inst.n_vars)),
        fixed_one=(),
        fixed_cost=0,
        pi=(0.0,) * inst.m_items,
        level=0,
        lb=0.0,
    )


def check_node_invariants(node: BnbNode, inst: SppInstance) -> list[str]:
    """Structural audit used by tests; empty report means consistent."""
    report = []
    items = set(node.active_items)
    for v in node.active_vars:
        col = inst.columns[v]
        if not set(col) <= items:
            report.append(f"active variable {v} covers removed items")
    seen: set[int] = set()
    for v in node.fixed_one:
        col = set(inst.columns[v])
        if col & seen:
            report.append(f"fixed variable {v} overlaps another fixed column")
        seen |= col
    if seen & items:
        report.append("active items intersect items covered by fixed variables")
    if node.fixed_cost != sum(inst.cost[v] for v in node.fixed_one):
        report.append("fixed_cost does not match the fixed columns")
    if node.level != len(node.fixed_one):
        report.append("level does not equal |fixed_one|")
    if len(node.pi) != len(node.active_items):
        report.append("pi length does not match active items")
    return report


def select_branch_item(node: BnbNode, inst: SppInstance) -> int:
    """Pick the item whose child set is collectively smallest.

    delta_v counts the active items a variable does not cover; the chosen
    item minimizes the sum of delta over its active covering variables,
    i.e. the total number of items surviving across all children.  Ties go
    to the smallest item id.  Raises DeadEndError when some active item has
    no active covering variable.
    """
    active_vars = set(node.active_vars)
    n_active = len(node.active_items)
    best_item = -1
    best_score = None
    for j in node.active_items:
        covering = [v for v in inst.rows[j] if v in active_vars]
        if not covering:
            raise DeadEndError(j)
        score = sum(n_active - len(inst.columns[v]) for v in covering)
        if best_score is None or score < best_score:
            best_item, best_score = j, score
    return best_item


def expand(node: BnbNode, inst: SppInstance, branch_item: int | None = None) -> list[BnbNode]:
    """Create one child per active variable covering the branch item.

    A child fixes its variable to one: the variable's items leave the
    active set, every overlapping variable is dropped, and the surviving
    items keep their inherited pi values.  Children are ordered by
    non-decreasing (cost - covered pi) / delta, a delta of zero sorting
    first (such a child is already a feasible completion); ties break on
    the variable id.
    """
    if branch_item is None:
        branch_item = select_branch_item(node, inst)
    active_vars = set(node.active_vars)
    n_active = len(node.active_items)
    pi_of = dict(zip(node.active_items, node.pi))
    keyed = []
    for v in inst.rows[branch_item]:
        if v not in active_vars:
            continue
        col = inst.columns[v]
        slack = inst.cost[v] - sum(pi_of[j] for j in col)
        delta = n_active - len(col)
        ratio = -math.inf if delta == 0 else slack / delta
        keyed.append((ratio, v))
    keyed.sort()
    children = []
    for _, v in keyed:
        removed_items = set(inst.columns[v])
        overlapping = {
            w for j in inst.columns[v] for w in inst.rows[j] if w in active_vars
        }
        child_items = tuple(j for j in node.active_items if j not in removed_items)
        children.append(
            BnbNode(
                active_items=child_items,
                active_vars=tuple(w for w in node.active_vars if w not in overlapping),
                fixed_one=node.fixed_one + (v,),
                fixed_cost=node.fixed_cost + inst.cost[v],
                pi=tuple(pi_of[j] for j in child_items),
                level=node.level + 1,
                lb=node.lb,
            )
        )
    return children


@dataclass
class Solution:
    """Outcome of an exact search."""

    status: str  # "Optimal" | "Infeasible"
    best_cost: Optional[int]
    chosen_vars: tuple[int, ...]
    nodes_expanded: int
    nodes_pruned_bound: int
    nodes_pruned_deadend: int
    nodes_feasible: int
    nodes_generated: int

    @property
    def nodes_processed(self) -> int:
        return (
            self.nodes_expanded
            + self.nodes_pruned_bound
            + self.nodes_pruned_deadend
            + self.nodes_feasible
        )


class Incumbent:
    """Best feasible solution so far; only strict improvements are kept."""

    __slots__ = ("cost", "chosen")

    def __init__(self):
        self.cost: Optional[int] = None
        self.chosen: tuple[int, ...] = ()

    def threshold(self) -> float:
        return math.inf if self.cost is None else self.cost

    def offer(self, cost: int, chosen: tuple[int, ...]) -> bool:
        if self.cost is None or cost < self.cost:
            self.cost, self.chosen = cost, chosen
            return True
        return False


@dataclass
class SearchContext:
    """Everything one search thread needs while consuming nodes."""

    inst: SppInstance
    incumbent: Incumbent
    max_nodes: Optional[int] = None
    bound_hook: Optional[Callable[[BnbNode, float, tuple[float, ...]], None]] = None
    prune_hook: Optional[Callable[[BnbNode, float, float], None]] = None
    nodes_expanded: int = 0
    nodes_pruned_bound: int = 0
    nodes_pruned_deadend: int = 0
    nodes_feasible: int = 0
    nodes_generated: int = 0

    @property
    def nodes_processed(self) -> int:
        return (
            self.nodes_expanded
            + self.nodes_pruned_bound
            + self.nodes_pruned_deadend
            + self.nodes_feasible
        )


def process_node(node: BnbNode, ctx: SearchContext) -> list[BnbNode]:
    """Take one node to a decision; return the children to enqueue (if any).

    Order of checks: feasible completion, dead end, bound-and-prune,
    expand.  Pruning compares the integer-rounded bound against the
    incumbent, which is exact for integral costs.
    """
    if ctx.max_nodes is not None and ctx.nodes_processed >= ctx.max_nodes:
        raise ResourceLimitError(f"node limit {ctx.max_nodes} reached")
    inst = ctx.inst
    if not node.active_items:
        ctx.nodes_feasible += 1
        ctx.incumbent.offer(node.fixed_cost, node.fixed_one)
        return []
    try:
        branch_item = select_branch_item(node, inst)
    except DeadEndError:
        ctx.nodes_pruned_deadend += 1
        return []
    view = ActiveView.build(inst, node.active_items, node.active_vars)
    lb, pi = dual_bound(view, node.pi, node.fixed_cost, is_root=node.level == 0)
    node.lb = lb
    node.pi = pi
    if ctx.bound_hook is not None:
        ctx.bound_hook(node, lb, pi)
    if math.ceil(lb - PRUNE_EPS) >= ctx.incumbent.threshold():
        if ctx.prune_hook is not None:
            ctx.prune_hook(node, lb, ctx.incumbent.threshold())
        ctx.nodes_pruned_bound += 1
        return []
    ctx.nodes_expanded += 1
    children = expand(node, inst, branch_item)
    ctx.nodes_generated += len(children)
    return children


def solve_subtree_depth(node: BnbNode, ctx: SearchContext) -> None:
    """Recursive depth-first search of an entire subtree (no list kept)."""
    for child in process_node(node, ctx):
        solve_subtree_depth(child, ctx)


class NodeList:
    """FIFO node list with byte accounting and a peak watermark."""

    __slots__ = ("nodes", "bytes", "peak_bytes", "max_node_bytes")

    def __init__(self):
        self.nodes: deque[BnbNode] = deque()
        self.bytes = 0
        self.peak_bytes = 0
        self.max_node_bytes = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def push(self, node: BnbNode) -> None:
        size = node_size_bytes(node)
        self.nodes.append(node)
        self.bytes += size
        self.peak_bytes = max(self.peak_bytes, self.bytes)
        self.max_node_bytes = max(self.max_node_bytes, size)

    def extend(self, nodes) -> None:
        for node in nodes:
            self.push(node)

    def pop_oldest(self) -> BnbNode:
        node = self.nodes.popleft()
        self.bytes -= node_size_bytes(node)
        return node

    def pop_newest(self) -> BnbNode:
        node = self.nodes.pop()
        self.bytes -= node_size_bytes(node)
        return node


def enforce_budget(tl: NodeList, budget: int, ctx: SearchContext) -> None:
    """Shrink the list to its byte budget by depth-first-solving newest nodes."""
    while tl.bytes > budget and len(tl) > 0:
        solve_subtree_depth(tl.pop_newest(), ctx)


def push_within_budget(tl: NodeList, nodes, budget: Optional[int], ctx: SearchContext) -> None:
    """Insert nodes one at a time, re-enforcing the budget after each push so
    the list never holds more than budget + one node's worth of bytes."""
    for node in nodes:
        tl.push(node)
        if budget is not None:
            enforce_budget(tl, budget, ctx)


@dataclass
class SolveConfig:
    traversal: str = "depth"  # "depth" | "breadth"
    budget_bytes: Optional[int] = None  # breadth-mode list cap; None = unbounded
    max_nodes: Optional[int] = None
    bound_hook: Optional[Callable] = None
    prune_hook: Optional[Callable] = None


def _finish(ctx: SearchContext) -> Solution:
    if ctx.incumbent.cost is None:
        return Solution(
            "Infeasible", None, (), ctx.nodes_expanded, ctx.nodes_pruned_bound,
            ctx.nodes_pruned_deadend, ctx.nodes_feasible, ctx.nodes_generated,
        )
    return Solution(
        "Optimal", ctx.incumbent.cost, ctx.incumbent.chosen, ctx.nodes_expanded,
        ctx.nodes_pruned_bound, ctx.nodes_pruned_deadend, ctx.nodes_feasible,
        ctx.nodes_generated,
    )


def solve_sequential(inst: SppInstance, cfg: SolveConfig | None = None) -> Solution:
    """Exact single-threaded search; the plain-DFS form is the speedup baseline."""
    cfg = cfg or SolveConfig()
    if cfg.traversal not in ("depth", "breadth"):
        raise ValueError(f"unknown traversal {cfg.traversal!r}")
    ctx = SearchContext(
        inst=inst,
        incumbent=Incumbent(),
        max_nodes=cfg.max_nodes,
        bound_hook=cfg.bound_hook,
        prune_hook=cfg.prune_hook,
    )
    root = make_root(inst)
    if cfg.traversal == "depth":
        solve_subtree_depth(root, ctx)
        return _finish(ctx)
    tl = NodeList()
    tl.push(root)
    while len(tl):
        node = tl.pop_oldest()
        push_within_budget(tl, process_node(node, ctx), cfg.budget_bytes, ctx)
    return _finish(ctx)
