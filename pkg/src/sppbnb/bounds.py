"""Dual-ascent lower bounds for set partitioning subproblems.

A subproblem is seen through an :class:`ActiveView`: the active items and
variables of a search node, with every active column contained in the active
item set.  A feasible dual vector pi (one value per active item, any sign)
yields the lower bound sum(pi); the heuristic alternates two moves:

* forward step -- raise all raisable pi uniformly until a new dual
  constraint saturates, repeating until nothing can rise;
* backward step -- trade value away from oversaturated items toward
  unsaturated ones, targeting a bound reduction to a factor theta, to open
  room for the next forward step.

Saturation uses a relative tolerance so integer costs survive float
accumulation.  All functions are pure: states are immutable values and safe
to use concurrently on disjoint data.
"""

from __future__ import annotations

from dataclasses import dataclass

SAT_TOL = 1e-9

ROOT_ITERATIONS = 10
NODE_ITERATIONS = 5
ROOT_THETA = 0.5
NODE_THETA = 0.3
THETA_DECAY = 0.7


def _sat_eps(cost: float) -> float:
    return SAT_TOL * max(1.0, abs(cost))


class ActiveView:
    """Index structures for the active items/variables of one subproblem.

    ``cols[v]`` lists item positions (indices into ``items``) covered by the
    v-th active variable; ``item_vars[p]`` lists active-variable positions
    covering the p-th active item.  Positions, not global ids, keep the
    bound loops free of dict lookups.
    """

    __slots__ = ("items", "vars", "cost", "cols", "item_vars")

    def __init__(self, items, vars_, cost, cols, item_vars):
        self.items = items          # tuple of global item ids
        self.vars = vars_           # tuple of global variable ids
        self.cost = cost            # per active variable
        self.cols = cols            # per active variable: tuple of item positions
        self.item_vars = item_vars  # per active item: tuple of variable positions

    @staticmethod
    def build(inst, active_items, active_vars) -> "ActiveView":
        item_pos = {j: p for p, j in enumerate(active_items)}
        cols = []
        item_vars: list[list[int]] = [[] for _ in active_items]
        for vpos, v in enumerate(active_vars):
            col = tuple(item_pos[j] for j in inst.columns[v])
            cols.append(col)
            for p in col:
                item_vars[p].append(vpos)
        return ActiveView(
            tuple(active_items),
            tuple(active_vars),
            tuple(inst.cost[v] for v in active_vars),
            tuple(cols),
            tuple(tuple(vs) for vs in item_vars),
        )


@dataclass(frozen=True)
class DualState:
    """A feasible dual point: pi per active item, slack/saturation per variable."""

    pi: tuple[float, ...]
    slack: tuple[float, ...]
    saturated: tuple[bool, ...]
    lb: float

    @staticmethod
    def from_pi(view: ActiveView, pi) -> "DualState":
        pi = tuple(float(x) for x in pi)
        slack = []
        saturated = []
        for vpos, col in enumerate(view.cols):
            s = view.cost[vpos] - sum(pi[p] for p in col)
            slack.append(s)
            saturated.append(s <= _sat_eps(view.cost[vpos]))
        return DualState(pi, tuple(slack), tuple(saturated), sum(pi))

    @staticmethod
    def zero(view: ActiveView) -> "DualState":
        return DualState.from_pi(view, (0.0,) * len(view.items))

    def feasibility_violation(self, view: ActiveView) -> float:
        """Worst constraint violation; <= 0 means feasible within tolerance."""
        worst = 0.0
        for vpos, s in enumerate(self.slack):
            worst = max(worst, -s - _sat_eps(view.cost[vpos]))
        return worst


def forward_step(state: DualState, view: ActiveView) -> DualState:
    new_state, _ = forward_step_trace(state, view)
    return new_state


def forward_step_trace(state: DualState, view: ActiveView) -> tuple[DualState, list[int]]:
    """Forward step, also reporting newly saturated variables per inner iteration.

    Each iteration raises every eligible pi (items all of whose covering
    variables are unsaturated) by the largest uniform amount that keeps
    every constraint satisfied, so at least one new variable saturates per
    iteration and the loop runs at most len(view.vars) times.
    """
    pi = list(state.pi)
    slack = list(state.slack)
    saturated = list(state.saturated)
    newly_saturated: list[int] = []
    while True:
        eligible = [
            p for p in range(len(pi))
            if view.item_vars[p] and all(not saturated[v] for v in view.item_vars[p])
        ]
        if not eligible:
            break
        eligible_set = set(eligible)
        delta = None
        for vpos, col in enumerate(view.cols):
            if saturated[vpos]:
                continue
            k = sum(1 for p in col if p in eligible_set)
            if k:
                bound = slack[vpos] / k
                if delta is None or bound < delta:
                    delta = bound
        if delta is None or delta <= 0.0:
            break
        for p in eligible:
            pi[p] += delta
        count = 0
        for vpos, col in enumerate(view.cols):
            if saturated[vpos]:
                continue
            k = sum(1 for p in col if p in eligible_set)
            if k:
                slack[vpos] -= delta * k
                if slack[vpos] <= _sat_eps(view.cost[vpos]):
                    saturated[vpos] = True
                    count += 1
        newly_saturated.append(count)
    return DualState(tuple(pi), tuple(slack), tuple(saturated), sum(pi)), newly_saturated


APPLIED = "applied"
SKIPPED = "skipped"
CLAMPED = "clamped"


def backward_step(state: DualState, theta: float, view: ActiveView) -> DualState:
    new_state, _ = backward_step_trace(state, theta, view)
    return new_state


def backward_step_trace(state: DualState, theta: float, view: ActiveView) -> tuple[DualState, str]:
    """Backward step with skip/clamp semantics; returns (state, outcome).

    With alpha_j = saturated covering variables of item j, each pi_j moves
    by delta2 * coeff_j where coeff_j = +1 if alpha_j == 0 else -(alpha_j-1).
    The target delta2 scales the bound to theta * lb; it is skipped when the
    target is not a positive move and clamped wherever a variable's slack
    would otherwise go negative.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    if state.lb <= 0.0:
        return state, SKIPPED
    n_items = len(state.pi)
    coeff = []
    for p in range(n_items):
        alpha = sum(1 for v in view.item_vars[p] if state.saturated[v])
        coeff.append(1.0 if alpha == 0 else -(alpha - 1.0))
    total = sum(coeff)
    if total == 0.0:
        return state, SKIPPED
    delta2 = state.lb * (theta - 1.0) / total
    if delta2 <= 0.0:
        return state, SKIPPED
    clamped = False
    for vpos, col in enumerate(view.cols):
        gain = sum(coeff[p] for p in col)
        if gain > 0.0:
            limit = state.slack[vpos] / gain
            if limit < delta2:
                delta2 = limit
                clamped = True
    if delta2 <= 1e-15:
        return state, SKIPPED
    pi = tuple(state.pi[p] + delta2 * coeff[p] for p in range(n_items))
    return DualState.from_pi(view, pi), (CLAMPED if clamped else APPLIED)


def dual_bound(
    view: ActiveView,
    inherited_pi,
    fixed_cost: float,
    is_root: bool,
) -> tuple[float, tuple[float, ...]]:
    """Run the full ascent schedule; return (fixed_cost + sum(pi), final pi).

    The schedule is 10 iterations from theta = 0.5 at the root and 5 from
    theta = 0.3 elsewhere, theta decaying by 0.7 each round; the backward
    step is not executed in the last iteration.  The result lower-bounds
    every completion of the subproblem.
    """
    if not view.items:
        return float(fixed_cost), ()
    state = DualState.from_pi(view, inherited_pi)
    iterations = ROOT_ITERATIONS if is_root else NODE_ITERATIONS
    theta = ROOT_THETA if is_root else NODE_THETA
    for t in range(1, iterations + 1):
        state = forward_step(state, view)
        if t < iterations:
            state = backward_step(state, theta, view)
            theta *= THETA_DECAY
    return fixed_cost + state.lb, state.pi
