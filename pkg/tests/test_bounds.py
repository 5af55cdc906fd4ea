import math
import random

import pytest

from oracles import brute_force_best, dual_violation
from sppbnb.bounds import (
    APPLIED,
    ActiveView,
    DualState,
    backward_step,
    backward_step_trace,
    dual_bound,
    forward_step,
    forward_step_trace,
)
from sppbnb.instance import GeneratorParams, SppInstance, generate


def tiny_view():
    # items {0,1}; v1={0,1} c=4, v2={0} c=1, v3={1} c=3
    inst = SppInstance.build(2, [4, 1, 3], [(0, 1), (0,), (1,)], name="tiny")
    return inst, ActiveView.build(inst, (0, 1), (0, 1, 2))


def random_view(rng, max_m=8, max_n=14):
    m = rng.randint(2, max_m)
    n = rng.randint(2, max_n)
    inst = generate(GeneratorParams(m, n, rng.choice([0.3, 0.5]), seed=rng.getrandbits(32)))
    return inst, ActiveView.build(inst, tuple(range(inst.m_items)), tuple(range(inst.n_vars)))


def random_feasible_state(view, rng):
    """A dual-feasible starting point with varied saturation structure."""
    kind = rng.randrange(3)
    if kind == 0:
        return DualState.zero(view)
    if kind == 1:
        # Nonpositive pi is always feasible for nonnegative costs.
        return DualState.from_pi(view, [-rng.random() * 5 for _ in view.items])
    # A scaled-back forward result keeps feasibility, some slack near zero.
    full = forward_step(DualState.zero(view), view)
    scale = rng.random()
    return DualState.from_pi(view, [x * scale for x in full.pi])


def test_forward_hand_example():
    _, view = tiny_view()
    out = forward_step(DualState.zero(view), view)
    assert out.pi == (1.0, 3.0)
    assert out.lb == 4.0
    assert all(out.saturated)


def test_forward_all_saturated_unchanged():
    _, view = tiny_view()
    state = forward_step(DualState.zero(view), view)
    again = forward_step(state, view)
    assert again.pi == state.pi


def test_forward_single_item_single_var():
    inst = SppInstance.build(1, [7], [(0,)])
    view = ActiveView.build(inst, (0,), (0,))
    out, saturations = forward_step_trace(DualState.zero(view), view)
    assert out.pi == (7.0,)
    assert out.lb == 7.0
    assert saturations == [1]


def test_forward_progress_and_bounds():
    rng = random.Random(42)
    for _ in range(200):
        inst, view = random_view(rng)
        state = random_feasible_state(view, rng)
        out, saturations = forward_step_trace(state, view)
        assert all(count >= 1 for count in saturations)
        assert len(saturations) <= len(view.vars)
        assert out.lb >= state.lb - 1e-9
        assert dual_violation(inst, view.items, view.vars, out.pi) <= 1e-9


def test_backward_zero_state_skipped():
    _, view = tiny_view()
    state = DualState.zero(view)
    out, outcome = backward_step_trace(state, 0.5, view)
    assert outcome == "skipped"
    assert out.pi == state.pi


def test_backward_hand_example():
    _, view = tiny_view()
    state = forward_step(DualState.zero(view), view)
    out, outcome = backward_step_trace(state, 0.5, view)
    assert outcome == APPLIED
    assert out.pi == (0.0, 2.0)
    assert out.lb == pytest.approx(2.0)


def test_backward_theta_validation():
    _, view = tiny_view()
    state = DualState.zero(view)
    with pytest.raises(ValueError):
        backward_step(state, 1.0, view)


def test_backward_feasibility_and_target():
    rng = random.Random(7)
    applied = 0
    for _ in range(300):
        inst, view = random_view(rng)
        state = forward_step(random_feasible_state(view, rng), view)
        theta = rng.uniform(0.05, 0.95)
        out, outcome = backward_step_trace(state, theta, view)
        assert dual_violation(inst, view.items, view.vars, out.pi) <= 1e-9
        if outcome == APPLIED:
            applied += 1
            assert out.lb == pytest.approx(theta * state.lb, rel=1e-6, abs=1e-9)
            assert out.lb >= theta * state.lb - 1e-6
    assert applied > 50  # the target case must actually be exercised


def test_dual_bound_empty_view():
    inst = SppInstance.build(2, [4, 1, 3], [(0, 1), (0,), (1,)])
    view = ActiveView.build(inst, (), ())
    lb, pi = dual_bound(view, (), fixed_cost=11, is_root=False)
    assert lb == 11
    assert pi == ()


def test_dual_bound_hand_example_reaches_lp_optimum():
    _, view = tiny_view()
    lb, pi = dual_bound(view, (0.0, 0.0), 0, is_root=True)
    assert lb == pytest.approx(4.0)
    assert sum(pi) == pytest.approx(4.0)


def test_dual_bound_below_integer_optimum():
    rng = random.Random(3)
    checked = 0
    for _ in range(100):
        inst, view = random_view(rng)
        best, _ = brute_force_best(inst)
        lb, pi = dual_bound(view, (0.0,) * len(view.items), 0, is_root=True)
        assert dual_violation(inst, view.items, view.vars, pi) <= 1e-9
        if best is not None:
            checked += 1
            assert lb <= best + 1e-6
    assert checked > 40


def test_dual_bound_inherited_pi():
    # Children inherit pi; the bound must stay feasible and not regress.
    inst = SppInstance.build(3, [4, 1, 3, 5], [(0, 1), (0,), (1,), (2,)])
    view = ActiveView.build(inst, (0, 1, 2), (0, 1, 2, 3))
    lb_root, pi_root = dual_bound(view, (0.0, 0.0, 0.0), 0, is_root=True)
    sub = ActiveView.build(inst, (2,), (3,))
    lb, pi = dual_bound(sub, (pi_root[2],), fixed_cost=4, is_root=False)
    assert lb >= 4 + pi_root[2] - 1e-9
    assert dual_violation(inst, (2,), (3,), pi) <= 1e-9
