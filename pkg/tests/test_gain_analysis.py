import math

import numpy as np
import pytest

from utils.errors import InfeasibleAllocationError
from utils.gain_analysis import (
    GainQuery,
    Knob,
    corollary1_check,
    evaluate_gain,
    gain_direct,
    gain_formula,
    is_null_pair,
    regime,
    relative_error,
)
from utils.net_model import TaskType
from utils.verification import serve_user


def flat_case(make_scenario, held, added, n=None):
    n = n or held + added
    s = make_scenario(n_ul=n, n_dl=n, gain=4.0, p_max_ul_w=float(n), p_max_dl_w=float(n))
    g = serve_user(s, 0, 0, {i: 1.0 for i in range(held)}, {j: 1.0 for j in range(held)})
    delta = np.zeros(n)
    delta[held:held + added] = 1.0
    return s, g, delta


def test_null_pairs_are_zero(make_scenario):
    s, g, delta = flat_case(make_scenario, 1, 1)
    for task_type, knob in [(TaskType.EDGE, Knob.UL_SUBCARRIERS), (TaskType.LOCAL, Knob.DL_SUBCARRIERS)]:
        q = GainQuery(user=0, bs=0, task_type=task_type, knob=knob, delta=delta)
        assert is_null_pair(task_type, knob)
        assert evaluate_gain(s, g, q).branch == "null"
        assert gain_formula(s, g, q) == 0.0
        assert gain_direct(s, g, q) == 0.0
    power = np.array([0.5, 0.0])
    for task_type, knob in [(TaskType.EDGE, Knob.UL_POWER), (TaskType.LOCAL, Knob.DL_POWER)]:
        q = GainQuery(user=0, bs=0, task_type=task_type, knob=knob, delta=power)
        assert gain_direct(s, g, q) == 0.0


def test_empty_delta_gives_zero(make_scenario):
    s, g, _ = flat_case(make_scenario, 1, 1)
    q = GainQuery(user=0, bs=0, task_type=TaskType.EDGE, knob=Knob.DL_SUBCARRIERS, delta=np.zeros(2))
    assert gain_direct(s, g, q) == 0.0
    assert evaluate_gain(s, g, q).branch == "empty"


@pytest.mark.parametrize("task_type,knob", [(TaskType.EDGE, Knob.DL_SUBCARRIERS), (TaskType.LOCAL, Knob.UL_SUBCARRIERS)])
def test_flat_subcarrier_gain_is_exact(make_scenario, task_type, knob):
    s, g, delta = flat_case(make_scenario, 1, 2)
    q = GainQuery(user=0, bs=0, task_type=task_type, knob=knob, delta=delta)
    evaluation = evaluate_gain(s, g, q)
    assert evaluation.branch == "general"
    per_subcarrier = math.log2(1 + 4.0)
    expected = 1e5 * (1 / per_subcarrier - 1 / (3 * per_subcarrier))
    assert gain_direct(s, g, q) == pytest.approx(expected, rel=1e-12)
    assert relative_error(evaluation.value, gain_direct(s, g, q)) <= 1e-9


@pytest.mark.parametrize("task_type,knob", [(TaskType.EDGE, Knob.DL_POWER), (TaskType.LOCAL, Knob.UL_POWER)])
def test_power_gain_is_exact(make_scenario, task_type, knob):
    s, g, _ = flat_case(make_scenario, 2, 0, n=3)
    delta = np.array([0.25, 0.5, 0.0])
    q = GainQuery(user=0, bs=0, task_type=task_type, knob=knob, delta=delta)
    before = 2 * math.log2(1 + 4.0)
    after = math.log2(1 + 4.0 * 1.25) + math.log2(1 + 4.0 * 1.5)
    expected = 1e5 * (after - before) / (before * after)
    assert gain_formula(s, g, q) == pytest.approx(expected, rel=1e-12)
    assert relative_error(gain_formula(s, g, q), gain_direct(s, g, q)) <= 1e-9


def test_collaborative_power_gain_is_close(make_scenario):
    s, g, _ = flat_case(make_scenario, 2, 0, n=3)
    s = s.with_updates(bandwidth_hz=3e6)
    q = GainQuery(user=0, bs=0, task_type=TaskType.COLLABORATIVE, knob=Knob.DL_POWER, delta=np.array([0.5, 0.5, 0.0]))
    assert relative_error(gain_formula(s, g, q), gain_direct(s, g, q)) <= 1e-2


def test_regime_thresholds():
    assert regime(10, 1) == "much_larger"
    assert regime(1, 10) == "much_smaller"
    assert regime(3, 2) == "general"


def test_apply_rejects_infeasible_changes(make_scenario):
    s, g, _ = flat_case(make_scenario, 1, 1)
    taken = GainQuery(user=0, bs=0, task_type=TaskType.EDGE, knob=Knob.DL_SUBCARRIERS, delta=np.array([1.0, 0.0]))
    with pytest.raises(InfeasibleAllocationError, match="free"):
        taken.apply(s, g)
    unheld = GainQuery(user=0, bs=0, task_type=TaskType.EDGE, knob=Knob.DL_POWER, delta=np.array([0.0, 0.5]))
    with pytest.raises(InfeasibleAllocationError, match="holds"):
        unheld.apply(s, g)
    hot = GainQuery(user=0, bs=0, task_type=TaskType.EDGE, knob=Knob.DL_POWER, delta=np.array([5.0, 0.0]))
    with pytest.raises(InfeasibleAllocationError):
        hot.apply(s, g)


def test_gain_orderings(make_scenario):
    s, g, _ = flat_case(make_scenario, 1, 2)
    s = s.with_updates(bandwidth_hz=3e6)
    for knob in Knob:
        delta = np.array([0.0, 1.0, 1.0]) if knob.subcarriers else np.array([0.5, 0.0, 0.0])
        verdict = corollary1_check(s, g, 0, knob, delta)
        assert verdict.all_held, (knob, verdict.gains)
        assert len(verdict.held) == 2


def test_ordering_needs_a_served_user(make_scenario):
    s, _, delta = flat_case(make_scenario, 1, 1)
    g = serve_user(s, 0, 0, {}, {0: 1.0})
    with pytest.raises(InfeasibleAllocationError):
        corollary1_check(s, g, 0, Knob.DL_POWER, delta)
