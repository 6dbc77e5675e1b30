import math

import numpy as np
import pytest

from utils.errors import OffloadImpossibleError, TaskTypeError
from utils.net_model import Allocation, GlobalAllocation
from utils.task_model import (
    DelayReport,
    collaborative_delay,
    collaborative_delay_opt,
    collaborative_time,
    collaborative_time_opt,
    delays_from_rates,
    edge_delay,
    edge_time,
    evaluate,
    local_delay,
    local_time,
    optimal_mu,
    optimal_mu_from_rates,
)

GRID = np.arange(0.0, 1.0 + 5e-5, 1e-4)


def served(s, ul_power=1.0, dl_power=1.0):
    return GlobalAllocation((Allocation(
        u=np.ones((1, s.n_ul_subcarriers), dtype=np.int8), v=np.full((1, s.n_ul_subcarriers), ul_power),
        d=np.ones((1, s.n_dl_subcarriers), dtype=np.int8), w=np.full((1, s.n_dl_subcarriers), dl_power),
    ),))


def test_edge_time_substitution(make_scenario):
    s = make_scenario(task_bits=np.array([2e5]), task_type=1)
    assert edge_time(s, 0, 3e6) == pytest.approx(3e-3 + 2e5 / 3e6)
    assert edge_time(s, 0, 0.0) == math.inf
    assert edge_time(s, 0, 1e300) == pytest.approx(3e-3)


def test_local_time_substitution(make_scenario):
    s = make_scenario(task_type=2)
    assert local_time(s, 0, 3e6) == pytest.approx(0.3 + 1e5 / 3e6)
    assert local_time(s, 0, 0.0) == math.inf
    assert local_time(s, 0, 1e300) == pytest.approx(0.3)


def test_collaborative_endpoints(make_scenario):
    s = make_scenario()
    lam = 1e5
    assert collaborative_time(s, 0, 2e6, 4e6, 1.0) == pytest.approx(1500 * lam / 5e8)
    assert collaborative_time(s, 0, 0.0, 0.0, 1.0) == pytest.approx(0.3)
    assert collaborative_time(s, 0, 2e6, 4e6, 0.0) == pytest.approx(lam / 2e6 + 1500 * lam / 1e11 + lam / 4e6)
    assert collaborative_time(s, 0, 0.0, 4e6, 0.5) == math.inf


def test_collaborative_interior_is_max_of_branches(make_scenario):
    s = make_scenario()
    mu, lam, ul, dl = 0.3, 1e5, 2e6, 4e6
    local = 1500 * mu * lam / 5e8
    offload = (1 - mu) * lam * (1 / ul + 1500 / 1e11 + 1 / dl)
    assert collaborative_time(s, 0, ul, dl, mu) == pytest.approx(max(local, offload))


def test_optimal_mu_limit_matches_grid(make_scenario):
    s = make_scenario()
    mu = optimal_mu_from_rates(s, 0, 1e300, 1e300)
    assert mu == pytest.approx(7.5e11 / (7.5e11 + 1.5e14), rel=1e-9)
    assert mu == pytest.approx(4.975e-3, abs=1e-5)
    delays = [collaborative_time(s, 0, 1e300, 1e300, m) for m in GRID]
    assert abs(GRID[int(np.argmin(delays))] - mu) <= 2e-4


def test_optimal_mu_beats_every_grid_point(make_scenario):
    rng = np.random.default_rng(11)
    s = make_scenario()
    for _ in range(20):
        ul, dl = rng.uniform(1e5, 1e7, size=2)
        mu = optimal_mu_from_rates(s, 0, ul, dl)
        assert 0 < mu < 1
        best = collaborative_time(s, 0, ul, dl, mu)
        grid = min(collaborative_time(s, 0, ul, dl, m) for m in GRID)
        assert best <= grid * (1 + 1e-12)
        # both branches are equal at the optimum
        local = 1500 * mu * 1e5 / 5e8
        offload = (1 - mu) * 1e5 * (1 / ul + 1500 / 1e11 + 1 / dl)
        assert local == pytest.approx(offload, rel=1e-10)
        assert collaborative_time_opt(s, 0, ul, dl) == pytest.approx(best, rel=1e-12)


def test_closed_form_delay_limit(make_scenario):
    s = make_scenario()
    expected = 1500 * 1e5 * 1500 / (1500 * 5e8 + 1500 * 1e11)
    assert collaborative_time_opt(s, 0, 1e300, 1e300) == pytest.approx(expected, rel=1e-9)


def test_offload_impossible(make_scenario):
    s = make_scenario()
    with pytest.raises(OffloadImpossibleError):
        optimal_mu_from_rates(s, 0, 0.0, 1e6)
    assert collaborative_time_opt(s, 0, 0.0, 1e6) == pytest.approx(0.3)


def test_allocation_level_delays_check_task_type(make_scenario):
    s = make_scenario()
    g = served(s)
    with pytest.raises(TaskTypeError):
        edge_delay(s, g, 0, 0)
    with pytest.raises(TaskTypeError):
        local_delay(s, g, 0, 0)
    with pytest.raises(ValueError):
        collaborative_delay(s, g, 0, 0, 1.5)
    mu = optimal_mu(s, g, 0, 0)
    assert collaborative_delay(s, g, 0, 0, mu) == pytest.approx(collaborative_delay_opt(s, g, 0, 0), rel=1e-12)


def test_edge_and_local_on_allocation(make_scenario):
    s = make_scenario(n_users=1, task_type=1)
    g = served(s)
    assert edge_delay(s, g, 0, 0) == pytest.approx(1500 * 1e5 / 1e11 + 1e5 / 1.0)
    s = make_scenario(n_users=1, task_type=2)
    assert local_delay(s, g, 0, 0) == pytest.approx(0.3 + 1e5 / 1.0)


def test_delay_report_ties_take_first_user():
    report = DelayReport.from_delays(np.array([1.0, 3.0, 3.0]), np.zeros(3))
    assert report.max_delay == 3.0 and report.argmax_user == 1
    report = DelayReport.from_delays(np.array([math.inf, 1.0, math.inf]), np.zeros(3))
    assert report.argmax_user == 0 and report.max_delay == math.inf


def test_idle_evaluate_uses_local_compute_where_possible(make_scenario):
    s = make_scenario(n_users=3, task_type=np.array([1, 2, 3]), task_bits=np.array([1e5, 2e5, 3e5]))
    report = evaluate(s, GlobalAllocation.idle(s))
    assert report.per_user_delay[0] == math.inf
    # local users still upload their result, so an idle uplink leaves them unserved
    assert report.per_user_delay[1] == math.inf
    assert report.per_user_delay[2] == pytest.approx(1500 * 3e5 / 5e8)
    assert report.mu.tolist() == [0.0, 0.0, 1.0]


def test_fully_local_limit(make_scenario):
    s = make_scenario(n_users=2, task_type=np.array([2, 3]))
    delays, mu = delays_from_rates(s, np.array([1e300, 0.0]), np.array([0.0, 0.0]), "local")
    assert delays == pytest.approx([0.3, 0.3])
    assert mu.tolist() == [0.0, 1.0]


def test_delays_monotone_in_rates(make_scenario):
    s = make_scenario(n_users=3, task_type=np.array([1, 2, 3]))
    slow, _ = delays_from_rates(s, np.full(3, 1e6), np.full(3, 1e6))
    fast, _ = delays_from_rates(s, np.full(3, 2e6), np.full(3, 3e6))
    assert np.all(fast <= slow)


def test_mu_policies(make_scenario):
    s = make_scenario()
    ul, dl = np.array([2e6]), np.array([4e6])
    edge, mu = delays_from_rates(s, ul, dl, "edge")
    assert mu[0] == 0.0
    assert edge[0] == pytest.approx(collaborative_time(s, 0, 2e6, 4e6, 0.0))
    fixed, mu = delays_from_rates(s, ul, dl, np.array([0.25]))
    assert fixed[0] == pytest.approx(collaborative_time(s, 0, 2e6, 4e6, 0.25))
    _, mu = delays_from_rates(s, ul, dl, "random", np.random.default_rng(0))
    assert 0 <= mu[0] <= 1
    with pytest.raises(ValueError):
        delays_from_rates(s, ul, dl, "random")
    with pytest.raises(ValueError):
        delays_from_rates(s, ul, dl, "sometimes")
