import math
import os

import numpy as np
import pandas as pd
import pytest

from utils.errors import ConfigError
from utils.harness import (
    ALGORITHMS,
    ExperimentRunner,
    RunMetrics,
    compare_algorithms,
    detect_convergence,
    generate_scenario,
    run_seed,
    run_training,
    seed_streams,
    _tail_delay,
    summarize,
)
from utils.run_config import RunConfig


def test_convergence_on_a_flat_series():
    assert detect_convergence([2.0] * 30, window=5, tolerance=0.005) == 9


def test_convergence_never_on_a_ramp():
    assert detect_convergence(np.arange(1.0, 101.0), window=5, tolerance=0.005) is None


def test_convergence_waits_for_finite_windows():
    series = [math.inf] * 3 + [2.0] * 20
    # first all-finite window ends at 7, compared one window later
    assert detect_convergence(series, window=5, tolerance=0.005) == 12


def test_convergence_never_with_unserved_samples_in_every_window():
    series = [math.inf if k % 4 == 0 else 2.0 for k in range(60)]
    assert detect_convergence(series, window=5, tolerance=0.005) is None


def test_tail_delay():
    assert _tail_delay(np.array([1.0, 3.0])) == (2.0, 1.0)
    mean, served = _tail_delay(np.array([1.0, math.inf, 3.0, 5.0]))
    assert math.isinf(mean) and served == 0.75
    mean, served = _tail_delay(np.array([math.inf]))
    assert math.isinf(mean) and served == 0.0


def test_convergence_after_a_drop():
    series = list(np.linspace(10.0, 1.0, 20)) + [1.0] * 40
    k = detect_convergence(series, window=5, tolerance=0.005)
    # flat from 19, moving average flat from 23, compared one window later
    assert k == 28


def test_generated_scenario_respects_ranges(quick_config):
    s = generate_scenario(quick_config, seed_streams(0)[0])
    p = quick_config.scenario
    assert np.all(np.hypot(*s.user_positions.T) <= p.radius_m)
    assert np.all((s.task_bits >= p.task_bits_range[0]) & (s.task_bits <= p.task_bits_range[1]))
    assert p.cycles_per_bit_mec_range[0] <= s.cycles_per_bit_mec <= p.cycles_per_bit_mec_range[1]
    pinned = quick_config.updated("scenario", cycles_per_bit_mec=1500.0, task_types=[2, 2, 2, 2])
    s = generate_scenario(pinned, seed_streams(0)[0])
    assert s.cycles_per_bit_mec == 1500.0 and s.task_type.tolist() == [2, 2, 2, 2]


def test_run_training_metrics(tiny_config):
    s = generate_scenario(tiny_config, seed_streams(0)[0])
    metrics = run_training(tiny_config, s, "multistack", seed=0)
    for series in (metrics.t_max, metrics.greedy_t_max, metrics.reward, metrics.qgate_rate):
        assert series.shape == (200,)
    assert metrics.best_t_max == metrics.t_max.min()
    assert np.all((metrics.qgate_rate >= 0) & (metrics.qgate_rate <= 1))
    assert np.all(metrics.reward <= 1.0)


def test_run_training_dumps_q_tables(tmp_path, tiny_config):
    s = generate_scenario(tiny_config, seed_streams(0)[0])
    run_training(tiny_config, s, "qlearning", seed=3, q_dump_dir=tmp_path / "q")
    assert (tmp_path / "q" / "q_qlearning_seed3_bs0.yaml").exists()


def test_summary_counts_the_full_budget():
    empty = np.zeros(3)
    metrics = RunMetrics(0, "qlearning", empty, empty, empty, empty, None, 1.0, 0.5, math.nan)
    row = metrics.summary(budget=500)
    assert not row["converged"] and row["iterations_to_converge"] == 500


def test_unknown_algorithm(tiny_config):
    s = generate_scenario(tiny_config, seed_streams(0)[0])
    with pytest.raises(ConfigError, match="unknown algorithm"):
        run_training(tiny_config, s, "sarsa")


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_every_algorithm_runs(tiny_config, algo):
    cfg = tiny_config.updated("harness", iterations=40, convergence_window=10)
    cfg = cfg.updated("scenario", task_types=[3, 3])
    metrics = run_seed(cfg, algo, seed=1)
    assert metrics.t_max.shape == (40,)
    if algo in ("random", "task-only"):
        assert not metrics.qgate_rate.any()
    if algo == "local-only":
        assert metrics.mean_mu == 1.0
    if algo == "edge-only":
        assert metrics.mean_mu == 0.0


def test_same_seed_same_metrics(tiny_config):
    a = run_seed(tiny_config, "multistack", 4)
    b = run_seed(tiny_config, "multistack", 4)
    np.testing.assert_array_equal(a.t_max, b.t_max)
    assert a.iterations_to_converge == b.iterations_to_converge


def test_sweep_table(tiny_config):
    cfg = tiny_config.updated("harness", iterations=60, convergence_window=10)
    table = ExperimentRunner(workers=1, progress=False).sweep(cfg, "alpha", [0.3, 0.7], ["multistack", "random"])
    assert len(table) == 4
    assert table["value"].tolist() == [0.3, 0.3, 0.7, 0.7]
    assert (table["n_seeds"] == 2).all()
    assert {"iterations_to_converge_mean", "iterations_to_converge_se", "final_t_max_mean"} <= set(table.columns)


def test_summarize_means_and_errors():
    per_run = pd.DataFrame({
        "algorithm": ["a", "a", "b"],
        "value": [1.0, 1.0, 1.0],
        "converged": [True, False, True],
        "iterations_to_converge": [10, 30, 5],
        "final_t_max": [1.0, 3.0, math.inf],
        "best_t_max": [1.0, 1.0, 1.0],
        "mean_mu": [0.5, 0.5, math.nan],
        "served_fraction": [1.0, 1.0, 0.5],
    })
    table = summarize(per_run, "alpha", [1.0], ["a", "b"])
    a, b = table.iloc[0], table.iloc[1]
    assert a["iterations_to_converge_mean"] == 20 and a["converged_fraction"] == 0.5
    assert a["final_t_max_se"] == pytest.approx(1.0)
    assert math.isnan(b["final_t_max_mean"]) and b["iterations_to_converge_se"] == 0.0
    assert a["n_served"] == 2 and b["n_served"] == 0
    assert b["served_fraction_mean"] == 0.5


def test_compare_algorithms():
    a = np.array([100.0, 120.0, 90.0, 110.0, 105.0, 95.0])
    b = a + np.array([40.0, 55.0, 35.0, 60.0, 45.0, 50.0])
    result = compare_algorithms(a, b, "multistack", "qlearning", "iterations_to_converge")
    assert result["significant"] and result["p_value"] < 0.01
    assert result["mean_difference"] == pytest.approx(-47.5)
    assert result["ratio"] == pytest.approx(a.mean() / b.mean())
    same = compare_algorithms(a, a.copy(), "multistack", "qlearning", "final_t_max")
    assert same["p_value"] == 1.0 and not same["significant"]


@pytest.mark.parametrize("algo", ["multistack", "qlearning"])
def test_desk_run_reports_unserved_tails(quick_config, algo):
    metrics = run_seed(quick_config, algo, seed=1)
    w = quick_config.harness.convergence_window
    tail = metrics.greedy_t_max[-w:]
    assert 0.0 <= metrics.served_fraction <= 1.0
    assert metrics.served_fraction == pytest.approx(np.isfinite(tail).mean())
    if metrics.served_fraction < 1.0:
        assert math.isinf(metrics.final_t_max)
    else:
        assert metrics.final_t_max == pytest.approx(tail.mean())
    if metrics.converged:
        k = metrics.iterations_to_converge
        # both compared windows were fully served
        assert np.isfinite(metrics.greedy_t_max[k - 2 * w + 1:k + 1]).all()


def test_run_seed_at_full_network_dims():
    cfg = RunConfig().updated("harness", seeds=[0], iterations=4, convergence_window=2)
    assert (cfg.scenario.n_users, cfg.scenario.n_dl_subcarriers, cfg.scenario.n_power_levels) == (6, 9, 10)
    metrics = run_seed(cfg, "multistack", 0)
    assert metrics.t_max.shape == (4,)
    assert metrics.qgate_rate[0] == 1.0


def test_task_size_mean_over_many_draws():
    cfg = RunConfig().updated(
        "scenario", n_bs=1, n_users=10_000, n_ul_subcarriers=1, n_dl_subcarriers=1, n_power_levels=1
    )
    s = generate_scenario(cfg, seed_streams(0)[0])
    assert s.task_bits.mean() == pytest.approx(250e3, rel=0.02)


def endpoint_change(table, algo, metric):
    """(last minus first mean, sum of both standard errors) along the sweep axis"""
    rows = table[table["algorithm"] == algo]
    first, last = rows.iloc[0], rows.iloc[-1]
    return last[f"{metric}_mean"] - first[f"{metric}_mean"], first[f"{metric}_se"] + last[f"{metric}_se"]


@pytest.mark.slow
def test_multistack_converges_faster():
    result = ExperimentRunner(os.cpu_count() or 1, progress=False).compare(RunConfig.desk_scale())
    print(f"iterations ratio multistack/qlearning = {result['ratio']:.3f} p={result['p_value']:.2g}")
    assert result["significant"] and result["ratio"] < 1.0


@pytest.mark.slow
def test_multistack_delay_not_worse_across_subcarriers():
    runner = ExperimentRunner(os.cpu_count() or 1, progress=False)
    table = runner.sweep(RunConfig.desk_scale(), "subcarriers", [1, 2, 3, 4, 5], ["multistack", "qlearning"])
    for _, group in table.groupby("value"):
        ms, ql = group.set_index("algorithm").loc["multistack"], group.set_index("algorithm").loc["qlearning"]
        assert ms["final_t_max_mean"] <= ql["final_t_max_mean"] + ms["final_t_max_se"] + ql["final_t_max_se"]


@pytest.mark.slow
@pytest.mark.parametrize(
    "axis, values, metric, direction",
    [
        ("subcarriers", [1, 5], "final_t_max", -1),
        ("subcarriers", [1, 5], "mean_mu", -1),
        ("task_bits", [100e3, 600e3], "final_t_max", 1),
        ("nu", [0.2, 1.0], "final_t_max", 1),
        ("users", [2, 6], "final_t_max", 1),
    ],
)
def test_delay_trends(axis, values, metric, direction):
    runner = ExperimentRunner(os.cpu_count() or 1, progress=False)
    table = runner.sweep(RunConfig.desk_scale(), axis, values, ["multistack"])
    change, slack = endpoint_change(table, "multistack", metric)
    assert direction * change >= -slack
