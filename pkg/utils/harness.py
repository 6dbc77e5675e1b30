import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from utils.action_space import (
    ActionDims,
    BsRates,
    LevelPatternSpace,
    OwnerPatternSpace,
    build_action_space,
)
from utils.errors import ConfigError
from utils.learner import Agent, World
from utils.net_model import NetworkScenario, TaskType, dbm_to_watts, gains_from_seed
from utils.run_config import RunConfig

logger = logging.getLogger(__name__)

ALGORITHMS = (
    "multistack",
    "qlearning",
    "random",
    "task-only",
    "task+subcarrier",
    "task+power",
    "local-only",
    "edge-only",
)
METRICS = ("iterations_to_converge", "final_t_max", "best_t_max", "mean_mu", "served_fraction")


@dataclass
class RunMetrics:
    seed: int
    algorithm: str
    t_max: np.ndarray
    greedy_t_max: np.ndarray
    reward: np.ndarray
    qgate_rate: np.ndarray
    iterations_to_converge: Optional[int]
    final_t_max: float
    best_t_max: float
    mean_mu: float
    served_fraction: float = 1.0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def converged(self) -> bool:
        return self.iterations_to_converge is not None

    def summary(self, budget: int) -> dict:
        """One row per run; non-converged runs count the full budget"""
        return {
            "seed": self.seed,
            "algorithm": self.algorithm,
            "converged": self.converged,
            "iterations_to_converge": self.iterations_to_converge if self.converged else budget,
            "final_t_max": self.final_t_max,
            "best_t_max": self.best_t_max,
            "mean_mu": self.mean_mu,
            "served_fraction": self.served_fraction,
        }


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (scenario, learning, evaluation) streams for one seed"""
    return tuple(np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(3))


def _uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def generate_scenario(cfg: RunConfig, rng: np.random.Generator) -> NetworkScenario:
    """Random scenario: positions uniform in the disc, task sizes and omega uniform in their ranges"""
    p = cfg.scenario
    bs_positions = _uniform_disc(rng, p.n_bs, p.radius_m)
    user_positions = _uniform_disc(rng, p.n_users, p.radius_m)
    omega = p.cycles_per_bit_mec if p.cycles_per_bit_mec is not None else float(rng.uniform(*p.cycles_per_bit_mec_range))
    task_bits = rng.uniform(*p.task_bits_range, size=p.n_users)
    if p.task_types is not None:
        task_type = np.asarray(p.task_types, dtype=int)
    else:
        task_type = rng.integers(int(TaskType.EDGE), int(TaskType.COLLABORATIVE) + 1, size=p.n_users)
    gain_seed = int(rng.integers(0, 2**32))
    ul_gain, dl_gain = gains_from_seed(
        gain_seed, bs_positions, user_positions, p.n_ul_subcarriers, p.n_dl_subcarriers, p.path_loss_exp
    )
    return NetworkScenario(
        n_bs=p.n_bs,
        n_users=p.n_users,
        n_ul_subcarriers=p.n_ul_subcarriers,
        n_dl_subcarriers=p.n_dl_subcarriers,
        bandwidth_hz=p.bandwidth_hz,
        noise_power_w=dbm_to_watts(p.noise_power_dbm),
        path_loss_exp=p.path_loss_exp,
        bs_positions=bs_positions,
        user_positions=user_positions,
        ul_gain=ul_gain,
        dl_gain=dl_gain,
        p_max_ul_w=p.p_max_ul_w,
        p_max_dl_w=p.p_max_dl_w,
        n_power_levels=p.n_power_levels,
        mec_cpu_hz=p.mec_cpu_hz,
        user_cpu_hz=np.full(p.n_users, p.user_cpu_hz),
        cycles_per_bit_mec=omega,
        cycles_per_bit_user=np.full(p.n_users, p.cycles_per_bit_user),
        task_bits=task_bits,
        result_ratio=p.result_ratio,
        task_type=task_type,
        seed=gain_seed,
    )


def detect_convergence(series: Sequence[float], window: int, tolerance: float) -> Optional[int]:
    """First k >= 2W-1 where the W-step moving average moved by less than tolerance
    relative to its value W steps earlier. A window holding an infinite sample
    has no average, so neither it nor the window W steps later can settle."""
    values = pd.Series(np.asarray(series, dtype=float)).replace([np.inf, -np.inf], np.nan)
    ma = values.rolling(window, min_periods=window).mean()
    previous = ma.shift(window)
    settled = (ma - previous).abs() < tolerance * previous
    settled.iloc[: 2 * window - 1] = False
    hits = np.flatnonzero(settled.to_numpy())
    return int(hits[0]) if hits.size else None


def _tail_delay(values: np.ndarray) -> tuple[float, float]:
    """(mean delay, finite share) of the evaluation tail; any unserved sample makes the mean infinite"""
    finite = np.isfinite(values)
    mean = float(values.mean()) if finite.all() else math.inf
    return mean, float(finite.mean())


def build_world(cfg: RunConfig, s: NetworkScenario, algo: str, rng, eval_rng) -> World:
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm '{algo}', expected one of {', '.join(ALGORITHMS)}")
    dims = ActionDims.of(s)
    if algo == "task+subcarrier":
        space = OwnerPatternSpace(dims)
    elif algo == "task+power":
        space = LevelPatternSpace(dims)
    else:
        space = build_action_space(dims, cfg.harness.action_mode, cfg.harness.catalog_cap)
    mu_policy = {"random": "random", "local-only": "local", "edge-only": "edge"}.get(algo, "optimal")
    learning = algo not in ("random", "task-only")
    use_stacks = algo != "qlearning"

    nearest = s.nearest_bs()
    agents = []
    for n in range(s.n_bs):
        associated = [int(m) for m in np.flatnonzero(nearest == n)] or list(range(s.n_users))
        agents.append(
            Agent(n, space, BsRates(s, n, space), cfg.learner, associated, use_stacks=use_stacks, learning=learning)
        )
    return World(s, agents, rng, mu_policy=mu_policy, eval_rng=eval_rng)


def run_training(
    cfg: RunConfig,
    scenario: NetworkScenario,
    algo: str,
    seed: int = 0,
    rng=None,
    eval_rng=None,
    q_dump_dir: Optional[str | Path] = None,
) -> RunMetrics:
    """Run one algorithm for the iteration budget on a fixed scenario.

    When q_dump_dir is set, each BS's final Q-table is written there as YAML.
    """
    if rng is None or eval_rng is None:
        _, rng, eval_rng = seed_streams(seed)
    started = time.perf_counter()
    world = build_world(cfg, scenario, algo, rng, eval_rng)
    budget = cfg.harness.iterations
    t_max = np.empty(budget)
    greedy = np.empty(budget)
    rewards = np.empty(budget)
    gates = np.empty(budget)
    mus = np.empty(budget)
    collaborative = scenario.task_type == TaskType.COLLABORATIVE
    horizon = cfg.harness.eval_horizon

    for k in range(budget):
        _, report, qgates = world.step()
        t_max[k] = report.max_delay
        rewards[k] = world.reward(report)
        gates[k] = float(np.mean(qgates))
        evaluated = world.greedy_rollout(horizon) if world.agents[0].learning else report
        greedy[k] = evaluated.max_delay
        mus[k] = float(evaluated.mu[collaborative].mean()) if collaborative.any() else math.nan

    if q_dump_dir is not None:
        q_dump_dir = Path(q_dump_dir)
        q_dump_dir.mkdir(parents=True, exist_ok=True)
        for agent in world.agents:
            agent.q.dump(q_dump_dir / f"q_{algo}_seed{seed}_bs{agent.n}.yaml")

    window = cfg.harness.convergence_window
    tail = slice(budget - window, budget)
    final_t_max, served_fraction = _tail_delay(greedy[tail])
    metrics = RunMetrics(
        seed=seed,
        algorithm=algo,
        t_max=t_max,
        greedy_t_max=greedy,
        reward=rewards,
        qgate_rate=gates,
        iterations_to_converge=detect_convergence(greedy, window, cfg.harness.convergence_tolerance),
        final_t_max=final_t_max,
        best_t_max=float(t_max.min()),
        mean_mu=float(np.nanmean(mus[tail])) if collaborative.any() else math.nan,
        served_fraction=served_fraction,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        f"seed={seed} algo={algo} converged_at={metrics.iterations_to_converge} "
        f"final_t_max={metrics.final_t_max:.6g} served={metrics.served_fraction:.2f} wall={metrics.wall_time:.2f}s"
    )
    return metrics


def run_seed(cfg: RunConfig, algo: str, seed: int) -> RunMetrics:
    """Generate the seed's scenario and train on it"""
    scenario_rng, rng, eval_rng = seed_streams(seed)
    scenario = generate_scenario(cfg, scenario_rng)
    return run_training(cfg, scenario, algo, seed, rng, eval_rng)


def _job(args: tuple[dict, str, int]) -> RunMetrics:
    data, algo, seed = args
    return run_seed(RunConfig.model_validate(data), algo, seed)


class ExperimentRunner:
    """Dispatches (config, algorithm, seed) jobs and reduces them in submission order"""

    def __init__(self, workers: int = 1, progress: Optional[bool] = None):
        self.workers = max(1, workers)
        self.progress = sys.stderr.isatty() if progress is None else progress

    def run_jobs(self, jobs: list[tuple[RunConfig, str, int]], desc: str = "runs") -> list[RunMetrics]:
        payload = [(cfg.model_dump(), algo, seed) for cfg, algo, seed in jobs]
        bar = tqdm(total=len(payload), desc=desc, disable=not self.progress)
        results = []
        try:
            if self.workers == 1:
                for item in payload:
                    results.append(_job(item))
                    bar.update()
            else:
                with ProcessPoolExecutor(max_workers=self.workers) as executor:
                    for metrics in executor.map(_job, payload):
                        results.append(metrics)
                        bar.update()
        finally:
            bar.close()
        return results

    def sweep(self, cfg: RunConfig, axis: str, values: Sequence[float], algorithms: Sequence[str]) -> pd.DataFrame:
        """Mean and standard error of every metric per (value, algorithm) over all seeds"""
        jobs = [
            (cfg.with_axis(axis, value), algo, seed)
            for value in values
            for algo in algorithms
            for seed in cfg.harness.seeds
        ]
        results = self.run_jobs(jobs, desc=f"sweep {axis}")
        rows = []
        for (job_cfg, algo, seed), metrics in zip(jobs, results):
            row = metrics.summary(job_cfg.harness.iterations)
            row["value"] = _axis_value(job_cfg, axis)
            rows.append(row)
        per_run = pd.DataFrame(rows)
        return summarize(per_run, axis, list(values), list(algorithms))

    def compare(self, cfg: RunConfig, first: str = "multistack", second: str = "qlearning",
                metric: str = "iterations_to_converge") -> dict:
        jobs = [(cfg, algo, seed) for seed in cfg.harness.seeds for algo in (first, second)]
        results = self.run_jobs(jobs, desc=f"{first} vs {second}")
        budget = cfg.harness.iterations
        a = np.array([m.summary(budget)[metric] for m in results[0::2]], dtype=float)
        b = np.array([m.summary(budget)[metric] for m in results[1::2]], dtype=float)
        return compare_algorithms(a, b, first, second, metric)


def _axis_value(cfg: RunConfig, axis: str) -> float:
    p = cfg.scenario
    return {
        "alpha": cfg.learner.alpha,
        "gamma": cfg.learner.gamma,
        "subcarriers": p.n_dl_subcarriers,
        "task_bits": sum(p.task_bits_range) / 2,
        "nu": p.result_ratio,
        "users": p.n_users,
    }[axis]


def summarize(per_run: pd.DataFrame, axis: str, values: list, algorithms: list) -> pd.DataFrame:
    rows = []
    for value in values:
        for algo in algorithms:
            group = per_run[(per_run["algorithm"] == algo) & np.isclose(per_run["value"], float(value))]
            row = {"axis": axis, "value": value, "algorithm": algo, "n_seeds": len(group),
                   "converged_fraction": float(group["converged"].mean()) if len(group) else math.nan,
                   # delay means below are over these runs only
                   "n_served": int(np.isfinite(group["final_t_max"]).sum())}
            for metric in METRICS:
                col = group[metric].replace([np.inf, -np.inf], np.nan).dropna()
                row[f"{metric}_mean"] = float(col.mean()) if len(col) else math.nan
                row[f"{metric}_se"] = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
            rows.append(row)
    return pd.DataFrame(rows)


def compare_algorithms(a: np.ndarray, b: np.ndarray, first: str, second: str, metric: str) -> dict:
    """Paired one-sided test that `first` has a smaller metric than `second`"""
    mean_a, mean_b = float(np.mean(a)), float(np.mean(b))
    if np.allclose(a, b):
        p_value = 1.0
    else:
        p_value = float(stats.ttest_rel(a, b, alternative="less").pvalue)
    return {
        "metric": metric,
        "first": first,
        "second": second,
        "n": int(len(a)),
        "mean_first": mean_a,
        "mean_second": mean_b,
        "ratio": mean_a / mean_b if mean_b else math.nan,
        "mean_difference": float(np.mean(a - b)),
        "p_value": p_value,
        "significant": p_value < 0.05,
    }


def sweep(
    cfg: RunConfig,
    axis: str,
    values: Sequence[float],
    algorithms: Sequence[str] = ("multistack", "qlearning"),
    workers: int = 1,
) -> pd.DataFrame:
    return ExperimentRunner(workers).sweep(cfg, axis, values, algorithms)
