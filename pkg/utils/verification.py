"""Numerical validators for the optimal split, the delay-gain formulas, the
gain orderings, the action-count formula and the learner-vs-oracle gap.
Each validator returns a DataFrame with one row per check."""

import logging
import math
from itertools import product

import numpy as np
import pandas as pd

from utils.action_space import ActionDims, iter_patterns, theorem3_total
from utils.gain_analysis import (
    GainQuery,
    Knob,
    corollary1_check,
    equation_label,
    evaluate_gain,
    gain_direct,
    is_null_pair,
    relative_error,
)
from utils.harness import build_world, generate_scenario, seed_streams
from utils.net_model import Allocation, GlobalAllocation, NetworkScenario, TaskType, dl_rate, ul_rate
from utils.oracle import solve_exhaustive
from utils.run_config import HarnessParams, RunConfig, ScenarioParams
from utils.task_model import collaborative_time, collaborative_time_opt, optimal_mu_from_rates

logger = logging.getLogger(__name__)

PINNED_OMEGA = 1500.0
EXACT_TOLERANCE = 1e-9
APPROX_TOLERANCE = 1e-2
ASYMPTOTIC_TOLERANCE = 0.1


def default_constants_config(n_users: int = 1, n_subcarriers: int = 9, task_type: int = 3) -> RunConfig:
    """Default physical constants, omega pinned, a single BS"""
    return RunConfig(
        scenario=ScenarioParams(
            n_bs=1,
            n_users=n_users,
            n_ul_subcarriers=n_subcarriers,
            n_dl_subcarriers=n_subcarriers,
            cycles_per_bit_mec=PINNED_OMEGA,
            task_types=[task_type] * n_users,
        )
    )


def oracle_case_config(seeds=range(50)) -> RunConfig:
    """One BS, two users, two subcarriers per link, two power levels"""
    return RunConfig(
        scenario=ScenarioParams(
            n_bs=1, n_users=2, n_ul_subcarriers=2, n_dl_subcarriers=2, n_power_levels=2,
            cycles_per_bit_mec=PINNED_OMEGA,
        ),
        harness=HarnessParams(seeds=list(seeds)),
    )


def serve_user(
    s: NetworkScenario, n: int, m: int, ul_power: dict[int, float], dl_power: dict[int, float]
) -> GlobalAllocation:
    """Allocation where BS n gives user m the listed subcarriers (index -> watts)"""
    u = np.zeros((s.n_users, s.n_ul_subcarriers), dtype=np.int8)
    v = np.zeros(u.shape)
    d = np.zeros((s.n_users, s.n_dl_subcarriers), dtype=np.int8)
    w = np.zeros(d.shape)
    for i, p in ul_power.items():
        u[m, i], v[m, i] = 1, p
    for j, p in dl_power.items():
        d[m, j], w[m, j] = 1, p
    per_bs = list(GlobalAllocation.idle(s).per_bs)
    per_bs[n] = Allocation(u=u, v=v, d=d, w=w)
    g = GlobalAllocation(tuple(per_bs))
    g.validate(s)
    return g


def _random_case(cfg: RunConfig, rng: np.random.Generator, max_held: int = 4):
    """Scenario with user 0 holding a few subcarriers on both links at half the budget"""
    s = generate_scenario(cfg, rng)
    n_held = int(rng.integers(1, max_held + 1))
    ul_idx = rng.choice(s.n_ul_subcarriers, size=n_held, replace=False)
    dl_idx = rng.choice(s.n_dl_subcarriers, size=n_held, replace=False)
    ul = {int(i): s.p_max_ul_w / (2 * n_held) for i in ul_idx}
    dl = {int(j): s.p_max_dl_w / (2 * n_held) for j in dl_idx}
    return s, serve_user(s, 0, 0, ul, dl)


def validate_optimal_split(n_scenarios: int = 1000, seed: int = 0, grid_step: float = 1e-4) -> pd.DataFrame:
    """Closed-form split vs grid search, and the closed-form delay vs the split delay at the optimum"""
    rng = np.random.default_rng(seed)
    cfg = RunConfig(scenario=ScenarioParams(n_bs=1, n_users=1, task_types=[3]))
    grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    rows = []
    for sid in range(n_scenarios):
        s, g = _random_case(cfg, rng)
        ul, dl = ul_rate(s, g, 0, 0), dl_rate(s, g, 0, 0)
        mu_star = optimal_mu_from_rates(s, 0, ul, dl)
        lam, f_m = s.task_bits[0], s.user_cpu_hz[0]
        local = s.cycles_per_bit_user[0] * grid * lam / f_m
        offload = (1 - grid) * lam * (1 / ul + s.cycles_per_bit_mec / s.mec_cpu_hz + s.result_ratio / dl)
        mu_grid = float(grid[np.argmin(np.maximum(local, offload))])
        err = abs(mu_star - mu_grid)
        rows.append(_row(sid, "optimal_split", "single", mu_star, mu_grid, err, 2 * grid_step))
        at_split = collaborative_time(s, 0, ul, dl, mu_star)
        closed = collaborative_time_opt(s, 0, ul, dl)
        rows.append(_row(sid, "optimal_split_delay", "single", closed, at_split,
                         relative_error(closed, at_split), 1e-12))
    return pd.DataFrame(rows)


def _row(sid, equation, branch, formula, direct, error, tolerance, consistent=True) -> dict:
    passed = bool(error <= tolerance) if consistent else None
    if consistent and not passed:
        logger.warning(f"scenario {sid}: {equation} [{branch}] formula={formula:.10g} "
                       f"direct={direct:.10g} error={error:.3g} > {tolerance:g}")
    return {
        "scenario_id": sid,
        "equation": equation,
        "branch": branch,
        "formula": formula,
        "direct": direct,
        "relative_error": error,
        "tolerance": tolerance,
        "passed": passed,
    }


def _flat_case(task_type: TaskType, knob: Knob, held: int, added: int, rng: np.random.Generator):
    """Scenario where every subcarrier of user 0 has the same gain and power, so rates are flat"""
    k = held + added
    cfg = default_constants_config(n_subcarriers=k, task_type=int(task_type))
    s = generate_scenario(cfg, rng)
    ul_gain, dl_gain = s.ul_gain.copy(), s.dl_gain.copy()
    ul_gain[0, 0, :] = ul_gain[0, 0, 0]
    dl_gain[0, 0, :] = dl_gain[0, 0, 0]
    s = s.with_updates(ul_gain=ul_gain, dl_gain=dl_gain)
    p_ul, p_dl = s.p_max_ul_w / k, s.p_max_dl_w / k
    g = serve_user(s, 0, 0, {i: p_ul for i in range(held)}, {j: p_dl for j in range(held)})
    delta = np.zeros(k)
    delta[held:] = p_ul if knob.uplink else p_dl
    return s, g, GainQuery(user=0, bs=0, task_type=task_type, knob=knob, delta=delta)


# (held, added) per branch; asymptotic branches sit well inside their ratio
_BRANCH_SHAPES = {"general": [(1, 1), (2, 3), (3, 1)], "much_larger": [(1, 12)], "much_smaller": [(12, 1)]}


def _tolerance(task_type: TaskType, branch: str) -> float:
    if branch in ("much_larger", "much_smaller"):
        return ASYMPTOTIC_TOLERANCE
    return APPROX_TOLERANCE if task_type == TaskType.COLLABORATIVE else EXACT_TOLERANCE


def validate_delay_gains(n_scenarios: int = 1000, seed: int = 0) -> pd.DataFrame:
    """Closed-form gains against before/after delay differences for every (task type, knob)"""
    rng = np.random.default_rng(seed)
    rows = []
    power_cfg = {t: default_constants_config(task_type=int(t)) for t in TaskType}
    for sid in range(n_scenarios):
        for task_type, knob in product(TaskType, Knob):
            if knob.subcarriers:
                branch = ("general", "much_larger", "much_smaller")[sid % 3]
                shapes = _BRANCH_SHAPES[branch]
                held, added = shapes[sid // 3 % len(shapes)]
                s, g, q = _flat_case(task_type, knob, held, added, rng)
            else:
                s, g = _random_case(power_cfg[task_type], rng)
                ind = g.per_bs[0].u[0] if knob.uplink else g.per_bs[0].d[0]
                budget = (s.p_max_ul_w if knob.uplink else s.p_max_dl_w) / (2 * ind.sum())
                delta = ind * rng.uniform(0.05, 1.0, size=ind.shape) * budget
                q = GainQuery(user=0, bs=0, task_type=task_type, knob=knob, delta=delta)
            evaluation = evaluate_gain(s, g, q)
            direct = gain_direct(s, g, q)
            if is_null_pair(task_type, knob):
                rows.append(_row(sid, evaluation.equation, "null", evaluation.value, direct,
                                 abs(evaluation.value) + abs(direct), 0.0))
                continue
            tol = _tolerance(task_type, evaluation.branch)
            rows.append(_row(sid, evaluation.equation, evaluation.branch, evaluation.value, direct,
                             relative_error(evaluation.value, direct), tol))
            if task_type == TaskType.COLLABORATIVE and knob == Knob.UL_SUBCARRIERS:
                printed = evaluate_gain(s, g, q, printed_form=True)
                rows.append(_row(sid, printed.equation, printed.branch, printed.value, direct,
                                 relative_error(printed.value, direct), math.nan, consistent=False))
    return pd.DataFrame(rows)


def validate_gain_orderings(n_scenarios: int = 1000, seed: int = 0) -> pd.DataFrame:
    """Ordering of gains across task types for the same change, per knob"""
    rng = np.random.default_rng(seed)
    cfg = default_constants_config()
    rows = []
    for sid in range(n_scenarios):
        for knob in Knob:
            s, g = _random_case(cfg, rng)
            alloc = g.per_bs[0]
            ind = alloc.u[0] if knob.uplink else alloc.d[0]
            p_max = s.p_max_ul_w if knob.uplink else s.p_max_dl_w
            delta = np.zeros(ind.shape)
            if knob.subcarriers:
                free = np.flatnonzero(ind == 0)
                chosen = rng.choice(free, size=min(len(free), int(rng.integers(1, 4))), replace=False)
                delta[chosen] = p_max / (2 * len(chosen))
            else:
                delta = ind * rng.uniform(0.05, 1.0, size=ind.shape) * p_max / (2 * ind.sum())
            verdict = corollary1_check(s, g, 0, knob, delta)
            if not verdict.all_held:
                failed = [name for name, ok in verdict.held if not ok]
                logger.warning(f"scenario {sid}: {knob.value} ordering violated ({', '.join(failed)})")
            row = {"scenario_id": sid, "knob": knob.value}
            row.update({f"gain_{t.name.lower()}": verdict.gains[t] for t in TaskType})
            row["ordering_held"] = verdict.all_held
            rows.append(row)
    return pd.DataFrame(rows)


def null_pairs_zero(df: pd.DataFrame) -> bool:
    """Null (task type, knob) pairs must be exactly zero on both sides"""
    null = df[df["branch"] == "null"]
    return bool(((null["formula"] == 0) & (null["direct"] == 0)).all())


def validate_action_counts(max_users: int = 3, max_subcarriers: int = 3, max_levels: int = 2) -> pd.DataFrame:
    """Enumerated catalog sizes vs the count formula under both readings"""
    rows = []
    for m, i, j, na in product(
        range(1, max_users + 1), range(max_subcarriers + 1), range(max_subcarriers + 1), range(1, max_levels + 1)
    ):
        dims = ActionDims(n_users=m, n_ul=i, n_dl=j, n_levels=na)
        enumerated = sum(1 for _ in iter_patterns(dims))
        canonical = theorem3_total(dims)
        verbatim = theorem3_total(dims, power_model="verbatim", mu_factor=True, n_collaborative=m)
        if canonical != enumerated:
            logger.warning(f"{dims}: enumeration {enumerated} != formula {canonical}")
        rows.append({
            "n_users": m, "n_ul": i, "n_dl": j, "n_levels": na,
            "enumerated": enumerated, "formula": canonical, "formula_agrees": canonical == enumerated,
            "verbatim_formula": verbatim, "verbatim_agrees": verbatim == enumerated,
        })
    return pd.DataFrame(rows)


def oracle_gap(
    cfg: RunConfig, seeds, max_iterations: int = 20_000, margin: float = 0.05, workers: int = 1
) -> pd.DataFrame:
    """Iterations until the multi-stack learner's best visited t_max is within margin of the optimum.
    workers parallelises each exhaustive scan."""
    rows = []
    for seed in seeds:
        scenario_rng, rng, eval_rng = seed_streams(seed)
        s = generate_scenario(cfg, scenario_rng)
        optimum = solve_exhaustive(s, cap=cfg.harness.oracle_cap, catalog_cap=cfg.harness.catalog_cap, workers=workers)
        world = build_world(cfg, s, "multistack", rng, eval_rng)
        best, reached = math.inf, None
        for k in range(max_iterations):
            _, report, _ = world.step()
            best = min(best, report.max_delay)
            if best <= optimum.best_max_delay * (1 + margin):
                reached = k + 1
                break
        gap = relative_error(best, optimum.best_max_delay) if math.isfinite(best) else math.inf
        if best < optimum.best_max_delay * (1 - 1e-12):
            logger.warning(f"seed {seed}: learner beat the oracle ({best} < {optimum.best_max_delay})")
        rows.append({
            "seed": seed,
            "optimum": optimum.best_max_delay,
            "best_visited": best,
            "gap": gap,
            "within_margin": reached is not None,
            "iterations": reached if reached is not None else max_iterations,
        })
    return pd.DataFrame(rows)
