"""Per-user processing delay for edge, local and collaborative tasks, and the
closed-form task split of a collaborative task."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from utils.errors import OffloadImpossibleError, TaskTypeError
from utils.net_model import GlobalAllocation, NetworkScenario, TaskType, dl_rate, serving_rates, ul_rate

logger = logging.getLogger(__name__)

MU_POLICIES = ("optimal", "local", "edge", "random")
MuPolicy = Union[str, np.ndarray]


@dataclass(frozen=True)
class DelayReport:
    per_user_delay: np.ndarray
    max_delay: float
    argmax_user: int
    mu: np.ndarray

    @classmethod
    def from_delays(cls, delays: np.ndarray, mu: np.ndarray) -> "DelayReport":
        # np.argmax returns the first maximum, inf included
        m_max = int(np.argmax(delays))
        return cls(per_user_delay=delays, max_delay=float(delays[m_max]), argmax_user=m_max, mu=mu)


# Rate-level forms. They ignore the user's actual task type so that
# gain analysis can evaluate hypothetical types.

def edge_time(s: NetworkScenario, m: int, dl: float) -> float:
    """Edge task: MEC compute plus result download at rate dl"""
    if dl <= 0:
        return math.inf
    lam = s.task_bits[m]
    return s.cycles_per_bit_mec * lam / s.mec_cpu_hz + s.result_ratio * lam / dl


def local_time(s: NetworkScenario, m: int, ul: float) -> float:
    """Local task: device compute plus result upload at rate ul"""
    if ul <= 0:
        return math.inf
    lam = s.task_bits[m]
    return s.cycles_per_bit_user[m] * lam / s.user_cpu_hz[m] + s.result_ratio * lam / ul


def collaborative_time(s: NetworkScenario, m: int, ul: float, dl: float, mu: float) -> float:
    """Collaborative task: the slower of the local share and the offload pipeline"""
    lam = s.task_bits[m]
    local_branch = s.cycles_per_bit_user[m] * mu * lam / s.user_cpu_hz[m]
    if mu >= 1.0:
        return local_branch
    if ul <= 0 or dl <= 0:
        return math.inf
    rest = (1.0 - mu) * lam
    offload_branch = rest / ul + s.cycles_per_bit_mec * rest / s.mec_cpu_hz + s.result_ratio * rest / dl
    return max(local_branch, offload_branch)


def offload_penalty(s: NetworkScenario, m: int, ul: float, dl: float) -> float:
    """Y = f_m F/U + f_m nu F/D"""
    f_m, big_f = s.user_cpu_hz[m], s.mec_cpu_hz
    return f_m * big_f / ul + f_m * s.result_ratio * big_f / dl


def optimal_mu_from_rates(s: NetworkScenario, m: int, ul: float, dl: float) -> float:
    if ul <= 0 or dl <= 0:
        raise OffloadImpossibleError(f"user {m} has no uplink or downlink, offloading is impossible")
    omega_f = s.cycles_per_bit_mec * s.user_cpu_hz[m]
    y = offload_penalty(s, m, ul, dl)
    return (omega_f + y) / (omega_f + y + s.cycles_per_bit_user[m] * s.mec_cpu_hz)


def collaborative_time_opt(s: NetworkScenario, m: int, ul: float, dl: float) -> float:
    """Collaborative delay at the optimal split; full local compute when offloading is impossible"""
    lam, f_m = s.task_bits[m], s.user_cpu_hz[m]
    if ul <= 0 or dl <= 0:
        return s.cycles_per_bit_user[m] * lam / f_m
    omega_f = s.cycles_per_bit_mec * f_m
    y = offload_penalty(s, m, ul, dl)
    omega_m = s.cycles_per_bit_user[m]
    return omega_m * lam * (omega_f + y) / (f_m * (omega_f + y + omega_m * s.mec_cpu_hz))


def _require(s: NetworkScenario, m: int, expected: TaskType) -> None:
    if not 0 <= m < s.n_users:
        raise IndexError(f"m={m} out of range [0, {s.n_users})")
    actual = TaskType(int(s.task_type[m]))
    if actual != expected:
        raise TaskTypeError(f"user {m} has a {actual.name.lower()} task, expected {expected.name.lower()}")


def edge_delay(s: NetworkScenario, g: GlobalAllocation, n: int, m: int) -> float:
    _require(s, m, TaskType.EDGE)
    return edge_time(s, m, dl_rate(s, g, n, m))


def local_delay(s: NetworkScenario, g: GlobalAllocation, n: int, m: int) -> float:
    _require(s, m, TaskType.LOCAL)
    return local_time(s, m, ul_rate(s, g, n, m))


def collaborative_delay(s: NetworkScenario, g: GlobalAllocation, n: int, m: int, mu: float) -> float:
    _require(s, m, TaskType.COLLABORATIVE)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    return collaborative_time(s, m, ul_rate(s, g, n, m), dl_rate(s, g, n, m), mu)


def optimal_mu(s: NetworkScenario, g: GlobalAllocation, n: int, m: int) -> float:
    """Split that balances the local and offload branches"""
    _require(s, m, TaskType.COLLABORATIVE)
    return optimal_mu_from_rates(s, m, ul_rate(s, g, n, m), dl_rate(s, g, n, m))


def collaborative_delay_opt(s: NetworkScenario, g: GlobalAllocation, n: int, m: int) -> float:
    _require(s, m, TaskType.COLLABORATIVE)
    return collaborative_time_opt(s, m, ul_rate(s, g, n, m), dl_rate(s, g, n, m))


def delays_from_rates(
    s: NetworkScenario,
    ul: np.ndarray,
    dl: np.ndarray,
    mu_policy: MuPolicy = "optimal",
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised per-user delays and splits.

    ul and dl are (..., M) sum rates from each user's serving BS. Returns
    (delays, mu) of the same shape; mu is 0 for non-collaborative users.
    """
    ul = np.asarray(ul, dtype=float)
    dl = np.asarray(dl, dtype=float)
    lam = s.task_bits
    f_m = s.user_cpu_hz
    omega_m = s.cycles_per_bit_user
    omega, big_f, nu = s.cycles_per_bit_mec, s.mec_cpu_hz, s.result_ratio
    ul_ok, dl_ok = ul > 0, dl > 0
    safe_ul = np.where(ul_ok, ul, 1.0)
    safe_dl = np.where(dl_ok, dl, 1.0)

    local_compute = omega_m * lam / f_m
    edge = np.where(dl_ok, omega * lam / big_f + nu * lam / safe_dl, np.inf)
    local = np.where(ul_ok, local_compute + nu * lam / safe_ul, np.inf)

    offload_ok = ul_ok & dl_ok
    if isinstance(mu_policy, str) and mu_policy == "optimal":
        y = f_m * big_f / safe_ul + f_m * nu * big_f / safe_dl
        omega_f = omega * f_m
        mu = np.where(offload_ok, (omega_f + y) / (omega_f + y + omega_m * big_f), 1.0)
        collab = np.where(
            offload_ok, omega_m * lam * (omega_f + y) / (f_m * (omega_f + y + omega_m * big_f)), local_compute
        )
    else:
        mu = _fixed_mu(mu_policy, ul.shape, rng)
        offload_branch = (1.0 - mu) * lam * (1.0 / safe_ul + omega / big_f + nu / safe_dl)
        offload_branch = np.where(offload_ok | (mu >= 1.0), offload_branch, np.inf)
        collab = np.maximum(omega_m * mu * lam / f_m, offload_branch)

    types = s.task_type
    delays = np.where(types == TaskType.EDGE, edge, np.where(types == TaskType.LOCAL, local, collab))
    mu = np.where(types == TaskType.COLLABORATIVE, mu, 0.0)
    return delays, mu


def _fixed_mu(mu_policy: MuPolicy, shape: tuple, rng: Optional[np.random.Generator]) -> np.ndarray:
    if isinstance(mu_policy, str):
        if mu_policy == "local":
            return np.ones(shape)
        if mu_policy == "edge":
            return np.zeros(shape)
        if mu_policy == "random":
            if rng is None:
                raise ValueError("mu_policy='random' needs an rng")
            return rng.random(shape)
        raise ValueError(f"unknown mu_policy '{mu_policy}', expected one of {MU_POLICIES} or an array")
    mu = np.broadcast_to(np.asarray(mu_policy, dtype=float), shape)
    if np.any((mu < 0) | (mu > 1)):
        raise ValueError("mu must lie in [0, 1]")
    return mu


def evaluate(
    s: NetworkScenario,
    g: GlobalAllocation,
    mu_policy: MuPolicy = "optimal",
    rng: Optional[np.random.Generator] = None,
) -> DelayReport:
    """Objective of the min-max problem: per-user delays over the resolved allocation"""
    ul, dl, _ = serving_rates(s, g.resolve_conflicts())
    delays, mu = delays_from_rates(s, ul, dl, mu_policy, rng)
    return DelayReport.from_delays(delays, mu)


def local_reference_delay(s: NetworkScenario, reference: str = "cycles_over_cpu") -> float:
    """Largest time a user needs to process its own task locally"""
    if reference == "cycles_over_cpu":
        return float(np.max(s.cycles_per_bit_user * s.task_bits / s.user_cpu_hz))
    if reference == "bits_over_cpu":
        return float(np.max(s.task_bits / s.user_cpu_hz))
    raise ValueError(f"unknown reward reference '{reference}'")
