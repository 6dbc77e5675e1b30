"""Physical layer of the MEC network: topology, Rayleigh block fading and
OFDMA uplink/downlink Shannon rates."""

import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from config import Config
from utils.errors import InfeasibleAllocationError, ScenarioError

logger = logging.getLogger(__name__)

# relative slack on power budgets; quantised levels sum exactly in theory
_BUDGET_RTOL = 1e-9


class TaskType(IntEnum):
    EDGE = 1
    LOCAL = 2
    COLLABORATIVE = 3


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def pairwise_distances(bs_positions: np.ndarray, user_positions: np.ndarray) -> np.ndarray:
    """BS-to-user distances in meters, shape (N, M), floored at MIN_DISTANCE_M"""
    diff = bs_positions[:, None, :] - user_positions[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    return np.maximum(dist, Config.Network.MIN_DISTANCE_M)


def draw_rayleigh_gains(
    rng: np.random.Generator, distances: np.ndarray, n_subcarriers: int, path_loss_exp: float
) -> np.ndarray:
    """Channel power gains |h|^2 = g * r^-delta with g ~ Exp(1), shape (N, M, K)"""
    n_bs, n_users = distances.shape
    fading = rng.exponential(1.0, size=(n_bs, n_users, n_subcarriers))
    return fading * distances[:, :, None] ** (-path_loss_exp)


@dataclass(frozen=True, eq=False)
class NetworkScenario:
    """Static world for one episode. All quantities in SI units."""

    n_bs: int
    n_users: int
    n_ul_subcarriers: int
    n_dl_subcarriers: int
    bandwidth_hz: float
    noise_power_w: float
    path_loss_exp: float
    bs_positions: np.ndarray
    user_positions: np.ndarray
    ul_gain: np.ndarray
    dl_gain: np.ndarray
    p_max_ul_w: float
    p_max_dl_w: float
    n_power_levels: int
    mec_cpu_hz: float
    user_cpu_hz: np.ndarray
    cycles_per_bit_mec: float
    cycles_per_bit_user: np.ndarray
    task_bits: np.ndarray
    result_ratio: float
    task_type: np.ndarray
    # set when the gains were derived from positions, used by seeded serialization
    seed: Optional[int] = field(default=None)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        n, m, i, j = self.n_bs, self.n_users, self.n_ul_subcarriers, self.n_dl_subcarriers
        if n < 1 or m < 1 or i < 0 or j < 0:
            raise ScenarioError(f"bad dimensions N={n} M={m} I={i} J={j}")
        if self.ul_gain.shape != (n, m, i):
            raise ScenarioError(f"ul_gain shape {self.ul_gain.shape} != {(n, m, i)}")
        if self.dl_gain.shape != (n, m, j):
            raise ScenarioError(f"dl_gain shape {self.dl_gain.shape} != {(n, m, j)}")
        if self.bs_positions.shape != (n, 2) or self.user_positions.shape != (m, 2):
            raise ScenarioError("position arrays must be (N, 2) and (M, 2)")
        for name in ("user_cpu_hz", "cycles_per_bit_user", "task_bits", "task_type"):
            if np.shape(getattr(self, name)) != (m,):
                raise ScenarioError(f"{name} must have one entry per user")
        scalars = {
            "bandwidth_hz": self.bandwidth_hz,
            "noise_power_w": self.noise_power_w,
            "path_loss_exp": self.path_loss_exp,
            "p_max_ul_w": self.p_max_ul_w,
            "p_max_dl_w": self.p_max_dl_w,
            "mec_cpu_hz": self.mec_cpu_hz,
            "cycles_per_bit_mec": self.cycles_per_bit_mec,
        }
        for name, value in scalars.items():
            if not value > 0:
                raise ScenarioError(f"{name} must be strictly positive, got {value}")
        for name in ("ul_gain", "dl_gain", "user_cpu_hz", "cycles_per_bit_user", "task_bits"):
            arr = getattr(self, name)
            if arr.size and not np.all(arr > 0):
                raise ScenarioError(f"{name} must be strictly positive")
        if not 0 < self.result_ratio <= 1:
            raise ScenarioError(f"result_ratio must lie in (0, 1], got {self.result_ratio}")
        if self.n_power_levels < 1:
            raise ScenarioError("n_power_levels must be >= 1")
        valid_types = {int(t) for t in TaskType}
        if not set(int(t) for t in self.task_type) <= valid_types:
            raise ScenarioError(f"task types must be in {sorted(valid_types)}")

    def with_updates(self, **changes) -> "NetworkScenario":
        return replace(self, **changes)

    @property
    def ul_power_step(self) -> float:
        return self.p_max_ul_w / self.n_power_levels

    @property
    def dl_power_step(self) -> float:
        return self.p_max_dl_w / self.n_power_levels

    def nearest_bs(self) -> np.ndarray:
        """Index of the closest BS for every user (lowest index on ties)"""
        return np.argmin(pairwise_distances(self.bs_positions, self.user_positions), axis=0)


@dataclass(frozen=True, eq=False)
class Allocation:
    """Joint action of one BS: indicators u, d and powers v, w (watts), shapes (M, I) / (M, J)"""

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    w: np.ndarray

    @classmethod
    def idle(cls, n_users: int, n_ul: int, n_dl: int) -> "Allocation":
        return cls(
            u=np.zeros((n_users, n_ul), dtype=np.int8),
            v=np.zeros((n_users, n_ul)),
            d=np.zeros((n_users, n_dl), dtype=np.int8),
            w=np.zeros((n_users, n_dl)),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Allocation):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("u", "v", "d", "w")
        )

    def users(self) -> np.ndarray:
        """Mask of users that receive at least one subcarrier"""
        return (self.u.sum(axis=1) + self.d.sum(axis=1)) > 0

    def violations(self, p_max_ul: float, p_max_dl: float) -> list[str]:
        problems = []
        for name in ("u", "d"):
            arr = getattr(self, name)
            if not np.all((arr == 0) | (arr == 1)):
                problems.append(f"{name} is not binary")
        if np.any(self.v < 0) or np.any(self.w < 0):
            problems.append("negative power")
        if np.any((self.v > 0) & (self.u == 0)):
            problems.append("uplink power on an unallocated subcarrier")
        if np.any((self.w > 0) & (self.d == 0)):
            problems.append("downlink power on an unallocated subcarrier")
        if self.u.size and np.any(self.u.sum(axis=0) > 1):
            problems.append("uplink subcarrier shared by several users")
        if self.d.size and np.any(self.d.sum(axis=0) > 1):
            problems.append("downlink subcarrier shared by several users")
        if self.v.sum() > p_max_ul * (1 + _BUDGET_RTOL):
            problems.append(f"uplink power {self.v.sum():.4g} W exceeds {p_max_ul} W")
        if self.w.sum() > p_max_dl * (1 + _BUDGET_RTOL):
            problems.append(f"downlink power {self.w.sum():.4g} W exceeds {p_max_dl} W")
        return problems

    def validate(self, s: NetworkScenario) -> None:
        if self.u.shape != (s.n_users, s.n_ul_subcarriers) or self.d.shape != (
            s.n_users,
            s.n_dl_subcarriers,
        ):
            raise InfeasibleAllocationError("allocation shape does not match the scenario")
        problems = self.violations(s.p_max_ul_w, s.p_max_dl_w)
        if problems:
            raise InfeasibleAllocationError("; ".join(problems))


@dataclass(frozen=True, eq=False)
class GlobalAllocation:
    per_bs: tuple[Allocation, ...]

    @classmethod
    def idle(cls, s: NetworkScenario) -> "GlobalAllocation":
        return cls(
            tuple(
                Allocation.idle(s.n_users, s.n_ul_subcarriers, s.n_dl_subcarriers)
                for _ in range(s.n_bs)
            )
        )

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(u, v, d, w) with a leading BS axis"""
        return tuple(np.stack([getattr(a, k) for a in self.per_bs]) for k in ("u", "v", "d", "w"))

    def serving_bs(self) -> np.ndarray:
        """BS that serves each user, -1 when no BS allocates anything to it"""
        served = np.stack([a.users() for a in self.per_bs])
        return np.where(served.any(axis=0), np.argmax(served, axis=0), -1)

    def validate(self, s: NetworkScenario) -> None:
        if len(self.per_bs) != s.n_bs:
            raise InfeasibleAllocationError(f"expected {s.n_bs} BS allocations, got {len(self.per_bs)}")
        for n, alloc in enumerate(self.per_bs):
            try:
                alloc.validate(s)
            except InfeasibleAllocationError as e:
                raise InfeasibleAllocationError(f"BS {n}: {e}") from e
        served = np.stack([a.users() for a in self.per_bs]).sum(axis=0)
        if np.any(served > 1):
            users = np.flatnonzero(served > 1).tolist()
            raise InfeasibleAllocationError(f"users {users} are connected to more than one BS")

    def resolve_conflicts(self) -> "GlobalAllocation":
        """Lowest-index BS keeps each user; other BSs' assignments to it are dropped"""
        owner = self.serving_bs()
        resolved = []
        for n, alloc in enumerate(self.per_bs):
            keep = (owner == n)[:, None]
            resolved.append(
                Allocation(
                    u=(alloc.u * keep).astype(np.int8),
                    v=alloc.v * keep,
                    d=(alloc.d * keep).astype(np.int8),
                    w=alloc.w * keep,
                )
            )
        return GlobalAllocation(tuple(resolved))


def _check_index(name: str, value: int, bound: int) -> None:
    if not 0 <= value < bound:
        raise IndexError(f"{name}={value} out of range [0, {bound})")


def ul_rate_subcarrier(s: NetworkScenario, g: GlobalAllocation, n: int, m: int, i: int) -> float:
    """Uplink Shannon rate of user m at BS n on subcarrier i, bits/s"""
    _check_index("n", n, s.n_bs)
    _check_index("m", m, s.n_users)
    _check_index("i", i, s.n_ul_subcarriers)
    alloc = g.per_bs[n]
    if alloc.u[m, i] == 0:
        return 0.0
    interference = sum(
        alloc.u[p, i] * alloc.v[p, i] * s.ul_gain[n, p, i] for p in range(s.n_users) if p != m
    )
    sinr = alloc.v[m, i] * s.ul_gain[n, m, i] / (s.noise_power_w + interference)
    return float(s.bandwidth_hz * np.log2(1.0 + sinr))


def dl_rate_subcarrier(s: NetworkScenario, g: GlobalAllocation, n: int, m: int, j: int) -> float:
    """Downlink Shannon rate from BS n to user m on subcarrier j, with inter-cell interference, bits/s"""
    _check_index("n", n, s.n_bs)
    _check_index("m", m, s.n_users)
    _check_index("j", j, s.n_dl_subcarriers)
    alloc = g.per_bs[n]
    if alloc.d[m, j] == 0:
        return 0.0
    interference = sum(
        g.per_bs[p].d[m, j] * g.per_bs[p].w[m, j] * s.dl_gain[p, m, j]
        for p in range(s.n_bs)
        if p != n
    )
    sinr = alloc.w[m, j] * s.dl_gain[n, m, j] / (s.noise_power_w + interference)
    return float(s.bandwidth_hz * np.log2(1.0 + sinr))


def ul_rate(s: NetworkScenario, g: GlobalAllocation, n: int, m: int) -> float:
    """Uplink sum rate over all subcarriers"""
    return sum(ul_rate_subcarrier(s, g, n, m, i) for i in range(s.n_ul_subcarriers))


def dl_rate(s: NetworkScenario, g: GlobalAllocation, n: int, m: int) -> float:
    """Downlink sum rate over all subcarriers"""
    return sum(dl_rate_subcarrier(s, g, n, m, j) for j in range(s.n_dl_subcarriers))


def rates_over_actions(
    gain: np.ndarray, indicator: np.ndarray, power: np.ndarray, bandwidth_hz: float, noise_w: float
) -> np.ndarray:
    """Per-user sum rates of one BS for a batch of actions.

    gain is (M, K); indicator and power are (..., M, K). Interference is the
    intra-BS co-channel term of the uplink SINR. Returns (..., M).
    """
    signal = indicator * power * gain
    interference = signal.sum(axis=-2, keepdims=True) - signal
    per_subcarrier = indicator * bandwidth_hz * np.log2(1.0 + power * gain / (noise_w + interference))
    return per_subcarrier.sum(axis=-1)


def link_rates(s: NetworkScenario, g: GlobalAllocation) -> tuple[np.ndarray, np.ndarray]:
    """All (N, M) uplink and downlink sum rates at once"""
    u, v, d, w = g.stacked()
    ul = rates_over_actions(s.ul_gain, u, v, s.bandwidth_hz, s.noise_power_w)

    signal = d * w * s.dl_gain
    interference = signal.sum(axis=0, keepdims=True) - signal
    dl_per_sc = d * s.bandwidth_hz * np.log2(1.0 + w * s.dl_gain / (s.noise_power_w + interference))
    return ul, dl_per_sc.sum(axis=-1)


def serving_rates(s: NetworkScenario, g: GlobalAllocation) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-user (U, D) from the serving BS, plus the serving BS index (-1 if unserved)"""
    ul, dl = link_rates(s, g)
    owner = g.serving_bs()
    users = np.arange(s.n_users)
    safe = np.maximum(owner, 0)
    served = owner >= 0
    return np.where(served, ul[safe, users], 0.0), np.where(served, dl[safe, users], 0.0), owner


def gains_from_seed(
    seed: int, bs_positions: np.ndarray, user_positions: np.ndarray, n_ul: int, n_dl: int, path_loss_exp: float
) -> tuple[np.ndarray, np.ndarray]:
    """Uplink then downlink gains from a dedicated stream, so positions + seed reproduce them"""
    rng = np.random.default_rng(seed)
    dist = pairwise_distances(bs_positions, user_positions)
    return (
        draw_rayleigh_gains(rng, dist, n_ul, path_loss_exp),
        draw_rayleigh_gains(rng, dist, n_dl, path_loss_exp),
    )
